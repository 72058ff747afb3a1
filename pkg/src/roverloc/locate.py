"""Trilateration: estimate the rover's 2D position in the UWB frame from
range measurements to known anchors.

The fix minimizes sum_i (||p - a_i|| - d_i)^2 by Gauss-Newton with
Levenberg-Marquardt damping. GDOP quantifies how the anchor geometry
amplifies range noise into position noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from roverloc.geometry import Point2
from roverloc.ranging import RangeMeasurement, RangeQuality

__all__ = [
    "AnchorMap",
    "FixResult",
    "SolverConfig",
    "LocateError",
    "InsufficientAnchors",
    "SingularGeometry",
    "NoConvergence",
    "trilaterate",
    "gdop",
    "select_measurements",
]

MIN_ANCHOR_SEPARATION = 0.1  # m; closer pairs are degenerate geometry


class LocateError(Exception):
    pass


class InsufficientAnchors(LocateError):
    """Fewer than 3 usable range measurements."""


class SingularGeometry(LocateError):
    """Anchor geometry is rank-deficient (e.g. collinear anchors)."""


class NoConvergence(LocateError):
    """Solver hit the iteration cap without an acceptable step."""


@dataclass(frozen=True)
class AnchorMap:
    """Known anchor positions in the UWB frame, keyed by id."""

    anchors: tuple

    def __init__(self, anchors):
        items = tuple((str(a_id), pos) for a_id, pos in anchors)
        if not items:
            raise ValueError("anchor map must contain at least one anchor")
        ids = [a for a, _ in items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate anchor ids: {ids}")
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                d = items[i][1].distance_to(items[j][1])
                if d < MIN_ANCHOR_SEPARATION:
                    raise ValueError(
                        f"anchors {items[i][0]} and {items[j][0]} only {d:.3f} m apart"
                    )
        object.__setattr__(self, "anchors", items)

    def position_of(self, anchor_id: str) -> Point2:
        for a_id, pos in self.anchors:
            if a_id == anchor_id:
                return pos
        raise KeyError(anchor_id)

    def ids(self) -> list:
        return [a_id for a_id, _ in self.anchors]

    def __len__(self) -> int:
        return len(self.anchors)


@dataclass(frozen=True)
class FixResult:
    """A trilateration solution with quality diagnostics."""

    position: Point2
    residual_rms: float
    iterations: int
    gdop: float
    used_anchor_ids: tuple
    timestamp: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50
    step_tolerance: float = 1e-6  # m; converged when the step is smaller
    divergence_step: float = 1e-3  # m; hitting the cap above this is NoConvergence
    initial_lambda: float = 1e-3
    condition_limit: float = 1e12
    huber_delta: float | None = None  # m; robust loss, off by default


def _residuals(p: np.ndarray, anchors: np.ndarray, dists: np.ndarray) -> np.ndarray:
    return np.linalg.norm(anchors - p, axis=1) - dists


def _sym2_cond(a: float, b: float, c: float) -> float:
    """Condition number of the symmetric 2x2 matrix [[a, b], [b, c]]."""
    tr = a + c
    disc = math.sqrt(max((a - c) ** 2 + 4.0 * b * b, 0.0))
    lo, hi = (tr - disc) / 2.0, (tr + disc) / 2.0
    if lo <= 0.0:
        return math.inf
    return hi / lo


def _huber_weights(r: np.ndarray, delta: float) -> np.ndarray:
    w = np.ones_like(r)
    big = np.abs(r) > delta
    w[big] = np.sqrt(delta / np.abs(r[big]))
    return w


def _solve_from(p0: np.ndarray, a: np.ndarray, d: np.ndarray, config: SolverConfig):
    """Levenberg-Marquardt descent from one starting point."""
    p = p0.astype(float)
    lam = config.initial_lambda
    r = _residuals(p, a, d)
    cost = float(r @ r)
    iterations = 0
    step_norm = np.inf
    for iterations in range(1, config.max_iterations + 1):
        diff = p - a
        dist = np.linalg.norm(diff, axis=1)
        dist = np.where(dist < 1e-12, 1e-12, dist)
        jac = diff / dist[:, None]
        if config.huber_delta is not None:
            w = _huber_weights(r, config.huber_delta)
            jac_w, r_w = jac * w[:, None], r * w
        else:
            jac_w, r_w = jac, r
        jtj = jac_w.T @ jac_w
        g00, g01, g11 = float(jtj[0, 0]), float(jtj[0, 1]), float(jtj[1, 1])
        if _sym2_cond(g00, g01, g11) > config.condition_limit:
            raise SingularGeometry(
                f"normal equations condition number exceeds {config.condition_limit:g}"
            )
        rhs = -jac_w.T @ r_w
        a00, a11 = g00 + lam, g11 + lam
        det = a00 * a11 - g01 * g01
        step = np.array([
            (a11 * float(rhs[0]) - g01 * float(rhs[1])) / det,
            (a00 * float(rhs[1]) - g01 * float(rhs[0])) / det,
        ])
        step_norm = float(np.linalg.norm(step))
        trial = p + step
        r_trial = _residuals(trial, a, d)
        trial_cost = float(r_trial @ r_trial)
        if trial_cost <= cost:
            p, r, cost = trial, r_trial, trial_cost
            lam = max(lam / 10.0, 1e-12)
            if step_norm < config.step_tolerance:
                break
        else:
            lam *= 10.0
    else:
        if step_norm >= config.divergence_step:
            raise NoConvergence(
                f"no convergence after {config.max_iterations} iterations "
                f"(last step {step_norm:.2e} m)"
            )
    return p, r, cost, iterations


def trilaterate(
    anchors: AnchorMap,
    ranges: list,
    initial_guess: Point2 | None = None,
    config: SolverConfig = SolverConfig(),
) -> FixResult:
    """Solve for the position best matching the measured ranges.

    Needs at least 3 OK measurements to distinct anchors in the map (two
    ranges leave a mirror ambiguity). A warm initial guess (the previous
    fix) is used alone; a cold start tries the anchor centroid and every
    anchor position, keeping the lowest-cost converged solution, since
    range trilateration has local minima away from the constellation
    center.
    """
    usable = {}
    known = set(anchors.ids())
    for m in ranges:
        if m.quality is not RangeQuality.OK or m.anchor_id not in known:
            continue
        usable[m.anchor_id] = m  # last one wins; caller pre-filters freshness
    if len(usable) < 3:
        raise InsufficientAnchors(
            f"need >= 3 usable ranges to distinct anchors, got {len(usable)}"
        )

    used_ids = sorted(usable)
    a = np.array([anchors.position_of(i).as_array() for i in used_ids])
    d = np.array([usable[i].distance for i in used_ids])
    ts = max(usable[i].timestamp for i in used_ids)

    if initial_guess is not None:
        starts = [initial_guess.as_array().astype(float)]
    else:
        starts = [a.mean(axis=0)] + list(a)

    best = None
    first_error = None
    for p0 in starts:
        try:
            p, r, cost, iterations = _solve_from(p0, a, d, config)
        except (SingularGeometry, NoConvergence) as exc:
            if first_error is None:
                first_error = exc
            continue
        if best is None or cost < best[2]:
            best = (p, r, cost, iterations)
    if best is None:
        raise first_error
    p, r, cost, iterations = best

    position = Point2.from_array(p)
    return FixResult(
        position=position,
        residual_rms=float(np.sqrt(np.mean(r**2))),
        iterations=iterations,
        gdop=gdop(anchors, position, anchor_ids=used_ids),
        used_anchor_ids=tuple(used_ids),
        timestamp=ts,
    )


def gdop(anchors: AnchorMap, position: Point2, anchor_ids: list | None = None) -> float:
    """Geometric dilution of precision at a position.

    sqrt(trace((J^T J)^-1)) with rows of J the unit vectors from each
    anchor to the position. Adding an anchor never increases it.
    """
    ids = anchor_ids if anchor_ids is not None else anchors.ids()
    if len(ids) < 3:
        raise InsufficientAnchors(f"gdop needs >= 3 anchors, got {len(ids)}")
    a = np.array([anchors.position_of(i).as_array() for i in ids])
    diff = position.as_array() - a
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist < 1e-9):
        raise ValueError("position coincides with an anchor")
    jac = diff / dist[:, None]
    jtj = jac.T @ jac
    g00, g01, g11 = float(jtj[0, 0]), float(jtj[0, 1]), float(jtj[1, 1])
    if _sym2_cond(g00, g01, g11) > 1e12:
        raise SingularGeometry("anchor geometry is numerically singular")
    det = g00 * g11 - g01 * g01
    # trace of the 2x2 inverse
    return float(math.sqrt((g00 + g11) / det))


def select_measurements(ranges: list, window: float = 0.5, now: float = 0.0) -> list:
    """Newest OK measurement per anchor within [now - window, now]."""
    newest: dict = {}
    for m in ranges:
        if m.quality is not RangeQuality.OK:
            continue
        if not (now - window <= m.timestamp <= now):
            continue
        prev = newest.get(m.anchor_id)
        if prev is None or m.timestamp > prev.timestamp:
            newest[m.anchor_id] = m
    return [newest[k] for k in sorted(newest)]
