// Browser entry point: wires the socket, canvas, and buttons together.

import { ProtocolClient, type ServerFrame, type SocketLike } from "./protocol.js";
import { render } from "./render.js";
import { ViewTransform } from "./view.js";
import { ConsoleViewModel } from "./viewmodel.js";

const params = new URLSearchParams(location.search);
const url = params.get("gateway") ?? "ws://127.0.0.1:8765";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const vm = new ConsoleViewModel();
const view = new ViewTransform();

let client: ProtocolClient | null = null;
let fitted = false;

function connect(): void {
  const socket = new WebSocket(url) as unknown as SocketLike;
  client = new ProtocolClient(socket);
  client.onFrame = (frame: ServerFrame) => {
    vm.apply(frame, Date.now());
    if (!fitted && vm.snapshot) {
      view.fitArena(vm.snapshot.arena, canvas.width, canvas.height);
      fitted = true;
    }
  };
  // reconnect keeps the session going: the gateway pauses while we are
  // away and resumes on the next connection
  client.onClose = () => setTimeout(connect, 1000);
}
connect();

// -- map interaction ---------------------------------------------------

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const plan = vm.planClick(
    { x: ev.clientX - rect.left, y: ev.clientY - rect.top },
    view,
  );
  if (plan.kind === "send") client?.setWaypoint(plan.x, plan.y);
  else if (plan.kind === "toast") vm.toast = plan.message;
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const rect = canvas.getBoundingClientRect();
  view.zoomAt(
    { x: ev.clientX - rect.left, y: ev.clientY - rect.top },
    ev.deltaY < 0 ? 1.15 : 1 / 1.15,
  );
});

let dragging = false;
canvas.addEventListener("mousedown", () => (dragging = true));
window.addEventListener("mouseup", () => (dragging = false));
canvas.addEventListener("mousemove", (ev) => {
  if (dragging) view.panBy(ev.movementX, ev.movementY);
});

// -- buttons -----------------------------------------------------------

function button(id: string, action: () => void): HTMLButtonElement {
  const el = document.getElementById(id) as HTMLButtonElement;
  el.addEventListener("click", action);
  return el;
}

const buttons = {
  deploy: button("deploy", () => client?.deploy()),
  calibrate: button("calibrate", () => client?.calibrate()),
  reset: button("reset", () => client?.reset()),
  skip_reset: button("skip", () => client?.skipReset()),
};
button("truth", () => (vm.showTruth = !vm.showTruth));

// -- frame loop --------------------------------------------------------

function tick(): void {
  buttons.deploy.disabled = !vm.can("deploy");
  buttons.calibrate.disabled = !vm.can("calibrate");
  buttons.reset.disabled = !vm.can("reset");
  buttons.skip_reset.disabled = !vm.can("skip_reset");
  render(ctx, vm, view, Date.now());
  requestAnimationFrame(tick);
}
tick();
