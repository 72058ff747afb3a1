"""Process boundary: CLI, session persistence, and the operator protocol."""
