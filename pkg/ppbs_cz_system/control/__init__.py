"""Pipeline runner for configured experiments."""
