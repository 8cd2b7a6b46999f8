"""Episode engine, error sweeps and the command-line interface."""
