"""Configuration, errors, run state and tabular I/O."""
