"""Two-mode bosonic phase-estimation workbench."""

__version__ = "1.0.0"
