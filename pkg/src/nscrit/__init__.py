"""nscrit: critical-space norms, bilinear estimates and Picard solves for Navier-Stokes mild solutions."""

__version__ = "0.1.0"
__author__ = "nscrit Contributors"

from .main import app, cli_main

__all__ = ["app", "cli_main"]
