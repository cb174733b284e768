"""
Command-line surface: gen-data, train, eval, diagnose, emit-plots, sample.
"""

from .main import main

__all__ = ["main"]
