"""editkit: build instruction-based text editing datasets and evaluate editing systems."""

__version__ = "0.1.0"
