"""Document-grounded tool-calling chat agent over a chemical-safety corpus."""

__version__ = "0.1.0"
