"""Unit tests for pycorv."""
