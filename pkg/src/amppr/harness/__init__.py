"""Command-line experiment runner."""
