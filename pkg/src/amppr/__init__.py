"""AMP.A for complex phase retrieval: solver, state evolution and spectral initialisation."""

__version__ = "0.1.0"
