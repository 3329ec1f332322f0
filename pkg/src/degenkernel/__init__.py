"""Heat kernel laboratory for the operator (1 + |x|^alpha) Laplacian - |x|^beta."""

__version__ = "0.1.0"
