"""Word-context classification embeddings with fixed and adaptive noise samplers."""

__version__ = "0.1.0"
