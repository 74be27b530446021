"""corefal: an active-learning laboratory for coreference annotation."""

__version__ = "0.1.0"
