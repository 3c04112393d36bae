"""HyperLTL satisfiability and model-checking workbench."""

__version__ = "0.1.0"
