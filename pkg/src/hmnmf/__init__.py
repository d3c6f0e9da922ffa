"""Hierarchical multi-layer non-smooth NMF."""
