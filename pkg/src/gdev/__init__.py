"""Subgraph-count deviations in the Erdős–Rényi models G(n, m) and G(n, p)."""

__version__ = "0.1.0"
