"""Exact verification of local models of involution surface bundles."""
