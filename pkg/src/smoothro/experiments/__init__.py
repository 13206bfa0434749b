"""Desk-scale studies: set geometry, transshipment, robust shortest path, cross-validation."""
