"""Structural validators for manifests, outcome rows, and matrices."""
