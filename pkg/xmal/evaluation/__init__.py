"""Downstream evaluation, statistics, and interpretability analyses."""
