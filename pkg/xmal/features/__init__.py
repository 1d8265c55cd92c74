"""Lexicon psych scores, alignment targets, and text teachers."""
