"""Losses, student encoder, optimizers, and the training loop."""
