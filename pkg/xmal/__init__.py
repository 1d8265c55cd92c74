"""Cross-modal alignment distillation toolkit."""

from .main import AlignmentPipeline

__all__ = ["AlignmentPipeline"]
