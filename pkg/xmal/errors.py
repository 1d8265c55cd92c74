"""Exception hierarchy shared across the toolkit.

Each class maps to one CLI exit code so that ``xmal.cli.main`` can translate
failures without inspecting messages.
"""

from __future__ import annotations


class XmalError(ValueError):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(XmalError):
    """Invalid configuration or command usage."""

    exit_code = 1


class DataError(XmalError):
    """Missing, malformed, or inconsistent data and artifacts."""

    exit_code = 2


class NumericalError(XmalError):
    """Zero-norm embeddings, non-finite losses, and other numerical failures."""

    exit_code = 3
