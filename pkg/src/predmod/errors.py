"""Exception types shared across the package."""

from __future__ import annotations


class PredmodError(Exception):
    """Base class for package errors."""


class ConfigurationError(PredmodError, ValueError):
    """A declared object (world, model spec, policy, config) violates its constraints."""


class InputError(PredmodError, ValueError):
    """A runtime argument is malformed (wrong shape, mismatched pair, bad bounds)."""


class TrainingError(PredmodError, RuntimeError):
    """Model fitting failed; the message names the cause (e.g. rank deficiency)."""


class ValidationError(ConfigurationError):
    """A config file failed validation; carries every violation, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
