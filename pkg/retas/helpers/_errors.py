# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


class RetasError(Exception):
    """Base class for every error raised by retas."""

    exit_code = 1


class ConfigError(RetasError):
    """Malformed run configuration or command-line usage."""

    exit_code = 1


class DataError(RetasError):
    """Unreadable or inconsistent input data."""

    exit_code = 2


class DomainError(RetasError, ValueError):
    """A kernel or model function was called outside its domain."""

    exit_code = 3


class NumericalError(RetasError):
    """A computation produced a non-finite or degenerate result."""

    exit_code = 3


class SupercriticalError(NumericalError):
    """A simulated cascade exceeded the event limit."""
