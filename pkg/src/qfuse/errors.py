"""Errors raised across the pipeline, mapped to CLI exit codes."""


class QfuseError(Exception):
    """Base class for pipeline errors."""


class ConfigError(QfuseError):
    """Invalid or inconsistent run configuration (exit code 2)."""


class MissingArtifactError(QfuseError):
    """A required upstream artifact does not exist (exit code 3)."""


class DataError(QfuseError):
    """Malformed or unusable input data (exit code 4)."""
