"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2 (bad invocation),
everything else raised by the library -> 1 (runtime failure).
"""


class StcoocError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(StcoocError):
    """Invalid configuration or command-line usage."""


class FeatureFileError(StcoocError):
    """Malformed interest-point feature file.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message, line=None, path=None):
        self.message = message
        self.line = line
        self.path = path
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class BundleError(StcoocError):
    """Corrupt, incomplete or unsupported model bundle."""
