"""Exception hierarchy shared across the harness.

The CLI maps these onto its exit-code contract: configuration and file-format
problems exit 2, missing data exits 3, anything else exits 4.
"""


class QuantProbeError(Exception):
    """Base class for all harness errors."""


class ConfigError(QuantProbeError):
    """Invalid configuration or unsatisfiable task/range combination."""


class DataFormatError(QuantProbeError):
    """Malformed input file (lexicon, dataset, embedding container, manifest)."""


class MissingDataError(QuantProbeError):
    """Required data is absent (e.g. embedding files not yet exported)."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = list(missing or [])


class ShapeError(QuantProbeError):
    """Programming error: incompatible array shapes inside the kernel."""
