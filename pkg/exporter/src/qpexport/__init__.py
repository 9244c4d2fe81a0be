"""qpexport: dump per-token encoder hidden states into QPEMB files."""

__version__ = "0.1.0"
