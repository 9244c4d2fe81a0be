"""quantprobe: measure how well token embeddings encode quantitative values.

Six seeded synthetic probing tasks, three trainable probe architectures over
pluggable frozen embedding providers, and a five-run experiment protocol with
mean and standard-deviation reporting. Exposed as a Python API, a FastAPI
service, and a CLI that drives the service.
"""

__version__ = "0.1.0"
