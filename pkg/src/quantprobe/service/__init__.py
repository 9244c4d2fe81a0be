"""Service layer: FastAPI app, schemas, and the operations behind endpoints."""

from .app import create_app

__all__ = ["create_app"]
