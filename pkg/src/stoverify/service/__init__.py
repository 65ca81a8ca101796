"""HTTP service wrapper: pydantic schemas, pure operation handlers, FastAPI app."""

from .app import app, create_app  # noqa: F401
