"""HTTP service: interactive segmentation sessions and classification."""

from .app import create_app

__all__ = ["create_app"]
