"""HTTP facade over the experiment layer."""

from .app import create_app

__all__ = ["create_app"]
