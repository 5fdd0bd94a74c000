"""HTTP review/processing service."""

from .app import create_app
from .config import ServiceConfig
from .jobs import Job, JobRegistry
from .store import DocumentStore

__all__ = ["Job", "JobRegistry", "DocumentStore", "ServiceConfig", "create_app"]
