"""HTTP service exposing the transport pipeline; the CLI is a client of it."""

from srot.service.app import create_app

__all__ = ["create_app"]
