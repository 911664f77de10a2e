"""Shared exception hierarchy.

Module-specific errors subclass ``SceneSmithError`` so the CLI and service
can map any engine failure to a structured error payload.
"""

from __future__ import annotations


class SceneSmithError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self)}
