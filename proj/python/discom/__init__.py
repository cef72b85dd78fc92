"""Python bindings for the discom platform.

The native module does the work; this package adds JSON decoding and a
small client for the in-process platform.
"""

import json

from ._discom import DiscomError, Platform, Workbook, run_cli
from ._discom import replay_scenario as _replay

__all__ = ["DiscomError", "Platform", "Workbook", "Session", "replay_scenario", "run_cli"]


def replay_scenario(path):
    """Replay a trace file. Returns (ok, failures, snapshot dict)."""
    ok, failures, snapshot = _replay(str(path))
    return ok, failures, json.loads(snapshot)


class Session:
    """One logged-in user talking JSON to a Platform."""

    def __init__(self, platform, user, secret):
        self.platform = platform
        self.token = ""
        self.token = self.call("POST", "/login", {"user": user, "secret": secret})["token"]

    def call(self, method, path, body=None):
        status, text = self.platform.request(
            method, "/api/v1" + path, "" if body is None else json.dumps(body), self.token
        )
        data = json.loads(text) if text else None
        if status >= 300:
            raise DiscomError(f"{status} {data.get('error')}: {data.get('message')}")
        return data
