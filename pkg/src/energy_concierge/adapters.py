"""Model adapters: the pluggable text-completion boundary.

The reference adapter is scripted: a JSON file maps (prompt role, turn
index) to canned responses, which makes every pipeline behaviour —
including failure and debugging paths — replayable offline, byte for
byte.  A thin HTTP client for OpenAI-style providers sits behind the same
interface for live use; it is never exercised by the test suite.

Prompt roles are read from the first line of each prompt, which every
packaged template starts with: `TASK: <role>`.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

TIMEOUT_SENTINEL = "__TIMEOUT__"


class AdapterTimeout(Exception):
    """The adapter did not answer within the configured budget."""


class AdapterError(Exception):
    """The adapter failed outright (transport error, exhausted script)."""


class ModelAdapter:
    """Interface: complete(prompt, n) returns exactly n reply texts."""

    max_prompt_chars: int = 200_000

    def complete(self, prompt: str, n: int = 1) -> List[str]:
        raise NotImplementedError


def prompt_role(prompt: str) -> str:
    first = prompt.split("\n", 1)[0].strip()
    if first.startswith("TASK:"):
        return first.split(":", 1)[1].strip().lower()
    return "general"


def _substitute(text: str, context: Dict[str, str]) -> str:
    for key, value in context.items():
        text = text.replace("{{" + key + "}}", str(value))
    return text


@dataclass
class Script:
    """Parsed adapter script.

    turns[role] is a list indexed by per-role call count.  Each entry is a
    string (replicated across the n requested samples) or a list of
    strings (padded with its last element).  The string "__TIMEOUT__"
    simulates an unresponsive provider.
    """

    name: str = "script"
    turns: Dict[str, List[Union[str, List[str]]]] = field(default_factory=dict)
    default: str = "I cannot help with that."
    user_turns: List[str] = field(default_factory=list)
    config: Dict[str, object] = field(default_factory=dict)

    @staticmethod
    def from_file(path: Union[str, Path], context: Optional[Dict[str, str]] = None) -> "Script":
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
        if context:
            raw = _substitute(raw, context)
        data = json.loads(raw)
        return Script.from_dict(data)

    @staticmethod
    def from_dict(data: dict) -> "Script":
        return Script(
            name=data.get("name", "script"),
            turns={k: list(v) for k, v in data.get("turns", {}).items()},
            default=data.get("default", "I cannot help with that."),
            user_turns=list(data.get("user_turns", [])),
            config=dict(data.get("config", {})),
        )


class ScriptedAdapter(ModelAdapter):
    """Deterministic adapter replaying a Script; safe for concurrent use."""

    def __init__(self, script: Script):
        self.script = script
        self._counts: Dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls = 0

    @staticmethod
    def from_file(path: Union[str, Path], context: Optional[Dict[str, str]] = None) -> "ScriptedAdapter":
        return ScriptedAdapter(Script.from_file(path, context))

    def complete(self, prompt: str, n: int = 1) -> List[str]:
        role = prompt_role(prompt)
        with self._lock:
            self.calls += 1
            turn = self._counts.get(role, 0)
            self._counts[role] = turn + 1
        entries = self.script.turns.get(role)
        if not entries:
            entry: Union[str, List[str]] = self.script.default
        else:
            entry = entries[min(turn, len(entries) - 1)]
        if isinstance(entry, str):
            replies = [entry] * n
        else:
            replies = list(entry[:n])
            while len(replies) < n:
                replies.append(entry[-1] if entry else self.script.default)
        if any(r == TIMEOUT_SENTINEL for r in replies):
            raise AdapterTimeout(f"scripted timeout on role {role!r}, turn {turn}")
        return replies


class HttpModelAdapter(ModelAdapter):
    """Minimal OpenAI-style chat-completions client.

    Configuration is explicit (offline-by-default elsewhere): base_url and
    model name come from the config; the API key is read from the
    environment only, never from files.
    """

    def __init__(self, base_url: str, model: str, api_key_env: str = "EC_API_KEY", timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def complete(self, prompt: str, n: int = 1) -> List[str]:
        import requests

        key = os.environ.get(self.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "n": n,
        }
        try:
            resp = requests.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout_s
            )
        except requests.Timeout as exc:
            raise AdapterTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise AdapterError(str(exc)) from exc
        if resp.status_code != 200:
            raise AdapterError(f"provider returned {resp.status_code}: {resp.text[:200]}")
        choices = resp.json().get("choices", [])
        texts = [c.get("message", {}).get("content", "") for c in choices]
        while len(texts) < n:
            texts.append(texts[-1] if texts else "")
        return texts[:n]
