"""Runtime configuration with flags > environment > config file precedence.

Environment variables use the EC_ prefix; the config file is `ec.toml`
in the working directory (or EC_CONFIG).  Documented keys:

    port             int    HTTP port for `serve`            (default 8765)
    data_dir         str    session snapshots + trace log    (default ./ec_data)
    adapter          str    'scripted:<path>' | 'http:<base_url>|<model>' | 'none'
    samples          int    candidate documents per solve    (default 5)
    max_debug        int    debug-iteration cap              (default 5)
    adapter_timeout  float  seconds per adapter call         (default 30)
    persistence      str    'memory' | 'file'                (default 'file')

The provider API key is read only from the environment (EC_API_KEY),
never from files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .adapters import ModelAdapter, ScriptedAdapter, HttpModelAdapter
from .pipeline import PipelineConfig

DEFAULTS: Dict[str, object] = {
    "port": 8765,
    "data_dir": "ec_data",
    "adapter": "scripted:fixtures/scripts/ev_happy.json",
    "samples": 5,
    "max_debug": 5,
    "adapter_timeout": 30.0,
    "persistence": "file",
}


@dataclass
class AppConfig:
    port: int = 8765
    data_dir: str = "ec_data"
    adapter: str = "scripted:fixtures/scripts/ev_happy.json"
    samples: int = 5
    max_debug: int = 5
    adapter_timeout: float = 30.0
    persistence: str = "file"

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            samples=self.samples,
            max_debug_iterations=self.max_debug,
            adapter_timeout_s=self.adapter_timeout,
        )

    def build_adapter(self) -> Optional[ModelAdapter]:
        """Offline by default: nothing here talks to a live provider unless
        the adapter value explicitly names one."""
        spec = self.adapter.strip()
        if spec == "none" or not spec:
            return None
        if spec.startswith("scripted:"):
            return ScriptedAdapter.from_file(spec.split(":", 1)[1])
        if spec.startswith("http:"):
            rest = spec.split(":", 1)[1]
            base_url, _, model = rest.partition("|")
            return HttpModelAdapter(base_url, model or "default")
        raise ValueError(f"unknown adapter spec {spec!r}")


def load_config(flags: Optional[Dict[str, object]] = None, cwd: Optional[Path] = None) -> AppConfig:
    """Merge flags > EC_* environment > ec.toml > defaults."""
    merged = dict(DEFAULTS)

    config_path = os.environ.get("EC_CONFIG", str((cwd or Path.cwd()) / "ec.toml"))
    path = Path(config_path)
    if path.exists():
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        for key in DEFAULTS:
            if key in data:
                merged[key] = data[key]

    env_map = {
        "port": "EC_PORT",
        "data_dir": "EC_DATA_DIR",
        "adapter": "EC_ADAPTER",
        "samples": "EC_SAMPLES",
        "max_debug": "EC_MAX_DEBUG",
        "adapter_timeout": "EC_ADAPTER_TIMEOUT",
        "persistence": "EC_PERSISTENCE",
    }
    for key, env in env_map.items():
        if env in os.environ:
            merged[key] = os.environ[env]

    for key, value in (flags or {}).items():
        if value is not None and key in merged:
            merged[key] = value

    return AppConfig(
        port=int(merged["port"]),
        data_dir=str(merged["data_dir"]),
        adapter=str(merged["adapter"]),
        samples=int(merged["samples"]),
        max_debug=int(merged["max_debug"]),
        adapter_timeout=float(merged["adapter_timeout"]),
        persistence=str(merged["persistence"]),
    )
