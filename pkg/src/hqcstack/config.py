"""Service configuration: JSON file plus environment-variable overrides.

Environment variables (all optional) override file values: HQC_HOST,
HQC_PORT, HQC_SEED, HQC_NOISY, HQC_WINDOW_START_S, HQC_WINDOW_END_S,
HQC_MAX_JOBS_PER_USER_PER_DAY, HQC_MAX_JOB_WALLTIME_S,
HQC_MAX_SHOTS_PER_JOB, HQC_LEDGER_PATH. HQC_CONFIG names a default
config file for the CLI.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Mapping

from .accounting import AccountingService
from .backend.devices import device_preset
from .gateway import Gateway, GatewayPolicy

__all__ = ["ServiceConfig", "load_config", "bootstrap_accounting", "build_gateway"]

_DEMO_PROJECTS = {
    "proj-demo": {
        "members": ["demo"],
        "grants": {"cpu_core_seconds": 1e9, "qpu_seconds": 1e9, "shots": 1e9},
    }
}
_DEMO_TOKENS = {"demo-token": {"user": "demo", "project": "proj-demo"}}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    seed: int = 0
    noisy: bool = False
    window_start_s: float = 0.0
    window_end_s: float = 86400.0
    max_jobs_per_user_per_day: int = 10**9
    max_job_walltime_s: float = 1e9
    max_shots_per_job: int = 10**9
    devices: list[str] = field(default_factory=lambda: ["helmi-sim", "qal9000-sim"])
    signal_available: bool = True
    projects: dict = field(default_factory=lambda: dict(_DEMO_PROJECTS))
    tokens: dict = field(default_factory=lambda: dict(_DEMO_TOKENS))
    ledger_path: str | None = None
    result_retention: int = 10_000

    def gateway_policy(self) -> GatewayPolicy:
        return GatewayPolicy(
            window_start_s=self.window_start_s,
            window_end_s=self.window_end_s,
            max_jobs_per_user_per_day=self.max_jobs_per_user_per_day,
            max_job_walltime_s=self.max_job_walltime_s,
            max_shots_per_job=self.max_shots_per_job,
        )


_ENV_FIELDS = {
    "HQC_HOST": ("host", str),
    "HQC_PORT": ("port", int),
    "HQC_SEED": ("seed", int),
    "HQC_NOISY": ("noisy", lambda v: v.strip().lower() in ("1", "true", "yes")),
    "HQC_WINDOW_START_S": ("window_start_s", float),
    "HQC_WINDOW_END_S": ("window_end_s", float),
    "HQC_MAX_JOBS_PER_USER_PER_DAY": ("max_jobs_per_user_per_day", int),
    "HQC_MAX_JOB_WALLTIME_S": ("max_job_walltime_s", float),
    "HQC_MAX_SHOTS_PER_JOB": ("max_shots_per_job", int),
    "HQC_LEDGER_PATH": ("ledger_path", str),
}


def load_config(path: str | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
    env = os.environ if env is None else env
    config = ServiceConfig()
    if path:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        for key, value in data.items():
            if not hasattr(config, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(config, key, value)
    for var, (attr, cast) in _ENV_FIELDS.items():
        if var in env:
            setattr(config, attr, cast(env[var]))
    return config


def bootstrap_accounting(config: ServiceConfig, clock=None) -> AccountingService:
    kwargs = {"ledger_path": config.ledger_path}
    if clock is not None:
        kwargs["clock"] = clock
    accounting = AccountingService(**kwargs)
    for project_id, item in config.projects.items():
        accounting.open_project(item["members"], project_id=project_id)
        accounting.approve_project(project_id, item["grants"])
    for token, item in config.tokens.items():
        accounting.register_token(token, item["user"], item["project"])
    return accounting


def build_gateway(config: ServiceConfig, clock=None) -> tuple[AccountingService, Gateway]:
    """Accounting + gateway with the configured devices registered (and
    signalled available when configured so)."""
    accounting = bootstrap_accounting(config, clock=clock)
    kwargs = {}
    if clock is not None:
        kwargs["clock"] = clock
    gateway = Gateway(
        accounting,
        policy=config.gateway_policy(),
        noisy=config.noisy,
        seed=config.seed,
        result_retention=config.result_retention,
        **kwargs,
    )
    for device_id in config.devices:
        gateway.register_device(device_preset(device_id, seed=config.seed))
        if config.signal_available:
            gateway.signal_status(device_id, "available")
    return accounting, gateway
