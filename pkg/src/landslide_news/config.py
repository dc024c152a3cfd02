"""Run configuration: sectioned key-value file, environment and flag overrides."""

from __future__ import annotations

import configparser
import dataclasses
import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .geolocate import ENDPOINT_ENV, ClientConfig
from .salience import CohortMode


class ConfigError(ValueError):
    pass


# keys that only change how fast or where a run happens, not what it produces
EXECUTION_KEYS = frozenset({"out_dir", "cache_dir", "endpoint", "max_inflight", "jobs", "timeout"})

PATH_KEYS = ("documents", "countries", "adjustments", "emdat", "wbglhm", "risk",
             "development", "income", "gold", "system_prompt_file", "instruction_file",
             "out_dir", "cache_dir")

_SECTIONS = {
    "run": ("period_start", "period_end", "home_country", "max_gap", "band_fraction",
            "cohort_mode", "emdat_mode", "keyword_filter", "keywords", "home_terms",
            "concat_threshold", "countries_from", "jobs"),
    "paths": ("documents", "countries", "adjustments", "emdat", "wbglhm", "risk",
              "development", "income", "gold", "out_dir"),
    "client": ("endpoint", "model", "system_prompt_file", "instruction_file", "max_retries",
               "timeout", "max_inflight", "char_budget", "backoff", "abort_fraction",
               "cache_dir"),
}


@dataclass
class RunConfig:
    period_start: dt.date = dt.date(2000, 1, 1)
    period_end: dt.date = dt.date(2024, 12, 31)
    home_country: str | None = None
    max_gap: int = 4
    band_fraction: float = 0.25
    cohort_mode: str = CohortMode.ANY_NONZERO.value
    emdat_mode: str = "yearly"
    keyword_filter: bool = True
    keywords: tuple[str, ...] = ()
    home_terms: tuple[str, ...] = ()
    concat_threshold: int = 20000
    countries_from: str = "geolocate"
    jobs: int = 1

    documents: str | None = None
    countries: str | None = None
    adjustments: str | None = None
    emdat: str | None = None
    wbglhm: str | None = None
    risk: str | None = None
    development: str | None = None
    income: str | None = None
    gold: str | None = None
    out_dir: str = "out"

    endpoint: str = "http://localhost:1234/v1"
    model: str = "mistralai/devstral-small-2-2512"
    system_prompt_file: str | None = None
    instruction_file: str | None = None
    max_retries: int = 3
    timeout: float = 120.0
    max_inflight: int = 4
    char_budget: int = 8000
    backoff: float = 0.5
    abort_fraction: float = 0.5
    cache_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.period_start > self.period_end:
            raise ConfigError("period_start is after period_end")
        if self.max_gap < 0:
            raise ConfigError("max_gap must be >= 0")
        if not 0 < self.band_fraction < 1:
            raise ConfigError("band_fraction must lie strictly between 0 and 1")
        try:
            CohortMode(self.cohort_mode)
        except ValueError:
            raise ConfigError(f"unknown cohort mode {self.cohort_mode!r}") from None
        if self.emdat_mode not in ("yearly", "total"):
            raise ConfigError(f"unknown emdat_mode {self.emdat_mode!r}")
        if self.countries_from not in ("geolocate", "gold"):
            raise ConfigError(f"countries_from must be geolocate or gold")
        if self.max_retries < 0 or self.max_inflight < 1 or self.jobs < 1:
            raise ConfigError("max_retries >= 0, max_inflight >= 1 and jobs >= 1 required")
        if self.home_country is not None:
            self.home_country = self.home_country.upper()

    @property
    def period(self) -> tuple[dt.date, dt.date]:
        return self.period_start, self.period_end

    def indicator_files(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in ("emdat", "wbglhm", "risk", "development",
                                              "income") if getattr(self, k)}

    def client_config(self) -> ClientConfig:
        kwargs = {}
        if self.system_prompt_file:
            kwargs["system_prompt"] = Path(self.system_prompt_file).read_text("utf-8").strip()
        if self.instruction_file:
            kwargs["instruction_template"] = Path(self.instruction_file).read_text(
                "utf-8").strip()
        return ClientConfig(endpoint_url=self.endpoint, model_name=self.model,
                            max_retries=self.max_retries, timeout=self.timeout,
                            max_inflight=self.max_inflight, char_budget=self.char_budget,
                            backoff=self.backoff, abort_fraction=self.abort_fraction, **kwargs)

    def to_dict(self, include_execution: bool = False) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if not include_execution and f.name in EXECUTION_KEYS:
                continue
            v = getattr(self, f.name)
            if isinstance(v, dt.date):
                v = v.isoformat()
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _coerce(name: str, raw):
    if name not in {f.name for f in dataclasses.fields(RunConfig)}:
        raise ConfigError(f"unknown config key {name!r}")
    if raw is None:
        return None
    try:
        if name in ("period_start", "period_end"):
            return raw if isinstance(raw, dt.date) else dt.date.fromisoformat(str(raw))
        if name in ("keywords", "home_terms"):
            if isinstance(raw, (list, tuple)):
                return tuple(raw)
            return tuple(s.strip() for s in str(raw).split(",") if s.strip())
        if name == "keyword_filter":
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if name in ("max_gap", "concat_threshold", "jobs", "max_retries",
                                     "max_inflight", "char_budget"):
            return int(raw)
        if name in ("band_fraction", "timeout", "backoff", "abort_fraction"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    raw = str(raw).strip()
    return raw or None if name in PATH_KEYS or name == "home_country" else raw


def load_config(path=None, overrides: dict | None = None, env=None) -> RunConfig:
    """Resolve defaults < config file < environment < explicit overrides.

    ``path`` may be an INI file or a JSON run manifest (its ``config`` entry).
    Relative paths in a file are taken relative to the file's directory.
    """
    env = os.environ if env is None else env
    values: dict = {}
    base = None
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        base = path.parent
        if path.suffix == ".json":
            data = json.loads(path.read_text("utf-8"))
            values.update(data.get("config", data))
        else:
            parser = configparser.ConfigParser(interpolation=None)
            try:
                parser.read(path, encoding="utf-8")
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from exc
            for section in parser.sections():
                if section not in _SECTIONS:
                    raise ConfigError(f"{path}: unknown section [{section}]")
                for key, value in parser[section].items():
                    if key not in _SECTIONS[section]:
                        raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                    values[key] = value
    if env.get(ENDPOINT_ENV):
        values["endpoint"] = env[ENDPOINT_ENV]
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    resolved = {k: _coerce(k, v) for k, v in values.items()}
    for k in PATH_KEYS:
        v = resolved.get(k)
        if v and base is not None and (overrides or {}).get(k) is None and not Path(v).is_absolute():
            resolved[k] = str((base / v).resolve())
    resolved = {k: v for k, v in resolved.items() if v is not None}
    try:
        return RunConfig(**resolved)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
