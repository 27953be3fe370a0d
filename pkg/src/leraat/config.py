"""Declarative server configuration with environment overrides.

One YAML file, sections mirroring the dataclasses below.  Every key can be
overridden with `LERAAT_<SECTION>_<KEY>` (values parsed as YAML, so
booleans and numbers work).  Precedence: environment > file > defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .advisor import DEFAULT_SYSTEM_PROMPT, DEFAULT_TOKEN_BUDGET
from .airports import DEFAULT_MAX_RESULTS, DEFAULT_MIN_RUNWAY_FT, DEFAULT_RADIUS_NM
from .retrieval import DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP, DEFAULT_TOP_K

ENV_PREFIX = "LERAAT"


class ConfigError(Exception):
    """Configuration unusable; message names the offending key or path."""


@dataclass(frozen=True)
class ServerSection:
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass(frozen=True)
class PathsSection:
    corpus_dir: str = ""
    index_file: str = ""
    airport_db: str = ""
    metar_file: str = ""
    metar_url: str = ""


@dataclass(frozen=True)
class RetrievalSection:
    k: int = DEFAULT_TOP_K
    chunk_size: int = DEFAULT_CHUNK_SIZE
    overlap: int = DEFAULT_OVERLAP
    embedder: str = "local"
    local_dim: int = 256
    remote_url: str = ""
    remote_model: str = ""


@dataclass(frozen=True)
class AlternatesSection:
    radius_nm: float = DEFAULT_RADIUS_NM
    min_runway_ft: int = DEFAULT_MIN_RUNWAY_FT
    max_results: int = DEFAULT_MAX_RESULTS


@dataclass(frozen=True)
class LlmSection:
    backend: str = "mock"
    base_url: str = ""
    model: str = ""
    api_key: str = ""
    timeout_s: float = 60.0
    max_attempts: int = 3


@dataclass(frozen=True)
class AdvisorSection:
    token_budget: int = DEFAULT_TOKEN_BUDGET
    interactive_sticky: bool = True
    alert_preempts: bool = False
    system_prompt: str = DEFAULT_SYSTEM_PROMPT


@dataclass(frozen=True)
class ServerConfig:
    server: ServerSection = field(default_factory=ServerSection)
    paths: PathsSection = field(default_factory=PathsSection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    alternates: AlternatesSection = field(default_factory=AlternatesSection)
    llm: LlmSection = field(default_factory=LlmSection)
    advisor: AdvisorSection = field(default_factory=AdvisorSection)


_SECTION_TYPES = {
    "server": ServerSection,
    "paths": PathsSection,
    "retrieval": RetrievalSection,
    "alternates": AlternatesSection,
    "llm": LlmSection,
    "advisor": AdvisorSection,
}


def _coerce(value, target_type, key: str):
    if target_type is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key} must be a boolean, got {value!r}")
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    raise ConfigError(f"{key}: unsupported type")


def _build_section(name: str, file_values: dict, environ) -> object:
    section_type = _SECTION_TYPES[name]
    known = {f.name: f.type for f in fields(section_type)}
    values = {}
    for key, value in file_values.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
        values[key] = value
    for key in known:
        env_name = f"{ENV_PREFIX}_{name.upper()}_{key.upper()}"
        if env_name in environ:
            try:
                values[key] = yaml.safe_load(environ[env_name])
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {env_name}: {exc}") from None
    defaults = section_type()
    coerced = {
        key: _coerce(value, type(getattr(defaults, key)), f"{name}.{key}")
        for key, value in values.items()
    }
    return replace(defaults, **coerced)


def load_config(path: str | Path | None = None, environ=None) -> ServerConfig:
    """Read the YAML file (optional), apply env overrides, return the config."""
    environ = os.environ if environ is None else environ
    file_data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping of sections")
        file_data = loaded
    unknown = set(file_data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    sections = {}
    for name in _SECTION_TYPES:
        section_values = file_data.get(name, {})
        if section_values is None:
            section_values = {}
        if not isinstance(section_values, dict):
            raise ConfigError(f"section {name} must be a mapping")
        sections[name] = _build_section(name, section_values, environ)
    return ServerConfig(**sections)


def validate_config(config: ServerConfig) -> None:
    """Fail fast, naming each missing resource or out-of-range value."""
    problems: list[str] = []
    if not 1 <= config.server.port <= 65535:
        problems.append(f"server.port out of range: {config.server.port}")
    if config.retrieval.k < 1:
        problems.append(f"retrieval.k must be >= 1, got {config.retrieval.k}")
    if not (0 <= config.retrieval.overlap < config.retrieval.chunk_size):
        problems.append("retrieval chunking needs chunk_size > overlap >= 0")
    if config.retrieval.embedder not in ("local", "remote"):
        problems.append(f"retrieval.embedder must be local or remote: {config.retrieval.embedder!r}")
    if config.retrieval.embedder == "remote" and not config.retrieval.remote_url:
        problems.append("retrieval.remote_url required for the remote embedder")
    if config.llm.backend not in ("mock", "remote"):
        problems.append(f"llm.backend must be mock or remote: {config.llm.backend!r}")
    if config.llm.backend == "remote" and not config.llm.base_url:
        problems.append("llm.base_url required for the remote backend")
    if config.alternates.radius_nm <= 0:
        problems.append("alternates.radius_nm must be positive")
    if config.alternates.max_results < 1:
        problems.append("alternates.max_results must be >= 1")
    if config.advisor.token_budget < 1:
        problems.append("advisor.token_budget must be >= 1")

    if not config.paths.airport_db:
        problems.append("paths.airport_db is required")
    elif not Path(config.paths.airport_db).is_file():
        problems.append(f"paths.airport_db not found: {config.paths.airport_db}")
    if not config.paths.index_file and not config.paths.corpus_dir:
        problems.append("one of paths.index_file or paths.corpus_dir is required")
    if config.paths.corpus_dir and not Path(config.paths.corpus_dir).is_dir():
        problems.append(f"paths.corpus_dir not found: {config.paths.corpus_dir}")
    if (
        config.paths.index_file
        and not Path(config.paths.index_file).is_file()
        and not config.paths.corpus_dir
    ):
        problems.append(
            f"paths.index_file not found and no corpus_dir to build from: {config.paths.index_file}"
        )
    if config.paths.metar_file and not Path(config.paths.metar_file).is_file():
        problems.append(f"paths.metar_file not found: {config.paths.metar_file}")
    if problems:
        raise ConfigError("; ".join(problems))
