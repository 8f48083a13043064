"""
Configuration for the copycat simulator

Runtime settings come from the environment (optionally a .env file); scenario
parameters come from a `key = value` scenario file validated by ScenarioConfig.
"""
import os
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from models.schemas import ScenarioConfig

load_dotenv()

VERSION = "1.0.0"


class Config:
    """Application configuration from environment variables"""

    OUTPUT_DIR: str = os.environ.get("COPYCAT_OUTPUT_DIR", "results")
    LOG_LEVEL: str = os.environ.get("COPYCAT_LOG_LEVEL", "INFO").upper()
    WORKERS: int = int(os.environ.get("COPYCAT_WORKERS", "1"))
    # Keeps the executed-event log of every run in memory; only useful when debugging
    KEEP_EVENT_LOG: bool = os.environ.get("COPYCAT_KEEP_EVENT_LOG", "").lower() in ("1", "true", "yes", "on")


config = Config()


class ConfigError(ValueError):
    """Malformed or out-of-range scenario file entry"""

    def __init__(self, message: str, key: str = "", line: int = 0):
        self.key = key
        self.line = line
        where = f"{key} (line {line})" if line else key
        super().__init__(f"{where}: {message}" if where else message)


# ── Scenario file ────────────────────────────────────────────
SECTIONS = ("radio", "energy", "duty", "rpl", "detector")


def _strip_comment(raw: str) -> str:
    quote = None
    for i, ch in enumerate(raw):
        if ch in "\"'":
            if quote is None:
                quote = ch
            elif quote == ch:
                quote = None
        elif ch == "#" and quote is None:
            return raw[:i]
    return raw


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def _known_key(key: str) -> bool:
    fields = ScenarioConfig.model_fields
    if "." not in key:
        return key in fields and key not in SECTIONS
    section, _, name = key.partition(".")
    if section not in SECTIONS:
        return False
    return name in fields[section].annotation.model_fields


def parse_config_text(text: str) -> ScenarioConfig:
    """
    Parse scenario file content. Missing keys keep their defaults.

    Raises:
        ConfigError: unknown or duplicate key, line without '=', or a value
            the model rejects; the message names the key and line
    """
    data: Dict[str, Any] = {}
    lines: Dict[str, int] = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line.split()[0], number)
        key, _, value = line.partition("=")
        key, value = key.strip(), _unquote(value.strip())
        if not _known_key(key):
            raise ConfigError("unknown key", key, number)
        if key in lines:
            raise ConfigError(f"duplicate key, first set on line {lines[key]}", key, number)
        lines[key] = number
        if "." in key:
            section, _, name = key.partition(".")
            data.setdefault(section, {})[name] = value
        else:
            data[key] = value

    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = [str(p) for p in error["loc"]]
        key = ".".join(loc)
        line = lines.get(key, 0)
        if not line and loc:
            line = min((n for k, n in lines.items() if k.split(".")[0] == loc[0]), default=0)
        raise ConfigError(error["msg"], key or "scenario", line) from e


def parse_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read a scenario file; see parse_config_text."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario file: {e.strerror}", str(path)) from e
    return parse_config_text(text)


def _format(value: Any) -> str:
    if hasattr(value, "value"):
        return str(value.value)
    return repr(value) if isinstance(value, float) else str(value)


def _items(model: BaseModel, prefix: str = "") -> List[Tuple[str, str]]:
    items = []
    for name in type(model).model_fields:
        value = getattr(model, name)
        if isinstance(value, BaseModel):
            items += _items(value, f"{prefix}{name}.")
        else:
            items.append((f"{prefix}{name}", _format(value)))
    return items


def dump_config(cfg: ScenarioConfig) -> str:
    """Every resolved field in scenario file format"""
    return "".join(f"{key} = {value}\n" for key, value in _items(cfg))


def with_overrides(cfg: ScenarioConfig, **changes: Any) -> ScenarioConfig:
    """Validated copy of cfg with some top-level fields replaced"""
    data = cfg.model_dump()
    data.update(changes)
    return ScenarioConfig.model_validate(data)
