"""Plain-text hierarchical key-value configuration.

Format: one `dotted.key = value` per line, '#' comments, UTF-8.  Values
parse as booleans, integers, exact rational literals like 7/255 (so the
published hyperparameter tables can be written verbatim), floats, or
strings; comma-separated lists of those.  Unknown keys are rejected
against a schema with the offending path in the message.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ConfigError


def parse_value(text: str):
    s = text.strip()
    if not s:
        return ""
    if "," in s:
        return [parse_value(part) for part in s.split(",")]
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(s)
    except ValueError:
        pass
    if "/" in s:
        num, _, den = s.partition("/")
        try:
            return float(Fraction(int(num.strip()), int(den.strip())))
        except (ValueError, ZeroDivisionError):
            pass
    try:
        return float(s)
    except ValueError:
        pass
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def parse_config_text(text: str) -> dict:
    """Flat mapping of dotted keys to parsed values."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(val)
    return out


def read_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def serialize_config(cfg: dict) -> str:
    return "".join(f"{k} = {format_value(cfg[k])}\n" for k in sorted(cfg))


def validate_keys(cfg: dict, allowed: set[str], context: str = "config"):
    unknown = sorted(k for k in cfg if k not in allowed)
    if unknown:
        raise ConfigError(
            f"unknown {context} key {unknown[0]!r} (unrecognized: {unknown}); "
            f"valid keys: {sorted(allowed)}")


def get_typed(cfg: dict, key: str, types, default=None, required: bool = False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    val = cfg[key]
    if types is float and isinstance(val, int):
        val = float(val)
    if types is list and not isinstance(val, list):
        val = [val]
    elif not isinstance(types, tuple) and types is not list \
            and not isinstance(val, types):
        raise ConfigError(
            f"config key {key!r} expects {getattr(types, '__name__', types)}, "
            f"got {val!r}")
    return val
