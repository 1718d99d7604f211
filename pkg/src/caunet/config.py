"""Line-oriented ``key = value`` config files (UTF-8, ``#`` comments).

parse -> serialize -> parse is a fixed point: parsing normalizes each line
to ``key = value`` with single spaces, and serialization emits exactly that.
"""


class ConfigError(ValueError):
    pass


def parse_config(text):
    """Ordered key -> string-value map."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        out[key] = val.strip()
    return out


def serialize_config(values):
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")


def coerce(value, kind):
    """Convert a config string to int/float/bool/str/tuple-of-int."""
    if kind is bool:
        v = value.strip().lower()
        if v in _BOOL_TRUE:
            return True
        if v in _BOOL_FALSE:
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if kind is tuple:
        parts = [p for p in value.replace(",", " ").split() if p]
        return tuple(int(p) for p in parts)
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as {kind.__name__}") from None
