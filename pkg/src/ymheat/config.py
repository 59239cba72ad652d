"""Flat plain-text configuration files.

One ``section.key = value`` assignment per line; ``#`` starts a comment
(anywhere on a line); blank lines are ignored.  Values stay strings and are
converted by the consumers (``SimConfig.from_config``, ``Theta0Spec.from_config``).
"""

import re

from .errors import ConfigError

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*")

KNOWN_KEYS = (
    "sim.t0", "sim.horizon",
    "grid.r_max", "grid.h0", "grid.cells",
    "data.lambda0", "data.soliton", "data.epsilon",
    "stepper.rtol", "stepper.atol", "stepper.max_dt", "stepper.lip_safety",
    "stepper.well_balanced", "stepper.recenter_tol",
    "output.snapshots", "output.trace_points",
    "lambda.extraction", "lambda.subtract_background",
    "theta0.family", "theta0.a", "theta0.sign", "theta0.amplitude", "theta0.table_path",
    "law.t0", "law.horizon", "law.samples", "law.C", "law.origin", "law.spacing",
    "bounds.t_end", "bounds.samples", "bounds.t0_values",
)


def parse_config(text, source="<string>", strict=True):
    """Parse config text into an ordered ``{key: value}`` dict.

    Raises
    ------
    ConfigError
        With the 1-based line and column of the offending character.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError(f"{source}: expected 'section.key = value'", lineno, col)
        key_part, value = line.split("=", 1)
        key = key_part.strip()
        col = len(key_part) - len(key_part.lstrip()) + 1
        if not _KEY.fullmatch(key):
            raise ConfigError(f"{source}: malformed key {key!r}", lineno, col)
        if strict and key not in KNOWN_KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}", lineno, col)
        value = value.strip()
        if not value:
            vcol = len(key_part) + 2
            raise ConfigError(f"{source}: missing value for {key!r}", lineno, vcol)
        if key in out:
            raise ConfigError(f"{source}: duplicate key {key!r}", lineno, col)
        out[key] = value
    return out


def load_config(path, strict=True):
    """Read and parse a config file; a missing file is a :class:`ConfigError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, source=str(path), strict=strict)


def dump_config(cfg):
    """Serialise a flat dict back to config text (keys sorted)."""
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))
