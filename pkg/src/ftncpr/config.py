"""Flat dotted-key configuration files.

Grammar, one setting per line::

    # comment (also allowed after a value)
    section.key = value

Values are a number, ``true``/``false``, a bare word, or a comma-separated
list of those. A numeric list may also be written ``start:stop:step``
(inclusive of ``stop``). Unknown or repeated keys are errors. Missing keys
keep their defaults.

Recognized keys::

    link.alpha  link.rolloff  link.baud  link.sps  link.n_symbols
    link.pol_mix_angle  link.pol_mix_phase  link.rrc_span  link.osnr_pols
    sweep.schemes  sweep.linewidths_hz  sweep.osnr_db  sweep.seeds
    sweep.seed_base  sweep.guard_symbols  sweep.ambiguity_segment  sweep.ber_target
    bps.test_phases  bps.window  bps.grid            (blind | fixed | 4 levels)
    cma.enabled  cma.n_taps  cma.step  cma.radius  cma.iterations
    mlse.taps (analytic | estimated)  mlse.traceback  mlse.tail
    mlse.stream (original | polybinary)  mlse.training_symbols
    output.path
"""
import math

import numpy as np

from .cpr import BpsParams
from .equalize import CmaParams
from .errors import ConfigError, ParameterError
from .harness import SweepConfig
from .link import LinkConfig

_LINK = {
    "link.alpha": ("alpha", float),
    "link.rolloff": ("rolloff", float),
    "link.baud": ("baud", float),
    "link.sps": ("sps", int),
    "link.n_symbols": ("n_symbols", int),
    "link.pol_mix_angle": ("pol_mix_angle", float),
    "link.pol_mix_phase": ("pol_mix_phase", float),
    "link.rrc_span": ("rrc_span", int),
    "link.osnr_pols": ("osnr_pols", int),
}
_BPS = {"bps.test_phases": ("test_phases", int), "bps.window": ("window", int)}
_CMA = {
    "cma.n_taps": ("n_taps", int),
    "cma.step": ("step", float),
    "cma.radius": ("radius", float),
    "cma.iterations": ("iterations", int),
}
_SWEEP = {
    "sweep.schemes": ("schemes", "words"),
    "sweep.linewidths_hz": ("linewidths_hz", "floats"),
    "sweep.osnr_db": ("osnr_db_list", "floats"),
    "sweep.seeds": ("seeds", "ints"),
    "sweep.seed_base": ("seed_base", int),
    "sweep.guard_symbols": ("guard_symbols", int),
    "sweep.ambiguity_segment": ("ambiguity_segment", int),
    "sweep.ber_target": ("ber_target", float),
    "cma.enabled": ("cma_enabled", bool),
    "mlse.taps": ("mlse_taps", str),
    "mlse.traceback": ("mlse_traceback", int),
    "mlse.tail": ("mlse_tail", int),
    "mlse.stream": ("mlse_stream", str),
    "mlse.training_symbols": ("training_symbols", int),
    "output.path": ("output_path", str),
}
KNOWN_KEYS = frozenset(_LINK) | frozenset(_BPS) | frozenset(_CMA) | frozenset(_SWEEP) | {"bps.grid"}


def _number(text, kind, key):
    try:
        if kind is int:
            v = float(text)
            if not v.is_integer():
                raise ValueError
            return int(v)
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {text!r}") from None


def _items(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _num_list(text, kind, key):
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: range must be start:stop:step")
        a, b, s = (_number(p.strip(), float, key) for p in parts)
        if s <= 0 or b < a:
            raise ConfigError(f"{key}: empty or invalid range {text!r}")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        vals = [float(np.round(a + i * s, 12)) for i in range(n)]
        return [kind(v) for v in vals] if kind is float else [_number(str(v), int, key) for v in vals]
    return [_number(t, kind, key) for t in _items(text)]


def _convert(text, kind, key):
    if kind == "words":
        return _items(text)
    if kind == "floats":
        return _num_list(text, float, key)
    if kind == "ints":
        return _num_list(text, int, key)
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {text!r}")
    if kind is str:
        return text
    if kind is float and text.lower() in ("none", ""):
        return None
    return _number(text, kind, key)


def parse_config_text(text):
    """Parse config text into a ``{key: raw string}`` mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        out[key] = value
    return out


def build_sweep_config(values, base=None):
    """Turn a parsed mapping into a validated :class:`SweepConfig`.

    Raises
    ------
    ConfigError
        On unparsable values or parameters that fail validation.
    """
    base = base or SweepConfig()
    try:
        link = {a: _convert(values[k], t, k) for k, (a, t) in _LINK.items() if k in values}
        bps = {a: _convert(values[k], t, k) for k, (a, t) in _BPS.items() if k in values}
        cma = {a: _convert(values[k], t, k) for k, (a, t) in _CMA.items() if k in values}
        top = {a: _convert(values[k], t, k) for k, (a, t) in _SWEEP.items() if k in values}
        if "bps.grid" in values:
            g = values["bps.grid"]
            top["grid_source"] = g if g in ("blind", "fixed") else tuple(_num_list(g, float, "bps.grid"))
        for name in ("schemes", "linewidths_hz", "osnr_db_list", "seeds"):
            if name in top:
                top[name] = tuple(top[name])
        return base.with_(
            link=base.link.with_(**link),
            bps=BpsParams(**{**vars(base.bps), **bps}),
            cma=CmaParams(**{**vars(base.cma), **cma}),
            **top,
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    """Read and validate a config file. I/O errors propagate as ``OSError``."""
    with open(path) as fh:
        text = fh.read()
    return build_sweep_config(parse_config_text(text))


def dump_config(cfg):
    """Render ``cfg`` in the file grammar (round-trips through :func:`load_config`)."""
    def fmt(v):
        if isinstance(v, (list, tuple)):
            return ", ".join(fmt(x) for x in v)
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = []
    for k, (a, _) in _LINK.items():
        lines.append(f"{k} = {fmt(getattr(cfg.link, a))}")
    for k, (a, _) in _BPS.items():
        lines.append(f"{k} = {fmt(getattr(cfg.bps, a))}")
    lines.append(f"bps.grid = {fmt(cfg.grid_source)}")
    for k, (a, _) in _CMA.items():
        v = getattr(cfg.cma, a)
        if v is not None:
            lines.append(f"{k} = {fmt(v)}")
    for k, (a, _) in _SWEEP.items():
        lines.append(f"{k} = {fmt(getattr(cfg, a))}")
    return "\n".join(lines) + "\n"
