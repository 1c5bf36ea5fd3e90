"""Experiment configuration files.

Flat ``key = value`` text, one experiment per file, '#' comments.  Keys are
typed by the schema below; unknown keys are rejected.  Intervals are written
``[a, b)``; the piecewise-linear map rows are ``l,r,slope,icept; ...``.
"""

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .maps import make_piecewise_linear, parse_map_spec

_ANALYSES = ("ks", "poisson", "sandwich", "certificate", "hsv")


def _parse_interval(text):
    text = text.strip()
    if not (text.startswith("[") and text.endswith(")")):
        raise ConfigError(f"interval must look like [a, b): {text!r}")
    a, b = (float(p) for p in text[1:-1].split(","))
    return (a, b)


def _parse_rows(text):
    rows = []
    for part in text.split(";"):
        vals = [float(v) for v in part.split(",")]
        if len(vals) != 4:
            raise ConfigError("each branch row needs left,right,slope,icept")
        rows.append(tuple(vals))
    return tuple(rows)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_SCHEMA = {
    "map": str,
    "branches": _parse_rows,
    "seed": int,
    "out_dir": str,
    "ball_center": float,
    "ball_radius": float,
    "cylinder_depth": int,
    "n_samples": int,
    "n_max": int,
    "burn_in": int,
    "n_streams": int,
    "workers": int,
    "measure_iters": int,
    "measure_bins": int,
    "analyses": str,
    "induce_domain": _parse_interval,
    "induce_max_steps": int,
    "eps": float,
    "p_max": int,
    "hsv_n": int,
    "hsv_depth": int,
    "poisson_t": float,
    "poisson_windows": int,
    "lebesgue_normalization": _parse_bool,
}


@dataclass
class ExperimentConfig:
    map_spec: str
    seed: int
    branches: Optional[tuple] = None
    out_dir: Optional[str] = None
    ball_center: Optional[float] = None
    ball_radius: Optional[float] = None
    cylinder_depth: Optional[int] = None
    n_samples: int = 20_000
    n_max: int = 10 ** 7
    burn_in: int = 10_000
    n_streams: int = 4
    workers: int = 1
    measure_iters: int = 2_000_000
    measure_bins: int = 256
    analyses: tuple = ()
    induce_domain: Optional[tuple] = None
    induce_max_steps: int = 10 ** 7
    eps: float = 0.05
    p_max: int = 15
    hsv_n: int = 16
    hsv_depth: int = 8
    poisson_t: float = 1.0
    poisson_windows: int = 10_000
    lebesgue_normalization: bool = False
    raw_text: str = field(default="", repr=False)

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        if self.ball_radius is not None and self.ball_radius <= 0:
            raise ConfigError("ball radius must be positive")
        for a in self.analyses:
            if a not in _ANALYSES:
                raise ConfigError(f"unknown analysis {a!r}; "
                                  f"choose from {_ANALYSES}")
        needs_domain = {"sandwich", "certificate"} & set(self.analyses)
        if needs_domain and self.induce_domain is None:
            raise ConfigError(f"{sorted(needs_domain)} need induce_domain")

    def build_map(self):
        if self.map_spec == "piecewise_linear_markov":
            if not self.branches:
                raise ConfigError("piecewise_linear_markov needs 'branches'")
            return make_piecewise_linear(self.branches)
        return parse_map_spec(self.map_spec)

    def target_set(self):
        """The ball/cylinder U, or None when no target is configured."""
        from .inducing import IntervalSet
        if self.ball_center is None:
            return None
        if self.cylinder_depth is not None:
            n = 2 ** self.cylinder_depth
            k = min(int(self.ball_center * n), n - 1)
            return IntervalSet.interval(k / n, (k + 1) / n)
        if self.ball_radius is None:
            raise ConfigError("ball_center needs ball_radius or "
                              "cylinder_depth")
        return IntervalSet.ball(self.ball_center, self.ball_radius)

    def echo(self):
        skip = {"raw_text"}
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.__dict__.items() if k not in skip}


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        conv = _SCHEMA[key]
        try:
            values[key] = conv(val)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")
    if "map" not in values:
        raise ConfigError("config needs a 'map' key")
    if "seed" not in values:
        raise ConfigError("config needs a 'seed' key")
    analyses = tuple(
        tok.strip() for tok in values.pop("analyses", "").split(",")
        if tok.strip())
    kwargs = {"map_spec": values.pop("map"), "analyses": analyses,
              "raw_text": text}
    kwargs.update(values)
    return ExperimentConfig(**kwargs)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
