"""Run configuration: typed fields, layering and per-experiment validation.

Values come from, in increasing priority, a flat ``key = value`` file,
``MECHQUBIT_*`` environment variables and command-line flags. Physical and
solver fields left unset are ``None`` and take the experiment's defaults.
"""

import dataclasses
import math
import os
from dataclasses import dataclass

from .errors import ConfigError
from .io import parse_real

EXPERIMENTS = ("solve-angle", "evolve", "sweep", "monte-carlo", "aav-compare", "figure")
PRESETS = ("fig1", "fig2", "fig3a", "fig3b", "fig4", "fig5", "fig6")
MAX_SWEEP_POINTS = 10 ** 6


@dataclass(frozen=True)
class Axis:
    """One swept parameter: ``name=start:stop:num[:log]`` or ``name=v1,v2,...``."""

    key: str
    values: tuple

    @classmethod
    def parse(cls, spec: str) -> "Axis":
        if "=" not in spec:
            raise ConfigError(f"axis {spec!r}: expected name=start:stop:num or name=v1,v2")
        key, body = (s.strip() for s in spec.split("=", 1))
        if key not in SWEEPABLE:
            raise ConfigError(f"axis {spec!r}: key '{key}' cannot be swept")
        if ":" in body:
            parts = body.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
                raise ConfigError(f"axis {spec!r}: expected start:stop:num[:log]")
            start, stop = parse_real(parts[0]), parse_real(parts[1])
            num = int(parts[2])
            if num < 1:
                raise ConfigError(f"axis {spec!r}: empty range")
            if len(parts) == 4:
                if start <= 0 or stop <= 0:
                    raise ConfigError(f"axis {spec!r}: log axis needs positive bounds")
                values = _geomspace(start, stop, num)
            else:
                values = _linspace(start, stop, num)
        else:
            values = tuple(parse_real(v) for v in body.split(",") if v.strip())
            if not values:
                raise ConfigError(f"axis {spec!r}: empty range")
        return cls(key, values)

    def __str__(self):
        return f"{self.key}=" + ",".join(repr(v) for v in self.values)


def _linspace(a, b, n):
    if n == 1:
        return (a,)
    return tuple(a + (b - a) * i / (n - 1) for i in range(n))


def _geomspace(a, b, n):
    la, lb = math.log(a), math.log(b)
    return tuple(math.exp(v) for v in _linspace(la, lb, n))


def _choice(*options):
    def parse(v):
        v = str(v).strip()
        if v not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return parse


def _int(v):
    if isinstance(v, int):
        return v
    f = parse_real(v)
    if f != int(f):
        raise ConfigError(f"expected an integer, got {v!r}")
    return int(f)


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _theta(v):
    if v is None or str(v).strip() == "solve":
        return None
    return parse_real(v)


def _n_max(v):
    if v is None or str(v).strip() == "auto":
        return None
    return _int(v)


def _axes(v):
    if isinstance(v, (list, tuple)):
        items = v
    else:
        items = [s for s in str(v).split(";") if s.strip()]
    return tuple(a if isinstance(a, Axis) else Axis.parse(a) for a in items)


# external key -> (attribute, parser)
FIELDS = {
    "lambda": ("lam", parse_real),
    "t": ("t", parse_real),
    "gamma": ("gamma", parse_real),
    "Gamma": ("Gamma", parse_real),
    "gamma_phi": ("gamma_phi", parse_real),
    "nbar_m": ("nbar_m", parse_real),
    "nbar_q": ("nbar_q", parse_real),
    "theta": ("theta", _theta),
    "phi": ("phi", parse_real),
    "branch": ("branch", _choice("plus", "minus")),
    "n_max": ("n_max", _n_max),
    "dt": ("dt", parse_real),
    "method": ("method", _choice("rk4", "adaptive")),
    "model": ("model", _choice("auto", "analytic", "lindblad")),
    "rel_tol_theta": ("rel_tol_theta", parse_real),
    "rel_tol_phi": ("rel_tol_phi", parse_real),
    "distribution": ("distribution", _choice("uniform", "gaussian")),
    "n_samples": ("n_samples", _int),
    "theta_min": ("theta_min", parse_real),
    "theta_max": ("theta_max", parse_real),
    "n_theta": ("n_theta", _int),
    "axes": ("axes", _axes),
    "wigner": ("wigner", _bool),
    "resolution": ("resolution", _int),
    "extent": ("extent", parse_real),
    "seed": ("seed", _int),
    "out": ("out", str),
    "format": ("format", _choice("csv", "report")),
    "threads": ("threads", _int),
}
ATTR_TO_KEY = {attr: key for key, (attr, _) in FIELDS.items()}
SWEEPABLE = ("lambda", "t", "gamma", "Gamma", "gamma_phi", "nbar_m", "nbar_q", "theta", "phi")

# MECHQUBIT_GAMMA would be ambiguous between gamma and Gamma
ENV_NAMES = {key: "MECHQUBIT_" + key.upper() for key in FIELDS}
ENV_NAMES["Gamma"] = "MECHQUBIT_GAMMA_SPIN"

_PHYS = ("lambda", "t", "gamma", "Gamma", "gamma_phi", "nbar_m", "nbar_q")
_ANGLES = ("theta", "phi", "branch")
_SOLVER = ("n_max", "dt", "method", "model")
_JITTER = ("rel_tol_theta", "rel_tol_phi", "distribution", "n_samples")
_SCAN = ("theta_min", "theta_max", "n_theta")
_WIGNER = ("wigner", "resolution", "extent")
COMMON = ("seed", "out", "format", "threads")

ALLOWED = {
    "solve-angle": ("lambda", "t", "phi"),
    "evolve": _PHYS + _ANGLES + _SOLVER + _WIGNER,
    "sweep": _PHYS + _ANGLES + _SOLVER + ("axes",),
    "monte-carlo": _PHYS + ("phi", "n_max", "dt", "method") + _JITTER,
    "aav-compare": ("lambda", "t", "phi") + _SCAN,
    "fig1": ("lambda", "t", "gamma") + _ANGLES + ("n_max", "resolution", "extent"),
    "fig2": ("lambda", "t", "gamma", "phi", "n_max") + _SCAN,
    "fig3a": ("lambda", "t", "gamma", "nbar_m", "nbar_q", "n_max", "dt", "method"),
    "fig3b": ("lambda", "t", "gamma", "Gamma", "nbar_m", "nbar_q", "n_max", "dt", "method"),
    "fig4": ("lambda", "t", "gamma", "theta", "phi", "n_max", "resolution", "extent"),
    "fig5": _PHYS + ("n_max", "dt", "method") + _JITTER,
    "fig6": ("lambda", "t", "phi") + _SCAN,
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    preset: str = None
    lam: float = None
    t: float = None
    gamma: float = None
    Gamma: float = None
    gamma_phi: float = None
    nbar_m: float = None
    nbar_q: float = None
    theta: float = None  # None: solve the equal-superposition condition
    phi: float = None
    branch: str = None
    n_max: int = None  # None: chosen from the parameters
    dt: float = None
    method: str = None
    model: str = None
    rel_tol_theta: float = None
    rel_tol_phi: float = None
    distribution: str = None
    n_samples: int = None
    theta_min: float = None
    theta_max: float = None
    n_theta: int = None
    axes: tuple = ()
    wigner: bool = None
    resolution: int = None
    extent: float = None
    seed: int = 0
    out: str = None
    format: str = "csv"
    threads: int = None

    def __post_init__(self):
        self.validate()

    @property
    def scope(self) -> str:
        return self.preset if self.experiment == "figure" else self.experiment

    def get(self, attr: str, default):
        value = getattr(self, attr)
        return default if value is None else value

    @property
    def workers(self) -> int:
        return self.threads or os.cpu_count() or 1

    def explicit_keys(self):
        out = []
        for f in dataclasses.fields(self):
            if f.name in ("experiment", "preset"):
                continue
            if getattr(self, f.name) != f.default:
                out.append(ATTR_TO_KEY[f.name])
        return out

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.experiment == "figure":
            if self.preset not in PRESETS:
                raise ConfigError(f"unknown figure preset {self.preset!r}; "
                                  f"choose from {', '.join(PRESETS)}")
        elif self.preset is not None:
            raise ConfigError(f"experiment {self.experiment} takes no preset")
        allowed = set(ALLOWED[self.scope]) | set(COMMON)
        for key in self.explicit_keys():
            if key not in allowed:
                raise ConfigError(f"key '{key}' is not accepted by {self.scope}")

        for attr in ("lam", "t", "gamma", "Gamma", "gamma_phi", "nbar_m", "nbar_q",
                     "rel_tol_theta", "rel_tol_phi"):
            v = getattr(self, attr)
            if v is not None and not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"'{ATTR_TO_KEY[attr]}' must be finite and >= 0, got {v}")
        for attr in ("theta", "phi", "theta_min", "theta_max"):
            v = getattr(self, attr)
            if v is not None and not math.isfinite(v):
                raise ConfigError(f"'{ATTR_TO_KEY[attr]}' must be finite")
        for attr, lo in (("n_max", 2), ("n_samples", 1), ("n_theta", 2),
                         ("resolution", 2), ("threads", 1)):
            v = getattr(self, attr)
            if v is not None and v < lo:
                raise ConfigError(f"'{ATTR_TO_KEY[attr]}' must be >= {lo}, got {v}")
        for attr in ("dt", "extent"):
            v = getattr(self, attr)
            if v is not None and not v > 0:
                raise ConfigError(f"'{ATTR_TO_KEY[attr]}' must be > 0, got {v}")
        if (self.theta_min is not None and self.theta_max is not None
                and not self.theta_min < self.theta_max):
            raise ConfigError("'theta_min' must be below 'theta_max'")

        if self.experiment == "sweep":
            if not self.axes:
                raise ConfigError("sweep needs at least one axis")
            if len(self.axes) > 2:
                raise ConfigError(f"sweep takes at most two axes, got {len(self.axes)}")
            keys = [a.key for a in self.axes]
            if len(set(keys)) != len(keys):
                raise ConfigError("sweep axes must name distinct keys")
            for key in keys:
                if getattr(self, FIELDS[key][0]) is not None:
                    raise ConfigError(f"key '{key}' is both swept and fixed")
            size = math.prod(len(a.values) for a in self.axes)
            if size > MAX_SWEEP_POINTS:
                raise ConfigError(f"sweep has {size} points, limit is {MAX_SWEEP_POINTS}")

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "preset": self.preset}
        for f in dataclasses.fields(self):
            if f.name in out:
                continue
            v = getattr(self, f.name)
            if f.name == "axes":
                v = [str(a) for a in v]
            out[ATTR_TO_KEY[f.name]] = v
        return out


def parse_values(raw: dict, source: str) -> dict:
    """Map external keys to typed attribute values; unknown keys are rejected."""
    out = {}
    for key, value in raw.items():
        if key not in FIELDS:
            raise ConfigError(f"{source}: unknown key '{key}'")
        attr, parser = FIELDS[key]
        try:
            out[attr] = parser(value)
        except ConfigError as exc:
            raise ConfigError(f"{source}: key '{key}': {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{source}: key '{key}': {exc}") from None
    return out


def env_values(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    by_name = {name: key for key, name in ENV_NAMES.items()}
    raw = {}
    for name, value in environ.items():
        if not name.startswith("MECHQUBIT_"):
            continue
        if name not in by_name:
            raise ConfigError(f"environment: unknown variable {name}")
        raw[by_name[name]] = value
    return raw


def build_config(experiment: str, preset: str = None, file_values: dict = None,
                 environ=None, cli_values: dict = None) -> RunConfig:
    """Merge file, environment and flag values (later wins) into a RunConfig."""
    merged = {}
    for source, raw in (("config file", file_values or {}),
                        ("environment", env_values(environ)),
                        ("command line", cli_values or {})):
        merged.update(parse_values(raw, source))
    return RunConfig(experiment=experiment, preset=preset, **merged)
