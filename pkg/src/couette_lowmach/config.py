"""Line-oriented ``key = value`` run configuration.

Keys carry a dotted section prefix (``physics.``, ``grid.``, ``solver.``,
``initial.``, ``experiment.``, ``output.``).  ``#`` starts a comment.
Every default that gets applied and every value that gets set is logged
exactly once; the lines are also kept on ``RunConfig.log``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

from .grid import Grid
from .params import DEFAULTS, DEFAULT_EPS, PhysicalParams, build_params
from .solver import SCHEMES, SolverConfig

log = logging.getLogger(__name__)

EXPERIMENTS = ("epsilon_sweep", "stiffness_benchmark")


class ConfigError(ValueError):
    pass


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    return int(text, 10)


def _parse_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _parse_floats(text):
    return tuple(_parse_float(t.strip()) for t in text.split(",") if t.strip())


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


def _gt(bound):
    return (lambda v: v > bound), f"must exceed {bound}"


def _positive():
    return (lambda v: v > 0), "must be positive"


def _at_least(bound):
    return (lambda v: v >= bound), f"must be >= {bound}"


# key -> (attribute, parser, default, constraint)
_SCHEMA = {
    "physics.gamma": ("gamma", _parse_float, DEFAULTS["gamma"], _gt(1.0)),
    "physics.mach": ("mach", _parse_float, None, _positive()),
    "physics.reynolds": ("reynolds", _parse_float, DEFAULTS["reynolds"], _positive()),
    "physics.prandtl": ("prandtl", _parse_float, DEFAULTS["prandtl"], _positive()),
    "physics.visc_ratio": ("visc_ratio", _parse_float, DEFAULTS["visc_ratio"],
                           _gt(-1.0)),
    "physics.chi": ("chi", _parse_float, DEFAULTS["chi"], _positive()),
    "grid.n1": ("n1", _parse_int, 64,
                ((lambda v: v >= 8 and v % 2 == 0), "must be even and >= 8")),
    "grid.n2": ("n2", _parse_int, 64, _at_least(8)),
    "solver.scheme": ("scheme", str, "imex_cnab",
                      ((lambda v: v in SCHEMES), f"must be one of {', '.join(SCHEMES)}")),
    "solver.dt": ("dt", _parse_float, 2e-3, _positive()),
    "solver.t_end": ("t_end", _parse_float, 5.0, _at_least(0.0)),
    "solver.diag_stride": ("diag_stride", _parse_int, 25, _at_least(1)),
    "solver.dealias": ("dealias", _parse_bool, True, None),
    "solver.c_acoustic": ("c_acoustic", _parse_float, 0.5, _positive()),
    "solver.c_viscous": ("c_viscous", _parse_float, 0.2, _positive()),
    "initial.a_phi": ("a_phi", _parse_float, 1.0, None),
    "initial.a_psi": ("a_psi", _parse_float, 1.0, None),
    "initial.a_theta": ("a_theta", _parse_float, 1.0, None),
    "experiment.kind": ("experiment", str, "epsilon_sweep",
                        ((lambda v: v in EXPERIMENTS), f"must be one of {', '.join(EXPERIMENTS)}")),
    "experiment.eps_list": ("eps_list", _parse_floats, (0.2, 0.1, 0.05, 0.025),
                            ((lambda v: len(v) >= 3 and all(0 < e <= 0.5 for e in v)),
                             "needs at least three values in (0, 0.5]")),
    "experiment.workers": ("workers", _parse_int, 1, _at_least(1)),
    "experiment.stiffness_reynolds": ("stiffness_reynolds", _parse_float, 1000.0,
                                      _positive()),
    "output.dir": ("output_dir", str, "out", None),
}
# alternative to physics.mach: eps = sqrt(gamma) * mach
_EPS_KEY = "physics.eps"


@dataclass
class RunConfig:
    gamma: float = DEFAULTS["gamma"]
    mach: float = DEFAULT_EPS / math.sqrt(DEFAULTS["gamma"])
    reynolds: float = DEFAULTS["reynolds"]
    prandtl: float = DEFAULTS["prandtl"]
    visc_ratio: float = DEFAULTS["visc_ratio"]
    chi: float = DEFAULTS["chi"]
    n1: int = 64
    n2: int = 64
    scheme: str = "imex_cnab"
    dt: float = 2e-3
    t_end: float = 5.0
    diag_stride: int = 25
    dealias: bool = True
    c_acoustic: float = 0.5
    c_viscous: float = 0.2
    a_phi: float = 1.0
    a_psi: float = 1.0
    a_theta: float = 1.0
    experiment: str = "epsilon_sweep"
    eps_list: tuple = (0.2, 0.1, 0.05, 0.025)
    workers: int = 1
    stiffness_reynolds: float = 1000.0
    output_dir: str = "out"
    log: list = field(default_factory=list, compare=False, repr=False)

    def params(self) -> PhysicalParams:
        return build_params(self.gamma, self.mach, self.reynolds, self.prandtl,
                            self.visc_ratio, self.chi)

    def grid(self) -> Grid:
        return Grid(self.n1, self.n2)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(dt=self.dt, t_end=self.t_end, scheme=self.scheme,
                            dealias_on=self.dealias, diag_stride=self.diag_stride,
                            c_acoustic=self.c_acoustic, c_viscous=self.c_viscous)

    @property
    def amplitudes(self):
        return (self.a_phi, self.a_psi, self.a_theta)


def _split_line(line):
    body = line.split("#", 1)[0].strip()
    if not body:
        return None
    if "=" not in body:
        raise ValueError("expected 'key = value'")
    key, value = body.split("=", 1)
    key, value = key.strip(), value.strip()
    if not key:
        raise ValueError("missing key before '='")
    return key, value


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse and validate a configuration.

    ``overrides`` are ``key=value`` strings applied after the text (the
    command line ``--set`` values); they are reported as ``--set`` origins.

    Raises
    ------
    ConfigError
        Unknown key, duplicate key, type mismatch or violated constraint;
        the message names the key and where it came from.
    """
    raw = {}      # key -> (value text, origin)

    def take(key, value, origin):
        if key not in _SCHEMA and key != _EPS_KEY:
            raise ConfigError(f"{origin}: unknown key {key!r}")
        if origin.startswith("--set"):
            # an override of eps replaces a mach from the file, and vice versa
            other = "physics.mach" if key == _EPS_KEY else _EPS_KEY
            if key in ("physics.mach", _EPS_KEY) and other in raw \
                    and not raw[other][1].startswith("--set"):
                del raw[other]
        elif key in raw:
            raise ConfigError(f"{origin}: duplicate key {key!r} "
                              f"(first set at {raw[key][1]})")
        raw[key] = (value, origin)

    for lineno, line in enumerate(text.splitlines(), 1):
        try:
            kv = _split_line(line)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        if kv is not None:
            take(*kv, f"line {lineno}")
    for k, item in enumerate(overrides, 1):
        try:
            kv = _split_line(item)
        except ValueError as exc:
            raise ConfigError(f"--set #{k}: {exc}") from None
        if kv is None:
            raise ConfigError(f"--set #{k}: empty override")
        take(*kv, f"--set #{k}")

    if _EPS_KEY in raw and "physics.mach" in raw:
        raise ConfigError(f"{raw[_EPS_KEY][1]}: physics.eps conflicts with "
                          f"physics.mach ({raw['physics.mach'][1]}); give only one")

    values, lines = {}, []

    def parsed(key, parser, constraint):
        text_value, origin = raw[key]
        try:
            value = parser(text_value)
        except ValueError as exc:
            raise ConfigError(f"{origin}: {key}: {exc}") from None
        if constraint is not None and not constraint[0](value):
            raise ConfigError(f"{origin}: {key} {constraint[1]} (got {text_value})")
        lines.append(f"{'override' if origin.startswith('--set') else 'set'} "
                     f"{key} = {_fmt(value)} ({origin})")
        return value

    for key, (attr, parser, default, constraint) in _SCHEMA.items():
        if key == "physics.mach":
            continue
        if key in raw:
            values[attr] = parsed(key, parser, constraint)
        else:
            values[attr] = default
            lines.append(f"default {key} = {_fmt(default)}")

    if "physics.mach" in raw:
        _, parser, _, constraint = _SCHEMA["physics.mach"]
        values["mach"] = parsed("physics.mach", parser, constraint)
    elif _EPS_KEY in raw:
        eps = parsed(_EPS_KEY, _parse_float, _positive())
        values["mach"] = eps / math.sqrt(values["gamma"])
    else:
        values["mach"] = DEFAULT_EPS / math.sqrt(values["gamma"])
        lines.append(f"default physics.mach = {_fmt(values['mach'])} "
                     f"(eps = {DEFAULT_EPS})")

    cfg = RunConfig(**values, log=lines)
    _cross_check(cfg, raw)
    for line in lines:
        log.info("config: %s", line)
    return cfg


def _cross_check(cfg, raw):
    def where(key):
        return raw[key][1] if key in raw else "default"

    if cfg.t_end != 0.0 and cfg.t_end < cfg.dt:
        raise ConfigError(f"{where('solver.t_end')}: solver.t_end must be 0 or "
                          f">= solver.dt (got {cfg.t_end} < {cfg.dt})")
    eps = cfg.eps_list
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError(f"{where('experiment.eps_list')}: experiment.eps_list "
                          "must be strictly decreasing")
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError(f"physics: {exc}") from None


def format_config(cfg: RunConfig) -> str:
    """Serialize every key; ``parse_config(format_config(c)) == c``."""
    out = []
    section = None
    for key, (attr, *_rest) in _SCHEMA.items():
        head = key.split(".", 1)[0]
        if head != section:
            if section is not None:
                out.append("")
            out.append(f"# {head}")
            section = head
        out.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(out) + "\n"


def config_keys():
    return list(_SCHEMA) + [_EPS_KEY]


def field_names():
    return [f.name for f in fields(RunConfig) if f.name != "log"]
