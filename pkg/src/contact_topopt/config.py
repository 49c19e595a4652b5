"""Flat ``key = value`` run configuration and problem assembly.

Lines hold one assignment each; ``#`` starts a comment. ``example = ex3a``
loads a preset before the remaining keys are applied, so explicit keys
always win regardless of their position. Keys left unset take
algorithm-dependent defaults.
"""
import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigurationError
from .hvi import Compliance, Energy, Loads
from .material import Elasticity, FrictionParams
from .mesh import DomainSpec, generate_domain, parse_side
from .problems import PRESETS

ALGORITHMS = ("shape", "pf1", "pf2", "pf-td")
DOMAINS = ("rectangle", "square_with_hole", "lshape")
DOMAIN_PARAMS = {
    "rectangle": ("width", "height"),
    "square_with_hole": ("side", "hole_center", "hole_radius"),
    "lshape": ("outer", "notch"),
}
PARAM_DEFAULTS = {"width": 2.0, "height": 1.0, "side": 1.0, "hole_center": (0.5, 0.5), "hole_radius": 0.2,
                  "outer": 2.0, "notch": 1.0}
DEFAULT_BOUNDARY = {
    "rectangle": dict(bottom="F, C 0.8 1.2", right="F, N 0.44 0.56", top="F", left="D"),
    "square_with_hole": dict(bottom="C", right="D", top="F, N 0.45 0.55", left="D", hole="F"),
    "lshape": dict(bottom="C", notch_side="F", notch_top="F", right="F, N 1.0 1.12", top="D", left="F"),
}


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _pair(text):
    parts = [p for p in text.replace("(", " ").replace(")", " ").replace(",", " ").split()]
    if len(parts) != 2:
        raise ValueError(f"expected two numbers, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return parse


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError(f"expected a nonnegative integer, got {text!r}")
    return v


# key -> (parser, default); a default of None is resolved per algorithm
SCALAR_KEYS = {
    "algorithm": (_choice(*ALGORITHMS), "pf1"),
    "example": (_choice("none", *PRESETS), "none"),
    "domain": (_choice(*DOMAINS), None),
    "h": (float, None),
    "E": (float, 1.0),
    "nu": (float, 0.3),
    "a": (float, 4e-3),
    "b": (float, 2e-3),
    "alpha": (float, 100.0),
    "eps": (float, 1e-3),
    "g_N": (_pair, (0.0, -0.3)),
    "f": (_pair, (0.0, 0.0)),
    "objective": (_choice("compliance", "energy"), None),
    "C": (float, None),
    "V_f": (float, None),
    "N_m": (_nonneg_int, 200),
    "T_inner": (_nonneg_int, 10),
    "tol": (float, 1e-3),
    "vol_tol": (float, None),
    "min_iter": (_nonneg_int, 0),
    "omega": (float, 0.01),
    "kappa1": (float, 1e-5),
    "varsigma": (float, 1e-3),
    "eta": (float, 20.0),
    "k_min": (float, 1e-5),
    "p": (float, 3.0),
    "ell0": (float, None),
    "gamma0": (float, None),
    "rho_gamma": (float, None),
    "gamma_max": (float, math.inf),
    "r": (float, 1e-3),
    "dt": (float, 0.0),
    "dt_factor": (float, None),
    "step_factor": (float, None),
    "smooth_every": (_nonneg_int, 5),
    "shape_gradient": (_choice("distributed", "boundary"), "distributed"),
    "volume_control": (_choice("uzawa", "projection"), "uzawa"),
    "init": (_choice("random", "constant"), "random"),
    "init_value": (float, 0.5),
    "seed": (int, 0),
    "snapshot_every": (_nonneg_int, 0),
    "timing": (_bool, False),
    "willmore_gamma": (float, 1.0),
    "eta_tilde": (float, 1.0),
    "cap": (float, 0.01),
    "cap_bisections": (_nonneg_int, 20),
    "newton_rtol": (float, 1e-10),
    "newton_step_tol": (float, 1e-6),
    "newton_max_iter": (_nonneg_int, 50),
}
for _name in set(p for ps in DOMAIN_PARAMS.values() for p in ps):
    SCALAR_KEYS[_name] = (_pair if _name == "hole_center" else float, None)

ALGORITHM_DEFAULTS = {
    "shape": dict(ell0=0.01, gamma0=0.02, rho_gamma=1.02, objective="compliance", step_factor=5e-3,
                  dt_factor=5e-3, vol_tol=0.02),
    "pf1": dict(ell0=0.0, gamma0=20.0, rho_gamma=1.05, gamma_max=30.0, objective="compliance",
                step_factor=5e-3, dt_factor=2e-2, vol_tol=0.05),
    "pf2": dict(ell0=0.0, gamma0=20.0, rho_gamma=1.05, gamma_max=30.0, objective="compliance",
                step_factor=5e-3, dt_factor=2e-2, vol_tol=0.05),
    "pf-td": dict(ell0=0.0, gamma0=20.0, rho_gamma=1.05, gamma_max=30.0, objective="energy",
                  step_factor=5e-3, dt_factor=2e-2, vol_tol=0.05),
}


@dataclass(frozen=True)
class OptConfig:
    """Fully resolved run configuration (see ``SCALAR_KEYS`` for the key set)."""

    algorithm: str
    example: str
    domain: str
    domain_params: dict
    boundary: dict
    h: float
    E: float
    nu: float
    a: float
    b: float
    alpha: float
    eps: float
    g_N: tuple
    f: tuple
    objective: str
    C: float
    N_m: int
    T_inner: int
    tol: float
    vol_tol: float
    min_iter: int
    omega: float
    kappa1: float
    varsigma: float
    eta: float
    k_min: float
    p: float
    ell0: float
    gamma0: float
    rho_gamma: float
    gamma_max: float
    r: float
    dt: float
    dt_factor: float
    step_factor: float
    smooth_every: int
    shape_gradient: str
    volume_control: str
    init: str
    init_value: float
    seed: int
    snapshot_every: int
    timing: bool
    willmore_gamma: float
    eta_tilde: float
    cap: float
    cap_bisections: int
    newton_rtol: float
    newton_step_tol: float
    newton_max_iter: int

    def domain_spec(self):
        return DomainSpec(self.domain, dict(self.domain_params), self.h, dict(self.boundary))

    @property
    def domain_volume(self):
        return self.domain_spec().area()

    @property
    def V_f(self):
        return self.C / self.domain_volume

    def replace(self, **changes):
        """Copy with ``changes`` applied and re-validated."""
        return resolve({**to_entries(self), **changes})


class _Raw(NamedTuple):
    text: str
    line: int


def _parse_lines(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key in entries:
            raise ConfigurationError(f"duplicate key {key!r}", line=lineno)
        if not (key in SCALAR_KEYS or key.startswith("bc.")):
            raise ConfigurationError(f"unknown key {key!r}", line=lineno)
        entries[key] = _Raw(value, lineno)
    return entries


def _convert(entries):
    """Typed values plus the line of each key (None for programmatic values)."""
    values, lines = {}, {}
    for key, item in entries.items():
        raw, line = (item.text, item.line) if isinstance(item, _Raw) else (item, None)
        lines[key] = line
        if key.startswith("bc."):
            if not isinstance(raw, str):
                raise ConfigurationError(f"{key} must be a boundary string", line=line)
            try:
                parse_side(raw)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{key}: {exc}", line=line) from None
            values[key] = raw
            continue
        if key not in SCALAR_KEYS:
            raise ConfigurationError(f"unknown key {key!r}", line=line)
        if isinstance(raw, str):
            try:
                values[key] = SCALAR_KEYS[key][0](raw)
            except ValueError as exc:
                raise ConfigurationError(f"cannot parse {key}: {exc}", line=line) from None
        else:
            values[key] = raw
    return values, lines


def resolve(entries):
    """Build an OptConfig from ``{key: value}`` (values may be strings or typed).

    Values read from a file carry their line number so that errors can
    cite it.
    """
    values, lines = _convert(entries)
    example = values.get("example", "none")
    merged = {}
    if example != "none":
        pre = PRESETS[example]
        merged.update(algorithm=pre["algorithm"], domain=pre["kind"], h=pre["h"], **pre["params"])
        merged.update({f"bc.{k}": v for k, v in pre["boundary"].items()})
        merged.update({k: pre[k] for k in ("C", "V_f") if k in pre})
        merged.update(pre.get("overrides", {}))
        if "C" in values or "V_f" in values:
            merged.pop("C", None)
            merged.pop("V_f", None)
    merged.update(values)

    algorithm = merged.get("algorithm", SCALAR_KEYS["algorithm"][1])
    kind = merged.get("domain", "rectangle")
    params = {}
    for name in DOMAIN_PARAMS[kind]:
        v = merged.get(name, PARAM_DEFAULTS[name])
        params[name] = tuple(float(x) for x in v) if name == "hole_center" else float(v)
    boundary = dict(DEFAULT_BOUNDARY[kind]) if not any(k.startswith("bc.") for k in merged) else {}
    boundary.update({k[3:]: v for k, v in merged.items() if k.startswith("bc.")})

    out = {}
    for key, (_, default) in SCALAR_KEYS.items():
        if key in ("domain", "C", "V_f") or key in PARAM_DEFAULTS:
            continue
        if key in merged:
            out[key] = merged[key]
        elif key in ALGORITHM_DEFAULTS[algorithm]:
            out[key] = ALGORITHM_DEFAULTS[algorithm][key]
        elif default is not None:
            out[key] = default
    out.setdefault("h", 0.04 if kind != "square_with_hole" else 0.05)
    out["algorithm"] = algorithm
    out["example"] = example

    spec = DomainSpec(kind, dict(params), out["h"], dict(boundary))
    try:
        spec.check()
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), line=_first_line(lines, "h", "domain", *DOMAIN_PARAMS[kind])) from None
    area = spec.area()
    C, Vf = merged.get("C"), merged.get("V_f")
    if C is not None and Vf is not None and not math.isclose(C, Vf * area, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigurationError(f"C = {C} conflicts with V_f = {Vf} (V_f * Vol(D) = {Vf * area})",
                                 line=_first_line(lines, "V_f", "C"))
    if C is None:
        C = (Vf if Vf is not None else 0.5) * area
    for key, test, what in (("E", lambda v: v > 0, "positive"), ("nu", lambda v: 0 < v < 0.5, "in (0, 0.5)"),
                            ("eps", lambda v: v > 0, "positive"), ("omega", lambda v: v > 0, "positive"),
                            ("rho_gamma", lambda v: v > 1, "greater than 1"),
                            ("gamma0", lambda v: v > 0, "positive"), ("tol", lambda v: v >= 0, "nonnegative"),
                            ("r", lambda v: 0 <= v < 1, "in [0, 1)"), ("dt", lambda v: v >= 0, "nonnegative"),
                            ("k_min", lambda v: 0 < v < 1, "in (0, 1)"), ("cap", lambda v: v > 0, "positive")):
        if not test(out[key]):
            raise ConfigurationError(f"{key} must be {what}, got {out[key]}", line=lines.get(key))
    if not C > 0:
        raise ConfigurationError(f"target volume must be positive, got {C}", line=_first_line(lines, "C", "V_f"))
    try:
        FrictionParams(out["a"], out["b"], out["alpha"], out["eps"])
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), line=_first_line(lines, "a", "b", "alpha")) from None
    return OptConfig(domain=kind, domain_params=params, boundary=boundary, C=float(C), **out)


def _first_line(lines, *keys):
    found = [lines[k] for k in keys if lines.get(k) is not None]
    return min(found) if found else None


def parse_config(path):
    """Read and resolve a configuration file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return resolve(_parse_lines(text))


def parse_config_text(text):
    return resolve(_parse_lines(text))


def make_config(**values):
    """Programmatic construction with the same defaults as a config file.

    Boundary tags are passed as ``bc={"bottom": "C", ...}``.
    """
    bc = values.pop("bc", {})
    values.update({f"bc.{k}": v for k, v in bc.items()})
    return resolve(values)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_entries(config):
    """Flat ``{key: typed value}`` mapping that resolves back to ``config``."""
    d = {}
    for f_ in dataclasses.fields(config):
        if f_.name in ("domain_params", "boundary"):
            continue
        d[f_.name] = getattr(config, f_.name)
    d["domain"] = config.domain
    d.update(config.domain_params)
    d.update({f"bc.{k}": v for k, v in config.boundary.items()})
    return d


def echo_config(config):
    """Text of the resolved configuration; parsing it gives back an equal config."""
    lines = ["# resolved configuration", f"# V_f = {config.V_f!r}"]
    for key, value in to_entries(config).items():
        text = f'"{value}"' if key.startswith("bc.") else _format(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


@dataclass
class Problem:
    mesh: object
    elas: Elasticity
    fp: FrictionParams
    loads: Loads
    objective: object
    C: float
    domain_volume: float
    newton: dict


def build_problem(config):
    spec = config.domain_spec()
    mesh = generate_domain(spec)
    return Problem(
        mesh=mesh,
        elas=Elasticity(config.E, config.nu),
        fp=FrictionParams(config.a, config.b, config.alpha, config.eps),
        loads=Loads(traction=tuple(config.g_N), body_force=tuple(config.f)),
        objective=Energy() if config.objective == "energy" else Compliance(),
        C=config.C,
        domain_volume=spec.area(),
        newton=dict(rtol=config.newton_rtol, step_tol=config.newton_step_tol, max_iter=config.newton_max_iter),
    )
