"""Domain and run parameters, with a flat ``key = value`` file format.

The file has sections ``[domain]``, ``[physics]``, ``[discretization]``,
``[forcing]``, ``[initial]`` and ``[output]``.  Every key is optional; missing
keys take the defaults listed in :data:`DEFAULTS`.  When ``box_lo`` /
``box_hi`` are absent the box extends one plate length beyond each plate end.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

import numpy as np

FORCE_MODELS = ("linear", "kirchhoff", "berger")
SCHEMES = ("midpoint", "midpoint_discrete_gradient")


class ConfigError(ValueError):
    """Malformed config document or violated parameter constraint."""


@dataclass(frozen=True)
class DomainSpec:
    h: float = 1.0
    plate_lo: float = 0.0
    plate_hi: float = 1.0
    box_lo: float = -1.0
    box_hi: float = 2.0

    @property
    def plate_length(self) -> float:
        return self.plate_hi - self.plate_lo


@dataclass(frozen=True)
class ForcingSpec:
    """Harmonic loads ``amplitude * cos(omega * t)`` on one basis field.

    Mode indices are 1-based; 0 switches the load off.  The plate load is
    ``G_pl = a cos(wt) xi_mode`` and the fluid load ``G_f = a cos(wt) psi_mode``.
    """
    plate_load_mode: int = 0
    plate_load_amplitude: float = 0.0
    plate_load_omega: float = 1.0
    fluid_load_mode: int = 0
    fluid_load_amplitude: float = 0.0
    fluid_load_omega: float = 1.0

    @property
    def active(self) -> bool:
        return ((self.plate_load_mode > 0 and self.plate_load_amplitude != 0.0)
                or (self.fluid_load_mode > 0 and self.fluid_load_amplitude != 0.0))


@dataclass(frozen=True)
class InitialSpec:
    """Initial data: single-mode components plus an optional random part.

    The random part is drawn from the run seed and scaled so that its
    energy-norm equals ``random_amplitude``.
    """
    u0_mode: int = 1
    u0_amplitude: float = 0.0
    u1_mode: int = 1
    u1_amplitude: float = 0.0
    v0_mode: int = 1
    v0_amplitude: float = 0.0
    random_amplitude: float = 1.0


@dataclass(frozen=True)
class OutputSpec:
    sample_every: int = 1
    dump_states: bool = False


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    # physics
    nu: float = 1.0
    k: float = 0.0
    oseen_u: float = 0.0
    drag_sigma: float = 0.0
    drag_matrix: tuple | None = None
    force_model: str = "linear"
    kirchhoff_cubic: float = 1.0
    kirchhoff_lambda: float = 0.0
    berger_kappa: float = 1.0
    berger_gamma: float = 0.0
    # discretization
    n_plate: int = 8
    m1: int = 8
    m3: int = 8
    n_plate_elements: int = 64
    n_fluid_elements: int = 32
    quad_points: int = 8
    dt: float = 1e-2
    t_final: float = 20.0
    scheme: str = "midpoint"
    tol_newton: float = 1e-10
    tol_linear: float = 1e-10
    newton_max_iter: int = 25
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def drag(self) -> np.ndarray:
        """The constant 2x2 drag matrix A."""
        if self.drag_matrix is not None:
            return np.asarray(self.drag_matrix, dtype=float).reshape(2, 2)
        return self.drag_sigma * np.eye(2)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "domain": ("h", "plate_lo", "plate_hi", "box_lo", "box_hi"),
    "physics": ("nu", "k", "oseen_u", "drag_sigma", "drag_matrix", "force_model",
                "kirchhoff_cubic", "kirchhoff_lambda", "berger_kappa", "berger_gamma"),
    "discretization": ("n_plate", "m1", "m3", "n_plate_elements", "n_fluid_elements",
                       "quad_points", "dt", "t_final", "scheme", "tol_newton",
                       "tol_linear", "newton_max_iter"),
    "forcing": tuple(f.name for f in dataclasses.fields(ForcingSpec)),
    "initial": tuple(f.name for f in dataclasses.fields(InitialSpec)),
    "output": tuple(f.name for f in dataclasses.fields(OutputSpec)),
}

DEFAULTS = RunConfig()


def _field_types():
    types = {}
    for cls in (DomainSpec, RunConfig, ForcingSpec, InitialSpec, OutputSpec):
        for f in dataclasses.fields(cls):
            if f.name not in ("domain", "forcing", "initial", "output"):
                types[f.name] = type(getattr(cls(), f.name)) if f.name != "drag_matrix" else tuple
    return types


_TYPES = _field_types()


def _convert(section: str, key: str, raw: str):
    kind = _TYPES[key]
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            if text.lower() in ("", "none"):
                return None
            vals = tuple(float(v) for v in text.strip("()[]").split(","))
            if len(vals) != 4:
                raise ValueError("drag_matrix needs four entries a11, a12, a21, a22")
            return vals
        return text
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} ({exc})") from None


def parse_config(text: str) -> tuple[RunConfig, DomainSpec]:
    """Parse a config document; raises :class:`ConfigError` on any problem."""
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config document: {exc}") from None

    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            values[section][key] = _convert(section, key, raw)

    dom = dict(values["domain"])
    lo = dom.get("plate_lo", DEFAULTS.domain.plate_lo)
    hi = dom.get("plate_hi", DEFAULTS.domain.plate_hi)
    length = hi - lo
    dom.setdefault("box_lo", lo - length)
    dom.setdefault("box_hi", hi + length)
    domain = DomainSpec(**dom)

    top = {**values["physics"], **values["discretization"]}
    config = RunConfig(
        domain=domain,
        forcing=ForcingSpec(**values["forcing"]),
        initial=InitialSpec(**values["initial"]),
        output=OutputSpec(**values["output"]),
        **top,
    )
    problems = validate(config)
    if problems:
        raise ConfigError("; ".join(problems))
    return config, domain


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())[0]


def serialize(config: RunConfig) -> str:
    """Write a config back to the ``key = value`` format (floats via repr)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    sources = {
        "domain": config.domain,
        "physics": config,
        "discretization": config,
        "forcing": config.forcing,
        "initial": config.initial,
        "output": config.output,
    }
    for section, keys in _SECTIONS.items():
        parser.add_section(section)
        obj = sources[section]
        for key in keys:
            value = getattr(obj, key)
            if key == "drag_matrix":
                text = "none" if value is None else ", ".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            parser.set(section, key, text)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def validate(config: RunConfig) -> list[str]:
    """Return one diagnostic per violated invariant; empty list when valid."""
    out = []
    d = config.domain

    def check(ok, path, msg):
        if not ok:
            out.append(f"{path}: {msg}")

    check(d.h > 0, "domain.h", "h must be positive")
    check(d.plate_hi > d.plate_lo, "domain.plate_hi", "plate_hi must exceed plate_lo")
    check(d.plate_lo - d.box_lo >= 0, "domain.box_lo", "box_lo must not exceed plate_lo")
    check(d.box_hi - d.plate_hi >= 0, "domain.box_hi", "box_hi must not be below plate_hi")
    check(config.nu > 0, "physics.nu", "nu must be positive")
    check(config.k >= 0, "physics.k", "k must be nonnegative")
    check(config.drag_sigma >= 0, "physics.drag_sigma", "drag_sigma must be nonnegative")
    check(config.force_model in FORCE_MODELS, "physics.force_model",
          f"force_model must be one of {', '.join(FORCE_MODELS)}")
    if config.force_model == "kirchhoff":
        check(config.kirchhoff_cubic > 0, "physics.kirchhoff_cubic", "kirchhoff_cubic must be positive")
        check(config.kirchhoff_lambda >= 0, "physics.kirchhoff_lambda", "kirchhoff_lambda must be nonnegative")
    if config.force_model == "berger":
        check(config.berger_kappa > 0, "physics.berger_kappa", "berger_kappa must be positive")
    check(config.n_plate >= 1, "discretization.n_plate", "n_plate must be at least 1")
    check(config.m1 >= 1, "discretization.m1", "m1 must be at least 1")
    check(config.m3 >= 1, "discretization.m3", "m3 must be at least 1")
    check(config.n_plate_elements >= 4, "discretization.n_plate_elements", "n_plate_elements must be at least 4")
    check(2 * config.n_plate_elements - 3 >= config.n_plate, "discretization.n_plate",
          "n_plate exceeds the zero-mean clamped space dimension")
    check(config.n_fluid_elements >= 4, "discretization.n_fluid_elements", "n_fluid_elements must be at least 4")
    check(2 * config.n_fluid_elements - 2 >= max(config.m1, config.m3), "discretization.m1",
          "m1/m3 exceed the 1D clamped space dimension")
    check(config.quad_points >= 2, "discretization.quad_points", "quad_points must be at least 2")
    check(config.dt > 0, "discretization.dt", "dt must be positive")
    check(config.t_final >= 0, "discretization.t_final", "t_final must be nonnegative")
    check(config.scheme in SCHEMES, "discretization.scheme", f"scheme must be one of {', '.join(SCHEMES)}")
    check(config.tol_newton > 0, "discretization.tol_newton", "tol_newton must be positive")
    check(config.tol_linear > 0, "discretization.tol_linear", "tol_linear must be positive")
    check(config.newton_max_iter >= 1, "discretization.newton_max_iter", "newton_max_iter must be at least 1")
    f = config.forcing
    check(f.plate_load_mode >= 0, "forcing.plate_load_mode", "plate_load_mode must be nonnegative")
    check(f.plate_load_mode <= config.n_plate, "forcing.plate_load_mode", "plate_load_mode exceeds n_plate")
    check(f.fluid_load_mode >= 0, "forcing.fluid_load_mode", "fluid_load_mode must be nonnegative")
    check(f.fluid_load_mode <= config.m1 * config.m3, "forcing.fluid_load_mode", "fluid_load_mode exceeds m1*m3")
    ini = config.initial
    check(1 <= ini.u0_mode <= config.n_plate, "initial.u0_mode", "u0_mode must lie in 1..n_plate")
    check(1 <= ini.u1_mode <= config.n_plate, "initial.u1_mode", "u1_mode must lie in 1..n_plate")
    check(1 <= ini.v0_mode <= config.m1 * config.m3, "initial.v0_mode", "v0_mode must lie in 1..m1*m3")
    check(ini.random_amplitude >= 0, "initial.random_amplitude", "random_amplitude must be nonnegative")
    check(config.output.sample_every >= 1, "output.sample_every", "sample_every must be at least 1")
    return out
