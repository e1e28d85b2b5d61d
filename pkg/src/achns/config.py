"""Sectioned key=value run configuration.

The format is a small INI dialect: `[section]` headers, `key = value`
lines, `#` comments. Every key is optional; the defaults reproduce the
packaged demo run, so an empty file is a valid configuration. Unknown
sections or keys, duplicate keys, malformed values and physically
inadmissible combinations are all rejected with the offending line
number.
"""

from dataclasses import dataclass

import numpy as np

from .anisotropy import AnisotropyModel, check_hypotheses, quadratic_form, taylor_cahn_matrix
from .basis import TorusGrid
from .dynamics import MaterialLaws, Problem, StepperConfig
from .errors import ConfigError, DomainError
from .potential import PotentialSpec, eps_threshold, validate_eps
from .profiles import (
    BlobDensity,
    ConstantDensity,
    SinusoidalDensity,
    phi_band_random,
    phi_constant,
    phi_modes,
    u_random_solenoidal,
    u_taylor_green,
    u_zero,
)
from .transport import mollify_initial_density

TWO_PI = 2.0 * np.pi

SNAPSHOT_CHOICES = ("none", "final", "all")


def _pfloat(text, line):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line) from None


def _pint(text, line):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", line) from None


def _pbool(text, line):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ConfigError(f"expected true or false, got {text!r}", line)


def _pstr(text, line):
    return text


def _pmodes(text, line):
    """Semicolon-separated k1,k2,re,im quadruples."""
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 4:
            raise ConfigError(f"mode {chunk!r} is not k1,k2,re,im", line)
        out.append((_pint(parts[0], line), _pint(parts[1], line),
                    _pfloat(parts[2], line), _pfloat(parts[3], line)))
    if not out:
        raise ConfigError("empty mode list", line)
    return out


_SCHEMA = {
    "domain": {"l1": _pfloat, "l2": _pfloat, "n1": _pint, "n2": _pint},
    "anisotropy": {"m11": _pfloat, "m12": _pfloat, "m22": _pfloat, "beta": _pfloat},
    "potential": {"lambda1": _pfloat, "lambda2": _pfloat, "eps": _pfloat},
    "material": {"nu_minus": _pfloat, "nu_plus": _pfloat,
                 "d_minus": _pfloat, "d_plus": _pfloat},
    "density": {"profile": _pstr, "value": _pfloat, "base": _pfloat,
                "amplitude": _pfloat, "k1": _pint, "k2": _pint,
                "width": _pfloat, "center1": _pfloat, "center2": _pfloat,
                "mollify_width": _pfloat},
    "initial_phi": {"profile": _pstr, "value": _pfloat, "modes": _pmodes,
                    "seed": _pint, "kmax": _pint, "amplitude": _pfloat,
                    "mean": _pfloat, "extra_modes": _pmodes},
    "initial_u": {"profile": _pstr, "amplitude": _pfloat, "seed": _pint,
                  "kmax": _pint},
    "time": {"dt": _pfloat, "t_end": _pfloat, "stability_safety": _pfloat,
             "allow_unstable_dt": _pbool, "n_modes_u": _pint,
             "n_modes_phi": _pint},
    "output": {"directory": _pstr, "cadence": _pint, "snapshots": _pstr},
}

# defaults reproduce the packaged demo run
_DEFAULTS = {
    ("domain", "l1"): TWO_PI,
    ("domain", "l2"): TWO_PI,
    ("domain", "n1"): 32,
    ("domain", "n2"): 32,
    ("anisotropy", "m11"): 1.2,
    ("anisotropy", "m12"): -0.1,
    ("anisotropy", "m22"): 1.0,
    ("potential", "lambda1"): 1.0,
    ("potential", "lambda2"): 0.5,
    ("potential", "eps"): 0.1,
    ("material", "nu_minus"): 0.12,
    ("material", "nu_plus"): 0.08,
    ("material", "d_minus"): 0.0146,
    ("material", "d_plus"): 0.0146,
    ("density", "profile"): "sinusoidal",
    ("density", "base"): 1.5,
    ("density", "amplitude"): 0.5,
    ("density", "k1"): 1,
    ("density", "k2"): 1,
    ("density", "mollify_width"): 0.0,
    ("initial_phi", "profile"): "band_random",
    ("initial_phi", "seed"): 7,
    ("initial_phi", "kmax"): 2,
    ("initial_phi", "amplitude"): 0.5,
    ("initial_phi", "mean"): -0.05,
    ("initial_phi", "extra_modes"): [(10, -10, 2e-9, 0.0)],
    ("initial_u", "profile"): "taylor_green",
    ("initial_u", "amplitude"): 0.3,
    ("time", "dt"): 4e-3,
    ("time", "t_end"): 1.0,
    ("time", "stability_safety"): 1.0,
    ("time", "allow_unstable_dt"): False,
    ("output", "directory"): "out",
    ("output", "cadence"): 1,
    ("output", "snapshots"): "final",
}

_PROFILE_KEYS = {
    ("density", "constant"): {"profile", "value", "mollify_width"},
    ("density", "sinusoidal"): {"profile", "base", "amplitude", "k1", "k2", "mollify_width"},
    ("density", "blob"): {"profile", "base", "amplitude", "width", "center1",
                          "center2", "mollify_width"},
    ("initial_phi", "constant"): {"profile", "value"},
    ("initial_phi", "modes"): {"profile", "modes"},
    ("initial_phi", "band_random"): {"profile", "seed", "kmax", "amplitude",
                                     "mean", "extra_modes"},
    ("initial_u", "zero"): {"profile"},
    ("initial_u", "taylor_green"): {"profile", "amplitude"},
    ("initial_u", "random_solenoidal"): {"profile", "seed", "kmax", "amplitude"},
}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description; every constructor below is
    total on a parsed instance."""

    lengths: tuple
    n_grid: tuple
    model: AnisotropyModel
    spec: PotentialSpec
    laws: MaterialLaws
    rho0: object
    phi_init: dict
    u_init: dict
    dt: float
    t_end: float
    stability_safety: float
    allow_unstable_dt: bool
    n_modes_u: int | None
    n_modes_phi: int | None
    out_dir: str
    cadence: int
    snapshots: str

    def grid(self) -> TorusGrid:
        return TorusGrid(self.lengths, self.n_grid)

    def problem(self) -> Problem:
        return Problem(self.grid(), self.model, self.spec, self.laws, self.rho0)

    def stepper(self) -> StepperConfig:
        return StepperConfig(
            dt=self.dt, t_end=self.t_end, n_modes_u=self.n_modes_u,
            n_modes_phi=self.n_modes_phi,
            stability_safety=self.stability_safety,
            allow_unstable_dt=self.allow_unstable_dt,
        )

    def initial_fields(self, grid: TorusGrid):
        p = self.phi_init
        if p["profile"] == "constant":
            phi0 = phi_constant(grid, p["value"])
        elif p["profile"] == "modes":
            phi0 = phi_modes(grid, p["modes"])
        else:
            phi0 = phi_band_random(grid, p["seed"], p["kmax"], p["amplitude"], p["mean"])
            if p.get("extra_modes"):
                # seed modes are optional perturbations: drop the ones the
                # grid cannot represent so one config serves every resolution
                kx, ky = grid.cutoff
                fits = [m for m in p["extra_modes"]
                        if abs(m[0]) <= kx and abs(m[1]) <= ky]
                if fits:
                    phi0 = phi0 + phi_modes(grid, fits)
        q = self.u_init
        if q["profile"] == "zero":
            u0 = u_zero(grid)
        elif q["profile"] == "taylor_green":
            u0 = u_taylor_green(grid, q["amplitude"])
        else:
            u0 = u_random_solenoidal(grid, q["seed"], q["kmax"], q["amplitude"])
        return u0, phi0


def _scan(text):
    """Tokenize into {(section, key): (raw value, line number)}."""
    entries = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", lineno)
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ConfigError("key outside any section", lineno)
        if "=" not in line:
            raise ConfigError("expected key = value", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        entries[(section, key)] = (value, lineno)
    return entries


class _View:
    """Typed access to scanned entries with schema defaults."""

    def __init__(self, entries):
        self.entries = entries

    def has(self, section, key):
        return (section, key) in self.entries

    def line(self, section, key, fallback=None):
        if self.has(section, key):
            return self.entries[(section, key)][1]
        return fallback

    def get(self, section, key, default=_DEFAULTS):
        if (section, key) in self.entries:
            raw, line = self.entries[(section, key)]
            return _SCHEMA[section][key](raw, line)
        if default is _DEFAULTS:
            return _DEFAULTS.get((section, key))
        return default

    def explicit_keys(self, section):
        return {k for (s, k) in self.entries if s == section}

    def section_line(self, section, fallback=None):
        lines = [ln for (s, _), (_, ln) in self.entries.items() if s == section]
        return min(lines) if lines else fallback


def _check_profile_keys(view, section, profile, line):
    allowed_profiles = sorted(p for (s, p) in _PROFILE_KEYS if s == section)
    if (section, profile) not in _PROFILE_KEYS:
        raise ConfigError(
            f"unknown {section} profile {profile!r} (choices: {', '.join(allowed_profiles)})",
            line,
        )
    allowed = _PROFILE_KEYS[(section, profile)]
    for key in sorted(view.explicit_keys(section)):
        if key not in allowed:
            raise ConfigError(
                f"key {key!r} does not apply to {section} profile {profile!r}",
                view.line(section, key),
            )


def _require(view, section, key, profile):
    if not view.has(section, key) and _DEFAULTS.get((section, key)) is None:
        raise ConfigError(
            f"{section} profile {profile!r} needs key {key!r}",
            view.section_line(section, 0),
        )
    return view.get(section, key)


def _build_density(view, lengths):
    profile = view.get("density", "profile")
    line = view.line("density", "profile", view.section_line("density", 0))
    _check_profile_keys(view, "density", profile, line)
    try:
        if profile == "constant":
            raw = ConstantDensity(_require(view, "density", "value", profile))
        elif profile == "sinusoidal":
            raw = SinusoidalDensity(
                view.get("density", "base"), view.get("density", "amplitude"),
                lengths, view.get("density", "k1"), view.get("density", "k2"),
            )
        else:
            raw = BlobDensity(
                _require(view, "density", "base", profile),
                _require(view, "density", "amplitude", profile),
                _require(view, "density", "width", profile),
                (_require(view, "density", "center1", profile),
                 _require(view, "density", "center2", profile)),
                lengths,
            )
        width = view.get("density", "mollify_width")
        rho0 = mollify_initial_density(raw, width, lengths)
    except DomainError as exc:
        raise ConfigError(str(exc), view.section_line("density", 0)) from exc
    if not rho0.bounds[0] > 0:
        raise ConfigError(
            f"density lower bound {rho0.bounds[0]:.6g} is not positive",
            view.section_line("density", 0),
        )
    return rho0


def _build_phi_init(view):
    profile = view.get("initial_phi", "profile")
    line = view.line("initial_phi", "profile", view.section_line("initial_phi", 0))
    _check_profile_keys(view, "initial_phi", profile, line)
    if profile == "constant":
        return {"profile": profile, "value": _require(view, "initial_phi", "value", profile)}
    if profile == "modes":
        return {"profile": profile, "modes": _require(view, "initial_phi", "modes", profile)}
    return {
        "profile": profile,
        "seed": view.get("initial_phi", "seed"),
        "kmax": view.get("initial_phi", "kmax"),
        "amplitude": view.get("initial_phi", "amplitude"),
        "mean": view.get("initial_phi", "mean"),
        "extra_modes": view.get("initial_phi", "extra_modes"),
    }


def _build_u_init(view):
    profile = view.get("initial_u", "profile")
    line = view.line("initial_u", "profile", view.section_line("initial_u", 0))
    _check_profile_keys(view, "initial_u", profile, line)
    if profile == "zero":
        return {"profile": profile}
    if profile == "taylor_green":
        return {"profile": profile, "amplitude": view.get("initial_u", "amplitude")}
    return {
        "profile": profile,
        "seed": _require(view, "initial_u", "seed", profile),
        "kmax": _require(view, "initial_u", "kmax", profile),
        "amplitude": view.get("initial_u", "amplitude"),
    }


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; raises ConfigError with a
    line reference on the first problem found."""
    view = _View(_scan(text))

    lengths = (view.get("domain", "l1"), view.get("domain", "l2"))
    n_grid = (view.get("domain", "n1"), view.get("domain", "n2"))
    try:
        TorusGrid(lengths, n_grid)
    except DomainError as exc:
        raise ConfigError(str(exc), view.section_line("domain", 0)) from exc
    except Exception as exc:  # dimension errors carry their own message
        raise ConfigError(str(exc), view.section_line("domain", 0)) from exc

    if view.has("anisotropy", "beta"):
        for key in ("m11", "m12", "m22"):
            if view.has("anisotropy", key):
                raise ConfigError(
                    "beta excludes explicit matrix entries",
                    view.line("anisotropy", "beta"),
                )
        model = taylor_cahn_matrix(view.get("anisotropy", "beta"))
    else:
        m11 = view.get("anisotropy", "m11")
        m12 = view.get("anisotropy", "m12")
        m22 = view.get("anisotropy", "m22")
        model = quadratic_form([[m11, m12], [m12, m22]])
    report = check_hypotheses(model)
    if not report.all_hold():
        raise ConfigError(
            f"anisotropy is not uniformly elliptic: computed r={report.r:.6g} (needs r > 0)",
            view.section_line("anisotropy", 0),
        )

    lam1 = view.get("potential", "lambda1")
    lam2 = view.get("potential", "lambda2")
    eps = view.get("potential", "eps")
    try:
        spec = PotentialSpec(lam1, lam2, eps)
    except DomainError as exc:
        raise ConfigError(str(exc), view.section_line("potential", 0)) from exc
    if not validate_eps(spec):
        thr = eps_threshold(lam1, lam2)
        raise ConfigError(
            f"eps={eps:g} is inadmissible for lambda1={lam1:g}, lambda2={lam2:g}: "
            f"the regularized well needs eps < {thr:.6g}",
            view.line("potential", "eps", view.section_line("potential", 0)),
        )

    try:
        laws = MaterialLaws(
            view.get("material", "nu_minus"), view.get("material", "nu_plus"),
            view.get("material", "d_minus"), view.get("material", "d_plus"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc), view.section_line("material", 0)) from exc

    rho0 = _build_density(view, lengths)
    phi_init = _build_phi_init(view)
    u_init = _build_u_init(view)

    try:
        stepper = StepperConfig(
            dt=view.get("time", "dt"),
            t_end=view.get("time", "t_end"),
            n_modes_u=view.get("time", "n_modes_u", None),
            n_modes_phi=view.get("time", "n_modes_phi", None),
            stability_safety=view.get("time", "stability_safety"),
            allow_unstable_dt=view.get("time", "allow_unstable_dt"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc), view.section_line("time", 0)) from exc

    cadence = view.get("output", "cadence")
    if cadence < 1:
        raise ConfigError("cadence must be >= 1", view.line("output", "cadence", 0))
    snapshots = view.get("output", "snapshots")
    if snapshots not in SNAPSHOT_CHOICES:
        raise ConfigError(
            f"snapshots must be one of {', '.join(SNAPSHOT_CHOICES)}",
            view.line("output", "snapshots", 0),
        )

    return RunConfig(
        lengths=lengths, n_grid=n_grid, model=model, spec=spec, laws=laws,
        rho0=rho0, phi_init=phi_init, u_init=u_init,
        dt=stepper.dt, t_end=stepper.t_end,
        stability_safety=stepper.stability_safety,
        allow_unstable_dt=stepper.allow_unstable_dt,
        n_modes_u=stepper.n_modes_u, n_modes_phi=stepper.n_modes_phi,
        out_dir=view.get("output", "directory"), cadence=cadence,
        snapshots=snapshots,
    )


def load_config(path: str | None) -> RunConfig:
    """Read and parse a configuration file; None means the built-in
    demo defaults."""
    if path is None:
        return parse_config("")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
