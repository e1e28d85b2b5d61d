"""Trajectory observables and a-priori bounds.

Three groups live here:

* the energy ledger of a flow state (kinetic, surface, potential) with
  the matching dissipation rates, plus the discrete energy-law residual
  of a sampled trajectory;
* a finite-difference time-regularity seminorm of exponent 1/4 for
  scalar time series, used to certify quarter-Holder control of norms
  along a run;
* the blow-up horizon of the comparison inequality y' <= c1 y^2 + g0,
  whose solution stays below an explicit hyperbola until an explicit
  time t_star.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .anisotropy import AnisotropyModel, gamma_sq
from .basis import TorusGrid
from .dynamics import FlowState, MaterialLaws
from .errors import DomainError, HorizonError
from .potential import PotentialSpec, f_eps, f_eps_prime

#: exponent of the finite-difference time-regularity seminorm
HOLDER_EXPONENT = 0.25


# --- energy ledger -----------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    """Energy components, dissipation rates and invariants at one time.

    Energies are integrals over the box: e_kin = int rho |u|^2 / 2,
    e_surf = int (grad phi)^T M (grad phi) / 2, e_pot = int rho F(phi)
    with the regularized potential. d_visc pairs the symmetric stress
    with the velocity gradient (so it is twice the classical enstrophy
    integral), matching the momentum assembly exactly; d_diff is the
    mobility-weighted square gradient of the chemical potential.
    """

    t: float
    e_kin: float
    e_surf: float
    e_pot: float
    e_total: float
    d_visc: float
    d_diff: float
    mass_rho: float
    mass_rhophi: float
    f_eps_prime_l6: float

    @property
    def dissipation(self):
        return self.d_visc + self.d_diff


def energy_report(grid: TorusGrid, state: FlowState, laws: MaterialLaws,
                  model: AnisotropyModel, spec: PotentialSpec) -> EnergyReport:
    """Evaluate the full energy ledger of one state by collocation
    quadrature."""
    rho = state.rho.values
    ug = np.stack([grid.to_grid(state.u[0]), grid.to_grid(state.u[1])])
    phig = grid.to_grid(state.phi)

    e_kin = 0.5 * grid.quadrature(rho * (ug[0] ** 2 + ug[1] ** 2))

    gphi = grid.grad(state.phi)
    gphi_vals = np.stack([grid.to_grid(gphi[0]), grid.to_grid(gphi[1])])
    e_surf = 0.5 * grid.quadrature(gamma_sq(model, np.moveaxis(gphi_vals, 0, -1)))

    e_pot = grid.quadrature(rho * f_eps(spec, phig))

    # velocity gradient tensor d_j u_i and the symmetric stress pairing
    du = np.empty((2, 2) + grid.n_grid)
    for i in range(2):
        gi = grid.grad(state.u[i])
        du[i, 0] = grid.to_grid(gi[0])
        du[i, 1] = grid.to_grid(gi[1])
    contraction = np.zeros(grid.n_grid)
    for i in range(2):
        for j in range(2):
            contraction += (du[i, j] + du[j, i]) * du[i, j]
    d_visc = grid.quadrature(laws.nu(phig) * contraction)

    gmu = grid.grad(state.mu)
    gmu_sq = grid.to_grid(gmu[0]) ** 2 + grid.to_grid(gmu[1]) ** 2
    d_diff = grid.quadrature(laws.mobility(phig) * gmu_sq)

    fpr = f_eps_prime(spec, phig)
    return EnergyReport(
        t=state.t,
        e_kin=e_kin,
        e_surf=e_surf,
        e_pot=e_pot,
        e_total=e_kin + e_surf + e_pot,
        d_visc=d_visc,
        d_diff=d_diff,
        mass_rho=grid.quadrature(rho),
        mass_rhophi=grid.quadrature(rho * phig),
        f_eps_prime_l6=grid.quadrature(np.abs(fpr) ** 6) ** (1.0 / 6.0),
    )


def energy_law_residual(reports, dt: float):
    """Per-interval defect of the discrete energy law.

    For consecutive reports the defect is
    E(t_{n+1}) - E(t_n) + dt * (D_{n+1} + D_n) / 2 with D the total
    dissipation rate; it vanishes at the order of the time
    discretization. Returns (residual array, max abs residual).
    """
    if len(reports) < 2:
        raise DomainError("energy-law residual needs at least two samples")
    if not dt > 0:
        raise DomainError("dt must be positive")
    e = np.array([r.e_total for r in reports])
    d = np.array([r.dissipation for r in reports])
    res = e[1:] - e[:-1] + dt * 0.5 * (d[1:] + d[:-1])
    return res, float(np.max(np.abs(res)))


class EnergyCsvWriter:
    """Streaming sink: one CSV row of the energy ledger per emitted state.

    Rows carry 17 significant digits so that re-parsing reproduces the
    binary doubles exactly; each row is flushed as soon as it is
    written, so a crashed run leaves a valid prefix behind.
    """

    COLUMNS = (
        "t", "e_kin", "e_surf", "e_pot", "e_total", "d_visc", "d_diff",
        "mass_rho", "mass_rhophi", "f_eps_prime_l6", "energy_residual",
    )

    def __init__(self, stream, grid, laws, model, spec):
        self.stream = stream
        self.grid = grid
        self.laws = laws
        self.model = model
        self.spec = spec
        self.reports = []
        self.residuals = []
        stream.write(",".join(self.COLUMNS) + "\n")
        stream.flush()

    def __call__(self, state: FlowState):
        rep = energy_report(self.grid, state, self.laws, self.model, self.spec)
        if self.reports:
            prev = self.reports[-1]
            span = rep.t - prev.t
            resid = rep.e_total - prev.e_total + span * 0.5 * (
                rep.dissipation + prev.dissipation
            )
        else:
            resid = 0.0
        self.reports.append(rep)
        self.residuals.append(resid)
        row = (
            rep.t, rep.e_kin, rep.e_surf, rep.e_pot, rep.e_total,
            rep.d_visc, rep.d_diff, rep.mass_rho, rep.mass_rhophi,
            rep.f_eps_prime_l6, resid,
        )
        self.stream.write(",".join(f"{v:.17g}" for v in row) + "\n")
        self.stream.flush()


# --- quarter-Holder seminorm of time series -----------------------------------

def _check_series(series, p, sample_dt):
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise DomainError("time series must be one-dimensional")
    if series.shape[0] < 4:
        raise DomainError("time series needs at least 4 samples")
    if not np.all(np.isfinite(series)):
        raise DomainError("time series contains non-finite values")
    if not sample_dt > 0:
        raise DomainError("sample_dt must be positive")
    p = float(p)
    if p not in (2.0, math.inf):
        raise DomainError("only p=2 and p=inf are supported")
    return series, p


def _lp_in_time(vals, p, dt):
    """Time L^p norm of samples on a uniform grid spanning their range.

    p=inf is the max; p=2 uses the trapezoid rule (a single sample spans
    an empty interval and contributes zero).
    """
    if p == math.inf:
        return float(np.max(np.abs(vals)))
    if vals.shape[0] < 2:
        return 0.0
    sq = vals * vals
    integral = dt * (np.sum(sq) - 0.5 * sq[0] - 0.5 * sq[-1])
    return float(np.sqrt(integral))


def besov_seminorm(series, p, sample_dt: float) -> float:
    """Finite-difference seminorm sup_h h^(-1/4) ||f(.+h) - f(.)||_p.

    The shift h runs over every positive multiple of sample_dt up to the
    full span of the series, inclusive, so a ramp attains its supremum
    at the endpoint difference.
    """
    series, p = _check_series(series, p, sample_dt)
    n = series.shape[0]
    best = 0.0
    for j in range(1, n):
        diffs = series[j:] - series[:-j]
        amp = _lp_in_time(diffs, p, sample_dt)
        h = j * sample_dt
        best = max(best, amp / h**HOLDER_EXPONENT)
    return best


def besov_norm(series, p, sample_dt: float) -> float:
    """Seminorm plus the plain time L^p norm of the series."""
    checked, pv = _check_series(series, p, sample_dt)
    return _lp_in_time(checked, pv, sample_dt) + besov_seminorm(series, p, sample_dt)


# --- quadratic-growth blow-up horizon ----------------------------------------

@dataclass(frozen=True)
class BihariBound:
    """Explicit majorant for y' <= c1 y^2 + g0, y(0) = y0.

    Any such y satisfies y(t) <= (y0 + g0 t) / (1 - c1 t (y0 + g0 t))
    strictly before t_star, the positive root of the denominator; the
    majorant blows up there.
    """

    c1: float
    g0: float
    y0: float
    t_star: float


def bihari_horizon(c1: float, g0: float, y0: float) -> BihariBound:
    """Guaranteed-existence horizon for the quadratic growth inequality."""
    if not c1 > 0:
        raise DomainError("c1 must be positive")
    if not y0 > 0:
        raise DomainError("y0 must be positive")
    if g0 < 0:
        raise DomainError("g0 must be nonnegative")
    b = c1 * y0
    # positive root of c1 g0 T^2 + c1 y0 T - 1, rationalized so g0 -> 0
    # degenerates smoothly to 1/(c1 y0)
    t_star = 2.0 / (b + math.sqrt(b * b + 4.0 * c1 * g0))
    return BihariBound(float(c1), float(g0), float(y0), t_star)


def bihari_bound_at(bound: BihariBound, t: float) -> float:
    """Evaluate the majorant at time t; only defined strictly before the
    horizon."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t >= bound.t_star:
        raise HorizonError(
            f"t={t} is at or beyond the blow-up horizon t_star={bound.t_star}"
        )
    w = bound.y0 + bound.g0 * t
    return w / (1.0 - bound.c1 * t * w)


def bihari_check(bound: BihariBound | None = None, n_trials: int = 20,
                 seed: int = 20260815) -> bool:
    """Verify the majorant against high-accuracy integrations of the
    saturated equation y' = c1 y^2 + g0.

    Checks the given bound (if any) plus n_trials random parameter
    triples drawn from [0.1, 10]^3, each on a grid reaching 95% of its
    horizon. Returns True when every integrated solution stays below
    the majorant up to 1e-6 relative slack.
    """
    cases = [] if bound is None else [bound]
    rng = np.random.default_rng(seed)
    for _ in range(n_trials):
        c1, g0, y0 = rng.uniform(0.1, 10.0, size=3)
        cases.append(bihari_horizon(c1, g0, y0))
    ok = True
    for case in cases:
        t_hi = 0.95 * case.t_star
        grid = np.linspace(0.0, t_hi, 48)
        sol = solve_ivp(
            lambda t, y: case.c1 * y * y + case.g0,
            (0.0, t_hi),
            [case.y0],
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
            t_eval=grid,
        )
        if not sol.success:
            return False
        majorant = np.array([bihari_bound_at(case, t) for t in grid])
        if not np.all(sol.y[0] <= majorant * (1.0 + 1e-6)):
            ok = False
    return ok
