"""Galerkin dynamics of the coupled density / velocity / order-parameter
system on the periodic box.

State layout: velocity and order parameter live as retained-band
spectral coefficients; the density is carried as an exact composition
of the initial profile with an accumulated backward displacement, so
its bounds never degrade. The chemical potential is slaved: it solves a
density-weighted linear system at every evaluation.

Time integration is a two-pass classical RK4. The first pass predicts
the end-of-step velocity with a linear-in-time velocity model for the
characteristic feet; the second pass rebuilds the stage densities from
a cubic velocity model and recomputes the stages. That keeps the
density consistent with the stage velocities to fifth order locally,
which preserves the integrator's fourth-order self-convergence.
"""

from dataclasses import dataclass

import numpy as np

from .anisotropy import AnisotropyModel, QUADRATIC_FORM, check_hypotheses, xi_cap
from .basis import TorusGrid
from .errors import BlowUpError, DomainError, SolverError, StabilityError
from .potential import PotentialSpec, f_eps_prime, validate_eps
from .transport import (
    DensityField,
    StepRecord,
    VelocityHistory,
    compose_displacement,
    density_from_displacement,
    trace_points,
)

DEFAULT_RTOL = 1e-13
_MAX_CG_ITER = 400


@dataclass(frozen=True)
class MaterialLaws:
    """Viscosity and mobility at the pure phases, interpolated affinely
    in the order parameter and clamped to the endpoint range."""

    nu_minus: float
    nu_plus: float
    d_minus: float
    d_plus: float

    def __post_init__(self):
        for name in ("nu_minus", "nu_plus", "d_minus", "d_plus"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    def _affine(self, lo, hi, s):
        val = lo + (hi - lo) * (np.asarray(s) + 1.0) / 2.0
        return np.clip(val, min(lo, hi), max(lo, hi))

    def nu(self, s):
        return self._affine(self.nu_minus, self.nu_plus, s)

    def mobility(self, s):
        return self._affine(self.d_minus, self.d_plus, s)

    @property
    def nu_max(self):
        return max(self.nu_minus, self.nu_plus)

    @property
    def d_max(self):
        return max(self.d_minus, self.d_plus)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    n_modes_u: int | None = None
    n_modes_phi: int | None = None
    integrator: str = "rk4"
    stability_safety: float = 1.0
    allow_unstable_dt: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.t_end < 0:
            raise DomainError("t_end must be nonnegative")
        if not 0 < self.stability_safety <= 1:
            raise DomainError("stability_safety must lie in (0, 1]")
        if self.integrator != "rk4":
            raise DomainError(f"unknown integrator {self.integrator!r}")


@dataclass(frozen=True)
class FlowState:
    """Immutable snapshot: time, spectral u and phi, density field,
    slaved chemical potential, and the accumulated backward
    displacement that reproduces rho from the initial profile."""

    t: float
    u: np.ndarray
    phi: np.ndarray
    rho: DensityField
    mu: np.ndarray
    disp: np.ndarray | None = None


@dataclass(frozen=True)
class Problem:
    """Static data of one simulation: discretization and physics."""

    grid: TorusGrid
    model: AnisotropyModel
    spec: PotentialSpec
    laws: MaterialLaws
    rho0: object  # analytic density sampler with .bounds

    def __post_init__(self):
        if self.model.kind != QUADRATIC_FORM or self.model.dim != 2:
            raise DomainError("simulation needs a 2d quadratic-form anisotropy")
        report = check_hypotheses(self.model)
        if not report.all_hold():
            raise DomainError(
                f"anisotropy hypotheses fail (r={report.r:.6g}); cannot simulate"
            )
        if not validate_eps(self.spec):
            raise DomainError(
                f"regularization eps={self.spec.eps} outside the admissible range"
            )
        lo, _ = self.rho0.bounds
        if not lo > 0:
            raise DomainError("initial density must be strictly positive")
        object.__setattr__(self, "report", report)

    def initial_state(self, u0_grid, phi0_grid, cfg: StepperConfig) -> FlowState:
        g = self.grid
        u = g.leray_project(
            np.stack([g.to_spectral(u0_grid[0]), g.to_spectral(u0_grid[1])])
        )
        phi = g.to_spectral(np.asarray(phi0_grid, dtype=float))
        if cfg.n_modes_u is not None:
            u = np.stack([g.project_scalar(c, cfg.n_modes_u) for c in u])
        if cfg.n_modes_phi is not None:
            phi = g.project_scalar(phi, cfg.n_modes_phi)
        rho = density_from_displacement(self.rho0, g, None)
        mu = solve_mu(g, phi, rho, self.model, self.spec, n_modes=cfg.n_modes_phi)
        return FlowState(0.0, u, phi, rho, mu, None)


def stability_bound(problem: Problem) -> float:
    """Explicit-step limit: parabolic in the viscosity and fourth-order
    in the mobility-anisotropy product."""
    g = problem.grid
    h = min(g.lengths[0] / g.n_grid[0], g.lengths[1] / g.n_grid[1])
    rho_min = problem.rho0.bounds[0]
    visc = h * h * rho_min / (2 * 2 * problem.laws.nu_max)
    four = h**4 * rho_min / (8 * problem.laws.d_max * problem.report.R)
    return min(visc, four)


# --- linear solves -----------------------------------------------------------

def _inner(a, b) -> float:
    return float(np.sum(np.conj(a) * b).real)


def _cg(apply_a, b, x0, rtol, label):
    """Conjugate gradients on (possibly stacked) complex coefficients."""
    bnorm = np.sqrt(_inner(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = x0.copy()
    r = b - apply_a(x)
    rs = _inner(r, r)
    if np.sqrt(rs) <= rtol * bnorm:
        return x
    p = r.copy()
    for _ in range(_MAX_CG_ITER):
        ap = apply_a(p)
        den = _inner(p, ap)
        if den <= 0.0:
            # the mass operators are positive definite, so vanishing
            # curvature only happens when the search direction has
            # underflowed; the residual is already at the noise floor
            return x
        alpha = rs / den
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = _inner(r, r)
        if np.sqrt(rs_new) <= rtol * bnorm:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"{label} mass solve did not reach rtol={rtol}",
        residual=float(np.sqrt(rs) / bnorm),
    )


def _scalar_mass_apply(grid, rho_vals, n_modes):
    def apply_a(w):
        out = grid.to_spectral(rho_vals * grid.to_grid(w))
        if n_modes is not None:
            out = grid.project_scalar(out, n_modes)
        return out

    return apply_a

def _vector_mass_apply(grid, rho_vals, n_modes):
    def apply_a(w):
        out = np.stack(
            [grid.to_spectral(rho_vals * grid.to_grid(w[0])),
             grid.to_spectral(rho_vals * grid.to_grid(w[1]))]
        )
        out = grid.leray_project(out)
        if n_modes is not None:
            out = np.stack([grid.project_scalar(c, n_modes) for c in out])
        return out

    return apply_a


def solve_mu(grid: TorusGrid, phi, rho: DensityField, model: AnisotropyModel,
             spec: PotentialSpec, *, n_modes=None, rtol=DEFAULT_RTOL,
             x0=None) -> np.ndarray:
    """Chemical potential from the density-weighted Galerkin identity:
    (rho mu, w) = (aniso-flux(grad phi), grad w) + (rho F_eps'(phi), w)
    for every retained test mode w."""
    rho_vals = rho.values
    phig = grid.to_grid(phi)
    gphi = grid.grad(phi)
    gphi_vals = np.stack([grid.to_grid(gphi[0]), grid.to_grid(gphi[1])])
    xi = xi_cap(model, np.moveaxis(gphi_vals, 0, -1))
    flux = np.stack([grid.to_spectral(xi[..., 0]), grid.to_spectral(xi[..., 1])])
    b = -grid.div(flux) + grid.to_spectral(rho_vals * f_eps_prime(spec, phig))
    if n_modes is not None:
        b = grid.project_scalar(b, n_modes)
    rho_bar = float(rho_vals.mean())
    start = x0 if x0 is not None else b / rho_bar
    if n_modes is not None:
        start = grid.project_scalar(start, n_modes)
    return _cg(_scalar_mass_apply(grid, rho_vals, n_modes), b, start, rtol, "potential")


# --- right-hand sides --------------------------------------------------------

def _assemble(grid, rho_vals, u, phi, mu, adv_u, trans_phi, law_phi, cap_phi,
              laws, spec, n_modes_u, n_modes_phi, rtol, mu_start=None):
    """Shared weak-form assembly. The four field slots distinguish the
    self-consistent system (all equal to the current state) from the
    linearized one (advection velocity, transported gradient, material
    coefficients, and capillary gradient frozen)."""
    ug = np.stack([grid.to_grid(u[0]), grid.to_grid(u[1])])
    advg = ug if adv_u is u else np.stack([grid.to_grid(adv_u[0]), grid.to_grid(adv_u[1])])
    phig = grid.to_grid(phi)
    lawg = phig if law_phi is phi else grid.to_grid(law_phi)
    mug = grid.to_grid(mu)
    nu = laws.nu(lawg)
    dd = laws.mobility(lawg)

    # velocity gradients d_j u_i on the grid
    du = np.empty((2, 2) + grid.n_grid)
    for i in range(2):
        gi = grid.grad(u[i])
        du[i, 0] = grid.to_grid(gi[0])
        du[i, 1] = grid.to_grid(gi[1])

    gphi_cur = grid.grad(phi)
    gphi_cur_vals = np.stack([grid.to_grid(gphi_cur[0]), grid.to_grid(gphi_cur[1])])
    if cap_phi is phi:
        gcap_vals = gphi_cur_vals
    else:
        gc = grid.grad(cap_phi)
        gcap_vals = np.stack([grid.to_grid(gc[0]), grid.to_grid(gc[1])])

    fpr = f_eps_prime(spec, phig)
    b_u = np.empty((2,) + grid.n_grid, dtype=complex)
    for i in range(2):
        conv = rho_vals * (advg[0] * du[i, 0] + advg[1] * du[i, 1])
        # symmetric stress row: S_ij = d_j u_i + d_i u_j
        s_i0 = nu * (du[i, 0] + du[0, i])
        s_i1 = nu * (du[i, 1] + du[1, i])
        stress_div = grid.div(np.stack([grid.to_spectral(s_i0), grid.to_spectral(s_i1)]))
        force = rho_vals * (mug * gcap_vals[i] - fpr * gphi_cur_vals[i])
        b_u[i] = -grid.to_spectral(conv) + stress_div + grid.to_spectral(force)
    b_u = grid.leray_project(b_u)
    if n_modes_u is not None:
        b_u = np.stack([grid.project_scalar(c, n_modes_u) for c in b_u])

    rho_bar = float(rho_vals.mean())
    dudt = _cg(
        _vector_mass_apply(grid, rho_vals, n_modes_u),
        b_u,
        grid.leray_project(b_u / rho_bar),
        rtol,
        "velocity",
    )

    if trans_phi is phi:
        gtrans_vals = gphi_cur_vals
    else:
        gt = grid.grad(trans_phi)
        gtrans_vals = np.stack([grid.to_grid(gt[0]), grid.to_grid(gt[1])])
    gmu = grid.grad(mu)
    gmu_vals = np.stack([grid.to_grid(gmu[0]), grid.to_grid(gmu[1])])
    conv_phi = rho_vals * (ug[0] * gtrans_vals[0] + ug[1] * gtrans_vals[1])
    flux = grid.div(
        np.stack([grid.to_spectral(dd * gmu_vals[0]), grid.to_spectral(dd * gmu_vals[1])])
    )
    b_phi = -grid.to_spectral(conv_phi) + flux
    if n_modes_phi is not None:
        b_phi = grid.project_scalar(b_phi, n_modes_phi)
    start = b_phi / rho_bar
    dphidt = _cg(_scalar_mass_apply(grid, rho_vals, n_modes_phi), b_phi, start, rtol, "concentration")
    return dudt, dphidt


def rhs(grid: TorusGrid, state: FlowState, laws: MaterialLaws,
        model: AnisotropyModel, spec: PotentialSpec, *, n_modes_u=None,
        n_modes_phi=None, rtol=DEFAULT_RTOL):
    """Self-consistent Galerkin time derivatives (du/dt, dphi/dt)."""
    return _assemble(
        grid, state.rho.values, state.u, state.phi, state.mu,
        state.u, state.phi, state.phi, state.phi,
        laws, spec, n_modes_u, n_modes_phi, rtol,
    )


def linearized_rhs(grid: TorusGrid, state: FlowState, frozen_u, frozen_phi,
                   laws: MaterialLaws, model: AnisotropyModel,
                   spec: PotentialSpec, *, n_modes_u=None, n_modes_phi=None,
                   rtol=DEFAULT_RTOL):
    """Time derivatives with advection velocity, transported gradient,
    material coefficients and capillary gradient frozen at (u~, phi~);
    the potential gradient keeps the current phi."""
    return _assemble(
        grid, state.rho.values, state.u, state.phi, state.mu,
        frozen_u, frozen_phi, frozen_phi, frozen_phi,
        laws, spec, n_modes_u, n_modes_phi, rtol,
    )


# --- time stepping -----------------------------------------------------------

class _IntervalModel:
    """Single-step velocity model adapter for characteristic tracing."""

    def __init__(self, grid, record):
        self.grid = grid
        self.record = record
        self.segment_boundaries = np.array([record.t_start, record.t_end])

    def coef_at(self, tau):
        return self.record.coef_at(tau)


_BLOWUP_CAP = 1e130


def _check_finite(t, name, arr):
    mags = np.abs(arr)
    if not np.all(np.isfinite(mags)) or mags.max() > _BLOWUP_CAP:
        raise BlowUpError(t, name)


def step(problem: Problem, state: FlowState, cfg: StepperConfig, *,
         dt=None, deriv0=None):
    """One two-pass RK4 step. Returns (new_state, velocity record,
    end-of-step derivatives) so callers can chain without re-evaluating."""
    g = problem.grid
    laws, model, spec = problem.laws, problem.model, problem.spec
    h = cfg.dt if dt is None else dt
    bound = stability_bound(problem)
    if h > cfg.stability_safety * bound + 1e-15 and not cfg.allow_unstable_dt:
        raise StabilityError(
            f"dt={h} exceeds stability_safety*bound={cfg.stability_safety * bound:.6g}"
        )
    nmu, nmp = cfg.n_modes_u, cfg.n_modes_phi
    t = state.t
    _check_finite(t, "velocity", state.u)
    _check_finite(t, "order_parameter", state.phi)
    pts = np.stack(g.mesh, axis=-1).reshape(-1, 2)

    def stage_density(record, tau):
        feet = trace_points(_IntervalModel(g, record), pts, tau, t)
        disp = compose_displacement(g, state.disp, feet)
        return density_from_displacement(problem.rho0, g, disp), disp

    def f(tau, u_c, phi_c, rho_f, mu_start):
        _check_finite(tau, "velocity", u_c)
        _check_finite(tau, "order_parameter", phi_c)
        mu_c = solve_mu(g, phi_c, rho_f, model, spec, n_modes=nmp, x0=mu_start)
        st = FlowState(tau, u_c, phi_c, rho_f, mu_c)
        du, dphi = rhs(g, st, laws, model, spec, n_modes_u=nmu, n_modes_phi=nmp)
        return du, dphi, mu_c

    # stage 1 shares the state's own (consistent) chemical potential
    if deriv0 is not None:
        du1, dphi1 = deriv0
    else:
        du1, dphi1 = rhs(g, state, laws, model, spec, n_modes_u=nmu, n_modes_phi=nmp)

    def rk4_sweep(rho_half, rho_full, mu_seed):
        mu_last = mu_seed
        du2, dphi2, mu_last = f(
            t + h / 2, state.u + (h / 2) * du1, state.phi + (h / 2) * dphi1, rho_half, mu_last
        )
        du3, dphi3, mu_last = f(
            t + h / 2, state.u + (h / 2) * du2, state.phi + (h / 2) * dphi2, rho_half, mu_last
        )
        du4, dphi4, mu_last = f(
            t + h, state.u + h * du3, state.phi + h * dphi3, rho_full, mu_last
        )
        u_new = state.u + (h / 6) * (du1 + 2 * du2 + 2 * du3 + du4)
        phi_new = state.phi + (h / 6) * (dphi1 + 2 * dphi2 + 2 * dphi3 + dphi4)
        return u_new, phi_new, mu_last

    # pass 0: predictor with a linear velocity model
    zeros = np.zeros_like(state.u)
    lin = StepRecord(t, h, np.stack([state.u, h * du1, zeros, zeros]))
    rho_h0, _ = stage_density(lin, t + h / 2)
    rho_10, _ = stage_density(lin, t + h)
    u_p, phi_p, mu_last = rk4_sweep(rho_h0, rho_10, state.mu)
    mu_p = solve_mu(g, phi_p, rho_10, model, spec, n_modes=nmp, x0=mu_last)
    st_p = FlowState(t + h, u_p, phi_p, rho_10, mu_p)
    du_p, _ = rhs(g, st_p, laws, model, spec, n_modes_u=nmu, n_modes_phi=nmp)

    # pass 1: corrector with the cubic velocity model
    cubic = StepRecord.hermite(t, h, state.u, du1, u_p, du_p)
    rho_h1, _ = stage_density(cubic, t + h / 2)
    rho_11, disp_new = stage_density(cubic, t + h)
    u_new, phi_new, mu_last = rk4_sweep(rho_h1, rho_11, mu_p)
    _check_finite(t + h, "velocity", u_new)
    _check_finite(t + h, "order_parameter", phi_new)

    mu_new = solve_mu(g, phi_new, rho_11, model, spec, n_modes=nmp, x0=mu_last)
    _check_finite(t + h, "chemical_potential", mu_new)
    new_state = FlowState(t + h, u_new, phi_new, rho_11, mu_new, disp_new)
    du_f, dphi_f = rhs(g, new_state, laws, model, spec, n_modes_u=nmu, n_modes_phi=nmp)
    record = StepRecord.hermite(t, h, state.u, du1, u_new, du_f)
    return new_state, record, (du_f, dphi_f)


@dataclass
class RunSummary:
    final_state: FlowState
    history: VelocityHistory
    n_steps: int


def run(problem: Problem, u0_grid, phi0_grid, cfg: StepperConfig,
        sinks=(), cadence: int = 1) -> RunSummary:
    """Integrate from t=0 to cfg.t_end, emitting states to the sinks at
    the given step cadence (the initial and final states always)."""
    if cadence < 1:
        raise DomainError("cadence must be >= 1")
    state = problem.initial_state(u0_grid, phi0_grid, cfg)
    history = VelocityHistory(problem.grid, 0.0)
    for sink in sinks:
        sink(state)
    deriv = None
    n = 0
    t_end = cfg.t_end
    while state.t < t_end - 1e-12 * max(1.0, t_end):
        h = min(cfg.dt, t_end - state.t)
        state, record, deriv = step(problem, state, cfg, dt=h, deriv0=deriv)
        history.append(record)
        n += 1
        if n % cadence == 0 or state.t >= t_end - 1e-12 * max(1.0, t_end):
            for sink in sinks:
                sink(state)
    return RunSummary(state, history, n)
