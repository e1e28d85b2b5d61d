"""Frozen-coefficient solution map and its Picard iteration.

The map takes a trajectory pair (u~, phi~) on a short horizon, advects
the density along u~, integrates the linearized Galerkin system driven
by those frozen fields from the original initial data, and returns the
resulting trajectory on the same sample grid. Its fixed points solve
the self-consistent system; the iteration contracts on short horizons.

The transport remainder int F(phi) (u - u~) . grad rho measures how far
a pair is from self-consistency in the energy ledger: it vanishes at a
fixed point and shows up as the only defect in the linearized energy
law.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import TorusGrid
from .diagnostics import energy_report
from .dynamics import (
    FlowState,
    Problem,
    StepperConfig,
    _IntervalModel,
    linearized_rhs,
    solve_mu,
    stability_bound,
)
from .errors import DimensionError, DomainError, StabilityError
from .potential import PotentialSpec, f_eps
from .transport import StepRecord, compose_displacement, density_from_displacement, trace_points

#: absolute ceiling on |k . u_k| for a velocity sample to count as solenoidal
DIV_FREE_TOL = 1e-10


@dataclass(frozen=True)
class FrozenPair:
    """Sampled trajectory pair on a uniform time grid, with end-point
    slopes so each interval carries a cubic model of both fields.

    Axis 0 of every array is the sample index; velocity samples must be
    divergence-free.
    """

    grid: TorusGrid
    t0: float
    dt: float
    u: np.ndarray      # (n_samples, 2, N1, N2) complex
    du: np.ndarray
    phi: np.ndarray    # (n_samples, N1, N2) complex
    dphi: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("sample spacing must be positive")
        n = self.u.shape[0]
        if n < 2:
            raise DomainError("a frozen pair needs at least two samples")
        if self.du.shape != self.u.shape or self.dphi.shape != self.phi.shape:
            raise DimensionError("value and slope sample shapes disagree")
        if self.phi.shape[0] != n:
            raise DimensionError("velocity and order-parameter sample counts disagree")
        if self.u.shape[1:] != (2,) + self.grid.n_grid or self.phi.shape[1:] != self.grid.n_grid:
            raise DimensionError("sample fields do not match the grid")
        g = self.grid
        for k in range(n):
            div = np.abs(g.div(self.u[k])).max()
            if div > DIV_FREE_TOL:
                raise DomainError(
                    f"frozen velocity sample {k} is not divergence-free (max |k.u|={div:.3g})"
                )
        object.__setattr__(self, "_records", {})

    @property
    def n_samples(self):
        return self.u.shape[0]

    @property
    def n_steps(self):
        return self.u.shape[0] - 1

    @property
    def t_end(self):
        return self.t0 + self.n_steps * self.dt

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_samples)

    def records(self, k: int):
        """Cubic interval models (velocity, order parameter) for step k."""
        if k not in self._records:
            t_k = self.t0 + k * self.dt
            urec = StepRecord.hermite(t_k, self.dt, self.u[k], self.du[k],
                                      self.u[k + 1], self.du[k + 1])
            prec = StepRecord.hermite(t_k, self.dt, self.phi[k], self.dphi[k],
                                      self.phi[k + 1], self.dphi[k + 1])
            self._records[k] = (urec, prec)
        return self._records[k]


def constant_pair(grid: TorusGrid, u, phi, t0: float, dt: float, n_steps: int) -> FrozenPair:
    """Constant-in-time extension of one state, the canonical first
    iterate."""
    if n_steps < 1:
        raise DomainError("need at least one step")
    reps = n_steps + 1
    zero_u = np.zeros_like(u)
    zero_p = np.zeros_like(phi)
    return FrozenPair(
        grid, t0, dt,
        np.stack([u] * reps), np.stack([zero_u] * reps),
        np.stack([phi] * reps), np.stack([zero_p] * reps),
    )


@dataclass(frozen=True)
class LambdaTrajectory:
    """Output of one application of the frozen-coefficient map."""

    pair: FrozenPair
    states: list


def lambda_map(problem: Problem, frozen: FrozenPair, u0_grid, phi0_grid,
               cfg: StepperConfig) -> LambdaTrajectory:
    """Integrate the linearized system driven by the frozen pair.

    The density rides the characteristics of the frozen velocity; the
    produced trajectory is sampled on the frozen pair's own grid and
    carries matching slopes, so it can be fed back in as the next
    frozen pair.
    """
    if abs(frozen.dt - cfg.dt) > 1e-12 * max(1.0, cfg.dt):
        raise DomainError("frozen-pair cadence must match the stepper dt")
    if frozen.t0 != 0.0:
        raise DomainError("frozen pair must start at t=0")
    bound = stability_bound(problem)
    if cfg.dt > cfg.stability_safety * bound + 1e-15 and not cfg.allow_unstable_dt:
        raise StabilityError(
            f"dt={cfg.dt} exceeds stability_safety*bound={cfg.stability_safety * bound:.6g}"
        )
    g = problem.grid
    laws, model, spec = problem.laws, problem.model, problem.spec
    nmu, nmp = cfg.n_modes_u, cfg.n_modes_phi
    h = frozen.dt
    state = problem.initial_state(u0_grid, phi0_grid, cfg)
    pts = np.stack(g.mesh, axis=-1).reshape(-1, 2)

    def slope(st, k_sample):
        return linearized_rhs(
            g, st, frozen.u[k_sample], frozen.phi[k_sample], laws, model, spec,
            n_modes_u=nmu, n_modes_phi=nmp,
        )

    du0, dphi0 = slope(state, 0)
    us, dus = [state.u], [du0]
    phis, dphis = [state.phi], [dphi0]
    states = [state]
    for k in range(frozen.n_steps):
        urec, prec = frozen.records(k)
        t = state.t
        adapter = _IntervalModel(g, urec)

        def stage_rho(tau):
            feet = trace_points(adapter, pts, tau, t)
            disp = compose_displacement(g, state.disp, feet)
            return density_from_displacement(problem.rho0, g, disp), disp

        rho_h, _ = stage_rho(t + h / 2)
        rho_1, disp_new = stage_rho(t + h)

        def f(tau, u_c, phi_c, rho_f, mu_start):
            mu_c = solve_mu(g, phi_c, rho_f, model, spec, n_modes=nmp, x0=mu_start)
            st = FlowState(tau, u_c, phi_c, rho_f, mu_c)
            duu, dpp = linearized_rhs(
                g, st, urec.coef_at(tau), prec.coef_at(tau), laws, model, spec,
                n_modes_u=nmu, n_modes_phi=nmp,
            )
            return duu, dpp, mu_c

        k1u, k1p = dus[-1], dphis[-1]
        k2u, k2p, mu_l = f(t + h / 2, state.u + (h / 2) * k1u, state.phi + (h / 2) * k1p, rho_h, state.mu)
        k3u, k3p, mu_l = f(t + h / 2, state.u + (h / 2) * k2u, state.phi + (h / 2) * k2p, rho_h, mu_l)
        k4u, k4p, mu_l = f(t + h, state.u + h * k3u, state.phi + h * k3p, rho_1, mu_l)
        u_new = state.u + (h / 6) * (k1u + 2 * k2u + 2 * k3u + k4u)
        phi_new = state.phi + (h / 6) * (k1p + 2 * k2p + 2 * k3p + k4p)
        mu_new = solve_mu(g, phi_new, rho_1, model, spec, n_modes=nmp, x0=mu_l)
        state = FlowState(t + h, u_new, phi_new, rho_1, mu_new, disp_new)
        du_n, dphi_n = slope(state, k + 1)
        us.append(u_new)
        dus.append(du_n)
        phis.append(phi_new)
        dphis.append(dphi_n)
        states.append(state)

    pair = FrozenPair(g, 0.0, h, np.stack(us), np.stack(dus), np.stack(phis), np.stack(dphis))
    return LambdaTrajectory(pair, states)


def residual_r_eps(grid: TorusGrid, state: FlowState, u_tilde, spec: PotentialSpec) -> float:
    """Transport remainder int F(phi) (u - u~) . grad rho by collocation
    quadrature; the density gradient is the spectral derivative of the
    sampled density."""
    diff = state.u - u_tilde
    if not np.any(diff):
        return 0.0
    rc = grid.to_spectral(state.rho.values)
    grho = grid.grad(rc)
    if not (np.any(grho[0]) or np.any(grho[1])):
        return 0.0
    dg = np.stack([grid.to_grid(diff[0]), grid.to_grid(diff[1])])
    grho_vals = np.stack([grid.to_grid(grho[0]), grid.to_grid(grho[1])])
    fvals = f_eps(spec, grid.to_grid(state.phi))
    return grid.quadrature(fvals * (dg[0] * grho_vals[0] + dg[1] * grho_vals[1]))


def trajectory_distance(grid: TorusGrid, a: FrozenPair, b: FrozenPair) -> float:
    """Sup over sample times of ||du||_L2 + ||dphi||_H1 between pairs."""
    if a.u.shape != b.u.shape or a.phi.shape != b.phi.shape:
        raise DimensionError("trajectory pairs have different sample layouts")
    weight = 1.0 + grid.k_sq
    worst = 0.0
    for k in range(a.n_samples):
        gap_u = grid.norm_l2_spectral(a.u[k] - b.u[k])
        dphi = a.phi[k] - b.phi[k]
        gap_phi = float(np.sqrt(grid.area * np.sum(weight * np.abs(dphi) ** 2)))
        worst = max(worst, gap_u + gap_phi)
    return worst


@dataclass(frozen=True)
class PicardReport:
    """Outcome of the fixed-point iteration. Non-convergence within the
    iteration budget is a reported outcome, not an error."""

    converged: bool
    iterations: int
    distances: list
    r_eps_history: list
    trajectory: FrozenPair
    states: list = field(repr=False)


def picard(problem: Problem, u0_grid, phi0_grid, cfg: StepperConfig,
           t_tilde: float, tol: float, tol_r: float | None = None,
           max_iter: int = 20) -> PicardReport:
    """Iterate the frozen-coefficient map from the constant-in-time
    extension of the initial data until successive trajectories agree
    to tol (sup-in-time L2 + H1) and the transport remainder falls
    below tol_r (default: 1e-8 times the initial energy)."""
    if not t_tilde > 0:
        raise DomainError("horizon must be positive")
    if not tol > 0:
        raise DomainError("tol must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    n_steps = int(round(t_tilde / cfg.dt))
    if n_steps < 1 or abs(n_steps * cfg.dt - t_tilde) > 1e-9 * max(cfg.dt, t_tilde):
        raise DomainError("horizon must be a positive integer multiple of dt")
    g = problem.grid
    state0 = problem.initial_state(u0_grid, phi0_grid, cfg)
    if tol_r is None:
        e0 = energy_report(g, state0, problem.laws, problem.model, problem.spec).e_total
        tol_r = 1e-8 * abs(e0)
    frozen = constant_pair(g, state0.u, state0.phi, 0.0, cfg.dt, n_steps)
    distances = []
    r_history = []
    traj = None
    converged = False
    for _ in range(max_iter):
        traj = lambda_map(problem, frozen, u0_grid, phi0_grid, cfg)
        dist = trajectory_distance(g, traj.pair, frozen)
        r_worst = max(
            abs(residual_r_eps(g, st, frozen.u[k], problem.spec))
            for k, st in enumerate(traj.states)
        )
        distances.append(dist)
        r_history.append(r_worst)
        frozen = traj.pair
        if dist <= tol and r_worst <= tol_r:
            converged = True
            break
    return PicardReport(converged, len(distances), distances, r_history,
                        traj.pair, traj.states)
