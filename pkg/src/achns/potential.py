"""Logarithmic mixing potential and its smooth quadratic extension.

The physical potential on (-1, 1) is

    F(s) = (l1/2)(1 - s^2) + G(s),
    G(s) = (l2/2) [ (1+s) ln((1+s)/2) + (1-s) ln((1-s)/2) ],

with 0 < l2 < l1. Simulation uses the C^2 extension F_eps defined on
all of R: G is replaced outside [-(1-eps), 1-eps] by its second-order
Taylor polynomial about the nearest knot, which keeps the extension
concave-corrected and quadratic at infinity. The admissible range of
eps is (0, 1 - sqrt(1 - l2/l1)); inside it the outer branch of F_eps
has strictly positive curvature.

All evaluators are vectorized and accept scalars or arrays.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PotentialSpec:
    lambda1: float
    lambda2: float
    eps: float

    def __post_init__(self):
        if not (0.0 < self.lambda2 < self.lambda1):
            raise DomainError(
                f"need 0 < lambda2 < lambda1, got lambda1={self.lambda1}, lambda2={self.lambda2}"
            )
        if not (0.0 < self.eps < 1.0):
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def knot(self) -> float:
        return 1.0 - self.eps


def eps_threshold(lambda1: float, lambda2: float) -> float:
    """Upper end of the admissible regularization range."""
    return 1.0 - np.sqrt(1.0 - lambda2 / lambda1)


def validate_eps(spec: PotentialSpec) -> bool:
    return 0.0 < spec.eps < eps_threshold(spec.lambda1, spec.lambda2)


def _as_array(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("non-finite input")
    return s


def _ret(out, scalar):
    return float(out) if scalar else out


# --- the singular potential on (-1, 1) -------------------------------------

def g_log(spec, s):
    scalar = np.ndim(s) == 0
    s = _as_array(s)
    if np.any(np.abs(s) >= 1.0):
        raise DomainError("logarithmic potential is defined for |s| < 1")
    out = 0.5 * spec.lambda2 * ((1 + s) * np.log((1 + s) / 2) + (1 - s) * np.log((1 - s) / 2))
    return _ret(out, scalar)


def g_log_prime(spec, s):
    scalar = np.ndim(s) == 0
    s = _as_array(s)
    if np.any(np.abs(s) >= 1.0):
        raise DomainError("logarithmic potential is defined for |s| < 1")
    return _ret(0.5 * spec.lambda2 * np.log((1 + s) / (1 - s)), scalar)


def g_log_second(spec, s):
    scalar = np.ndim(s) == 0
    s = _as_array(s)
    if np.any(np.abs(s) >= 1.0):
        raise DomainError("logarithmic potential is defined for |s| < 1")
    return _ret(spec.lambda2 / (1 - s * s), scalar)


def f_log(spec, s):
    scalar = np.ndim(s) == 0
    out = 0.5 * spec.lambda1 * (1 - _as_array(s) ** 2) + g_log(spec, s)
    return _ret(out, scalar)


def f_log_prime(spec, s):
    scalar = np.ndim(s) == 0
    out = -spec.lambda1 * _as_array(s) + g_log_prime(spec, s)
    return _ret(out, scalar)


# --- the C^2 extension ------------------------------------------------------

def _g_eps_pieces(spec, s):
    """(value, first, second) of the extended convex part at |s|-points t.

    Interior |s| <= knot: G itself. Outside: Taylor about the knot,
    evaluated with the sign symmetry G(-s) = G(s).
    """
    a = spec.knot
    t = np.abs(s)
    sign = np.sign(s)
    inner = t <= a
    # interior values (evaluate logs only where valid)
    ti = np.where(inner, t, 0.0)
    gi = 0.5 * spec.lambda2 * ((1 + ti) * np.log((1 + ti) / 2) + (1 - ti) * np.log((1 - ti) / 2))
    gpi = 0.5 * spec.lambda2 * np.log((1 + ti) / (1 - ti))
    gsi = spec.lambda2 / (1 - ti * ti)
    # outer Taylor data at the knot
    ga = 0.5 * spec.lambda2 * ((2 - spec.eps) * np.log((2 - spec.eps) / 2) + spec.eps * np.log(spec.eps / 2))
    gpa = 0.5 * spec.lambda2 * np.log((2 - spec.eps) / spec.eps)
    gsa = spec.lambda2 / (spec.eps * (2 - spec.eps))
    d = t - a
    go = ga + gpa * d + 0.5 * gsa * d * d
    gpo = gpa + gsa * d
    val = np.where(inner, gi, go)
    first = sign * np.where(inner, gpi, gpo)
    second = np.where(inner, gsi, gsa)
    return val, first, second


def f_eps(spec, s):
    scalar = np.ndim(s) == 0
    s = _as_array(s)
    val, _, _ = _g_eps_pieces(spec, s)
    return _ret(0.5 * spec.lambda1 * (1 - s * s) + val, scalar)


def f_eps_prime(spec, s):
    scalar = np.ndim(s) == 0
    s = _as_array(s)
    _, first, _ = _g_eps_pieces(spec, s)
    return _ret(-spec.lambda1 * s + first, scalar)


def f_eps_second(spec, s):
    scalar = np.ndim(s) == 0
    s = _as_array(s)
    _, _, second = _g_eps_pieces(spec, s)
    return _ret(-spec.lambda1 + second, scalar)


def f_eps_min(spec, n_scan: int = 20001, s_max: float = 4.0) -> float:
    """Global minimum of the extended potential (it can dip slightly
    below zero between the spinodal hump and the quadratic tails)."""
    s = np.linspace(-s_max, s_max, n_scan)
    vals = f_eps(spec, s)
    i = int(np.argmin(vals))
    m = float(vals[i])
    # polish by bisecting the derivative in the bracketing interval
    if 0 < i < s.size - 1:
        lo, hi = s[i - 1], s[i + 1]
        if f_eps_prime(spec, lo) < 0.0 < f_eps_prime(spec, hi):
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if f_eps_prime(spec, mid) < 0.0:
                    lo = mid
                else:
                    hi = mid
            m = min(m, float(f_eps(spec, 0.5 * (lo + hi))))
    # the outer branch is an upward parabola; include its exact vertex
    curv = -spec.lambda1 + spec.lambda2 / (spec.eps * (2 - spec.eps))
    if curv > 0:
        a = spec.knot
        slope_a = f_eps_prime(spec, a)
        vertex = a - slope_a / curv
        if vertex > a:
            m = min(m, float(f_eps(spec, vertex)))
    return m


def quadratic_growth_constants(spec, s_max: float = 50.0):
    """Constants (c_eps, m_eps) with F_eps(s) > m_eps s^2 for |s| > c_eps.

    m_eps is half the quadratic coefficient of the outer branch; c_eps
    is located by scanning F_eps(s) - m_eps s^2 for its last sign
    change and bisecting.
    """
    gsa = spec.lambda2 / (spec.eps * (2 - spec.eps))
    lead = 0.5 * (gsa - spec.lambda1)  # s^2 coefficient of the outer branch
    if lead <= 0:
        raise DomainError(
            "outer branch of the extension is not convex; "
            f"eps={spec.eps} is outside the admissible range "
            f"(threshold {eps_threshold(spec.lambda1, spec.lambda2):.6g})"
        )
    m_eps = 0.5 * lead

    def h(s):
        return f_eps(spec, s) - m_eps * s * s

    s = np.linspace(0.0, s_max, 200001)
    vals = h(s)
    neg = np.flatnonzero(vals <= 0.0)
    if neg.size == 0:
        return 0.0, float(m_eps)
    lo = s[neg[-1]]
    hi = s_max if neg[-1] + 1 >= s.size else s[neg[-1] + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return float(hi), float(m_eps)
