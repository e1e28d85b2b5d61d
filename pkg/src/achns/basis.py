"""Periodic spectral discretization on a rectangular 2-torus.

Fields live in two equivalent representations:

* grid values, real arrays of shape ``(N1, N2)`` sampled at collocation
  points ``x_i = i * L/N``;
* spectral coefficients, complex arrays of the same shape holding the
  coefficients of ``f(x) = sum_k c_k exp(i k.x)`` in numpy FFT layout,
  nonzero only inside the retained (dealiased) band.

The retained band keeps integer wavenumbers ``|k_i| <= K_i`` with
``K_i = (N_i - 1) // 3``, so the product of any two retained fields is
representable on the grid without aliasing and pseudo-spectral products
followed by re-masking agree with exact Galerkin products.

Vector fields are stacked along a leading axis of length 2.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError


def _check_extent(n):
    if n < 8 or (n & (n - 1)) != 0:
        raise DimensionError(f"grid extent must be a power of two >= 8, got {n}")


@dataclass(frozen=True)
class TorusGrid:
    """Geometry, mode bookkeeping and transforms for one periodic box."""

    lengths: tuple
    n_grid: tuple

    def __post_init__(self):
        if len(self.lengths) != 2 or len(self.n_grid) != 2:
            raise DimensionError("TorusGrid is two-dimensional")
        for ell in self.lengths:
            if not (np.isfinite(ell) and ell > 0):
                raise DimensionError(f"box side must be positive, got {ell}")
        for n in self.n_grid:
            _check_extent(n)
        object.__setattr__(self, "lengths", (float(self.lengths[0]), float(self.lengths[1])))
        object.__setattr__(self, "n_grid", (int(self.n_grid[0]), int(self.n_grid[1])))

    # --- geometry -----------------------------------------------------

    @property
    def area(self):
        return self.lengths[0] * self.lengths[1]

    @property
    def cell(self):
        """Quadrature weight of one collocation point."""
        return self.area / (self.n_grid[0] * self.n_grid[1])

    @cached_property
    def x1(self):
        return np.arange(self.n_grid[0]) * (self.lengths[0] / self.n_grid[0])

    @cached_property
    def x2(self):
        return np.arange(self.n_grid[1]) * (self.lengths[1] / self.n_grid[1])

    @cached_property
    def mesh(self):
        """Pair of (N1, N2) coordinate arrays."""
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    # --- wavenumbers ----------------------------------------------------

    @cached_property
    def k1_int(self):
        n = self.n_grid[0]
        return np.rint(np.fft.fftfreq(n) * n).astype(int)

    @cached_property
    def k2_int(self):
        n = self.n_grid[1]
        return np.rint(np.fft.fftfreq(n) * n).astype(int)

    @cached_property
    def k1(self):
        """Physical wavenumbers along axis 0, shaped (N1, 1)."""
        return (2.0 * np.pi / self.lengths[0]) * self.k1_int[:, None]

    @cached_property
    def k2(self):
        """Physical wavenumbers along axis 1, shaped (1, N2)."""
        return (2.0 * np.pi / self.lengths[1]) * self.k2_int[None, :]

    @cached_property
    def k_sq(self):
        return self.k1**2 + self.k2**2

    @property
    def cutoff(self):
        return (self.n_grid[0] - 1) // 3, (self.n_grid[1] - 1) // 3

    @cached_property
    def dealias_mask(self):
        kc1, kc2 = self.cutoff
        return (np.abs(self.k1_int)[:, None] <= kc1) & (np.abs(self.k2_int)[None, :] <= kc2)

    @cached_property
    def n_band_modes(self):
        return int(np.count_nonzero(self.dealias_mask))

    @cached_property
    def mode_order(self):
        """Flat indices of retained modes, ascending (|k|^2, k1, k2).

        This is the canonical enumeration used by spectral truncation and
        by the snapshot format.
        """
        flat = np.flatnonzero(self.dealias_mask.ravel())
        kk1 = np.repeat(self.k1_int, self.n_grid[1])[flat]
        kk2 = np.tile(self.k2_int, self.n_grid[0])[flat]
        ksq = self.k_sq.ravel()[flat]
        order = np.lexsort((kk2, kk1, ksq))
        return flat[order]

    @cached_property
    def mode_list(self):
        """Integer wavenumber pairs (n_band_modes, 2) in canonical order."""
        kk1 = np.repeat(self.k1_int, self.n_grid[1])[self.mode_order]
        kk2 = np.tile(self.k2_int, self.n_grid[0])[self.mode_order]
        return np.stack([kk1, kk2], axis=1)

    # --- transforms -----------------------------------------------------

    def _check_grid_shape(self, values):
        if values.shape[-2:] != self.n_grid:
            raise DimensionError(
                f"field shape {values.shape} does not match grid {self.n_grid}"
            )

    def to_spectral(self, values):
        """Grid values -> retained-band coefficients."""
        values = np.asarray(values)
        self._check_grid_shape(values)
        norm = self.n_grid[0] * self.n_grid[1]
        return np.fft.fft2(values) / norm * self.dealias_mask

    def to_grid(self, coef):
        """Retained-band coefficients -> real grid values."""
        coef = np.asarray(coef)
        self._check_grid_shape(coef)
        norm = self.n_grid[0] * self.n_grid[1]
        return np.fft.ifft2(coef * norm).real

    def mask(self, coef):
        return coef * self.dealias_mask

    # --- calculus ---------------------------------------------------------

    def grad(self, coef):
        """Spectral gradient of a scalar: coefficients of (d1 f, d2 f)."""
        return np.stack([1j * self.k1 * coef, 1j * self.k2 * coef])

    def div(self, vcoef):
        """Spectral divergence of a 2-vector coefficient stack."""
        return 1j * self.k1 * vcoef[0] + 1j * self.k2 * vcoef[1]

    def leray_project(self, vcoef):
        """Remove the compressive part: u_k <- (I - k k^T/|k|^2) u_k.

        The zero mode is preserved; idempotent.
        """
        ksq = self.k_sq.copy()
        ksq[0, 0] = 1.0  # zero mode handled by the numerator being zero
        kdotu = self.k1 * vcoef[0] + self.k2 * vcoef[1]
        out = np.stack(
            [vcoef[0] - self.k1 * kdotu / ksq, vcoef[1] - self.k2 * kdotu / ksq]
        )
        return out

    def project_scalar(self, coef, n_modes):
        """Keep the n_modes lowest-|k|^2 retained modes of a scalar field.

        Ties in |k|^2 are broken lexicographically on (k1, k2), matching
        the canonical mode order.
        """
        if not 0 <= n_modes <= self.n_band_modes:
            raise DimensionError(
                f"n_modes must lie in [0, {self.n_band_modes}], got {n_modes}"
            )
        out = np.zeros_like(coef).ravel()
        keep = self.mode_order[:n_modes]
        out[keep] = coef.ravel()[keep]
        return out.reshape(coef.shape)

    # --- quadrature --------------------------------------------------------

    def quadrature(self, values):
        """Integral over the box of a grid field (collocation quadrature)."""
        return self.cell * float(np.sum(values))

    def norm_l2(self, values):
        """Grid L2 norm, sqrt(integral of |f|^2); accepts vector stacks."""
        return float(np.sqrt(self.cell * np.sum(np.asarray(values) ** 2)))

    def norm_l2_spectral(self, coef):
        """L2 norm from coefficients by the Parseval identity."""
        return float(np.sqrt(self.area * np.sum(np.abs(coef) ** 2)))

    # --- nonuniform evaluation ------------------------------------------

    @cached_property
    def _band_index(self):
        """Index arrays selecting the retained band as a dense submatrix."""
        kc1, kc2 = self.cutoff
        rows = np.concatenate([np.arange(kc1 + 1), np.arange(self.n_grid[0] - kc1, self.n_grid[0])])
        cols = np.concatenate([np.arange(kc2 + 1), np.arange(self.n_grid[1] - kc2, self.n_grid[1])])
        kints1 = self.k1_int[rows]
        kints2 = self.k2_int[cols]
        return rows, cols, kints1, kints2

    @staticmethod
    def _phase_matrix(theta, kints):
        """exp(i * kints * theta) for all points/exponents, by repeated products.

        kints is the FFT-ordered integer list 0..K, -K..-1; positive powers
        are built cumulatively and negatives by conjugation.
        """
        kmax = int(np.max(kints))
        npts = theta.shape[0]
        pos = np.empty((npts, kmax + 1), dtype=complex)
        pos[:, 0] = 1.0
        base = np.exp(1j * theta)
        for m in range(1, kmax + 1):
            pos[:, m] = pos[:, m - 1] * base
        out = np.empty((npts, kints.shape[0]), dtype=complex)
        for j, kv in enumerate(kints):
            out[:, j] = pos[:, kv] if kv >= 0 else np.conj(pos[:, -kv])
        return out

    def eval_at(self, coef, points):
        """Evaluate a retained-band scalar field at arbitrary points.

        Exact trigonometric evaluation (no grid interpolation): points
        need not be wrapped into the box. points has shape (P, 2).
        """
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise DimensionError("points must have shape (P, 2)")
        rows, cols, kints1, kints2 = self._band_index
        sub = coef[np.ix_(rows, cols)]
        th1 = (2.0 * np.pi / self.lengths[0]) * points[:, 0]
        th2 = (2.0 * np.pi / self.lengths[1]) * points[:, 1]
        e1 = self._phase_matrix(th1, kints1)
        e2 = self._phase_matrix(th2, kints2)
        tmp = e1 @ sub
        return np.einsum("pj,pj->p", tmp, e2).real
