"""Binary state snapshots.

Layout (all little-endian):

    offset  size  field
    0       4     magic  b"ACHN"
    4       4     format version (u32, currently 1)
    8       4     n1 (u32)          grid points, first direction
    12      4     n2 (u32)
    16      8     l1 (f64)          domain lengths
    24      8     l2 (f64)
    32      8     rho_lo (f64)      density invariant-region bounds
    40      8     rho_hi (f64)
    48      4     n_modes_u (u32)   retained velocity modes per component
    52      4     n_modes_phi (u32)
    56      8     time (f64)
    64      ...   rho grid values, row-major f64, n1*n2 entries
            ...   u1 coefficients, n_modes_u complex128 (re, im pairs)
            ...   u2 coefficients, n_modes_u complex128
            ...   phi coefficients, n_modes_phi complex128

Coefficients are stored in the grid's canonical mode order (ascending
squared wavenumber, lexicographic ties), so files written for the same
grid are comparable mode by mode. A write -> read -> write cycle is
byte-identical.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .basis import TorusGrid
from .errors import DomainError
from .transport import DensityField

MAGIC = b"ACHN"
VERSION = 1

_HEADER = struct.Struct("<4sIIIddddIId")


@dataclass(frozen=True)
class SnapshotData:
    """Decoded snapshot; coefficient arrays are in canonical mode order."""

    version: int
    n_grid: tuple
    lengths: tuple
    rho_lo: float
    rho_hi: float
    time: float
    rho_values: np.ndarray      # (n1, n2) float64
    u_coef: np.ndarray          # (2, n_modes_u) complex128
    phi_coef: np.ndarray        # (n_modes_phi,) complex128


def _gather(grid, coef, count):
    return np.ascontiguousarray(coef.ravel()[grid.mode_order[:count]], dtype="<c16")


def write_snapshot(target, grid: TorusGrid, state, *, n_modes_u=None, n_modes_phi=None):
    """Write one state to a path or binary file object."""
    nu = grid.n_band_modes if n_modes_u is None else int(n_modes_u)
    np_ = grid.n_band_modes if n_modes_phi is None else int(n_modes_phi)
    if not (1 <= nu <= grid.n_band_modes and 1 <= np_ <= grid.n_band_modes):
        raise DomainError(
            f"mode counts must lie in [1, {grid.n_band_modes}], got {nu}, {np_}"
        )
    header = _HEADER.pack(
        MAGIC, VERSION, grid.n_grid[0], grid.n_grid[1],
        grid.lengths[0], grid.lengths[1],
        state.rho.lo, state.rho.hi, nu, np_, state.t,
    )
    blocks = [
        header,
        np.ascontiguousarray(state.rho.values, dtype="<f8").tobytes(),
        _gather(grid, state.u[0], nu).tobytes(),
        _gather(grid, state.u[1], nu).tobytes(),
        _gather(grid, state.phi, np_).tobytes(),
    ]
    payload = b"".join(blocks)
    if hasattr(target, "write"):
        target.write(payload)
    else:
        with open(target, "wb") as fh:
            fh.write(payload)


def read_snapshot(source) -> SnapshotData:
    """Read a snapshot from a path or binary file object."""
    if hasattr(source, "read"):
        buf = source.read()
    else:
        with open(source, "rb") as fh:
            buf = fh.read()
    if len(buf) < _HEADER.size:
        raise DomainError("snapshot truncated: header incomplete")
    (magic, version, n1, n2, l1, l2, rho_lo, rho_hi,
     nu, np_, time) = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DomainError(f"not a snapshot file: bad magic {magic!r}")
    if version != VERSION:
        raise DomainError(f"unsupported snapshot version {version}")
    need = _HEADER.size + 8 * n1 * n2 + 16 * (2 * nu + np_)
    if len(buf) != need:
        raise DomainError(
            f"snapshot truncated or oversized: expected {need} bytes, got {len(buf)}"
        )
    off = _HEADER.size
    rho = np.frombuffer(buf, "<f8", n1 * n2, off).reshape(n1, n2).copy()
    off += 8 * n1 * n2
    u1 = np.frombuffer(buf, "<c16", nu, off).copy()
    off += 16 * nu
    u2 = np.frombuffer(buf, "<c16", nu, off).copy()
    off += 16 * nu
    phi = np.frombuffer(buf, "<c16", np_, off).copy()
    return SnapshotData(
        version=version, n_grid=(n1, n2), lengths=(l1, l2),
        rho_lo=rho_lo, rho_hi=rho_hi, time=time,
        rho_values=rho, u_coef=np.stack([u1, u2]), phi_coef=phi,
    )


def embed_coefficients(grid: TorusGrid, coef, count=None):
    """Scatter canonical-order coefficients back to a full spectral array."""
    coef = np.asarray(coef, dtype=np.complex128)
    n = coef.shape[-1] if count is None else int(count)
    if n > grid.n_band_modes:
        raise DomainError(
            f"snapshot holds {n} modes but the grid retains only {grid.n_band_modes}"
        )
    full = np.zeros(grid.n_grid, dtype=np.complex128)
    full.ravel()[grid.mode_order[:n]] = coef[..., :n]
    return full


def restore_fields(snap: SnapshotData, grid: TorusGrid):
    """Rebuild (u spectral, phi spectral, DensityField) on a matching grid."""
    if snap.n_grid != grid.n_grid:
        raise DomainError(
            f"snapshot grid {snap.n_grid} does not match {grid.n_grid}"
        )
    if not np.allclose(snap.lengths, grid.lengths, rtol=0.0, atol=1e-12):
        raise DomainError(
            f"snapshot domain {snap.lengths} does not match {grid.lengths}"
        )
    u = np.stack([embed_coefficients(grid, snap.u_coef[i]) for i in range(2)])
    phi = embed_coefficients(grid, snap.phi_coef)
    rho = DensityField(snap.rho_values, snap.rho_lo, snap.rho_hi)
    return u, phi, rho


class SnapshotSink:
    """Run callback that writes numbered snapshots into a directory."""

    def __init__(self, directory, grid, *, n_modes_u=None, n_modes_phi=None,
                 pattern="state_{:06d}.bin"):
        self.directory = directory
        self.grid = grid
        self.n_modes_u = n_modes_u
        self.n_modes_phi = n_modes_phi
        self.pattern = pattern
        self.count = 0
        self.paths = []

    def __call__(self, state):
        import os

        path = os.path.join(self.directory, self.pattern.format(self.count))
        write_snapshot(path, self.grid, state,
                       n_modes_u=self.n_modes_u, n_modes_phi=self.n_modes_phi)
        self.count += 1
        self.paths.append(path)
