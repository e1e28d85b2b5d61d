import io

import numpy as np
import pytest

from achns.config import parse_config
from achns.dynamics import run
from achns.errors import DomainError
from achns.snapshot import (
    MAGIC,
    SnapshotSink,
    embed_coefficients,
    read_snapshot,
    restore_fields,
    write_snapshot,
)


@pytest.fixture(scope="module")
def small_run():
    cfg = parse_config(
        "[domain]\nn1 = 16\nn2 = 16\n[time]\ndt = 0.002\nt_end = 0.01\n")
    grid = cfg.grid()
    problem = cfg.problem()
    u0, phi0 = cfg.initial_fields(grid)
    summary = run(problem, u0, phi0, cfg.stepper())
    return cfg, grid, summary.final_state


def _dump(grid, state, **kw):
    buf = io.BytesIO()
    write_snapshot(buf, grid, state, **kw)
    return buf.getvalue()


def test_layout_size(small_run):
    _, grid, state = small_run
    raw = _dump(grid, state)
    nb = grid.n_band_modes
    assert len(raw) == 64 + 8 * 16 * 16 + 16 * 3 * nb
    assert raw[:4] == MAGIC


def test_header_fields(small_run):
    _, grid, state = small_run
    snap = read_snapshot(io.BytesIO(_dump(grid, state)))
    assert snap.version == 1
    assert snap.n_grid == (16, 16)
    assert snap.lengths == pytest.approx(grid.lengths, rel=0, abs=0)
    assert snap.time == state.t
    assert (snap.rho_lo, snap.rho_hi) == (state.rho.lo, state.rho.hi)


def test_round_trip_bit_exact(small_run):
    _, grid, state = small_run
    raw1 = _dump(grid, state)
    snap = read_snapshot(io.BytesIO(raw1))
    u, phi, rho = restore_fields(snap, grid)
    assert np.array_equal(u, state.u)
    assert np.array_equal(phi, state.phi)
    assert np.array_equal(rho.values, state.rho.values)

    class Shell:
        pass

    again = Shell()
    again.t, again.u, again.phi, again.rho = snap.time, u, phi, rho
    raw2 = _dump(grid, again)
    assert raw2 == raw1


def test_path_io(small_run, tmp_path):
    _, grid, state = small_run
    path = tmp_path / "state.bin"
    write_snapshot(path, grid, state)
    snap = read_snapshot(path)
    assert snap.time == state.t
    assert path.read_bytes() == _dump(grid, state)


def test_truncated_header():
    with pytest.raises(DomainError, match="header"):
        read_snapshot(io.BytesIO(b"ACHN" + b"\x00" * 10))


def test_bad_magic(small_run):
    _, grid, state = small_run
    raw = _dump(grid, state)
    with pytest.raises(DomainError, match="magic"):
        read_snapshot(io.BytesIO(b"XXXX" + raw[4:]))


def test_bad_version(small_run):
    _, grid, state = small_run
    raw = _dump(grid, state)
    bad = raw[:4] + (9).to_bytes(4, "little") + raw[8:]
    with pytest.raises(DomainError, match="version"):
        read_snapshot(io.BytesIO(bad))


def test_truncated_payload(small_run):
    _, grid, state = small_run
    raw = _dump(grid, state)
    with pytest.raises(DomainError, match="truncated"):
        read_snapshot(io.BytesIO(raw[:-8]))
    with pytest.raises(DomainError, match="truncated"):
        read_snapshot(io.BytesIO(raw + b"\x00"))


def test_partial_mode_counts(small_run):
    _, grid, state = small_run
    raw = _dump(grid, state, n_modes_u=10, n_modes_phi=7)
    snap = read_snapshot(io.BytesIO(raw))
    assert snap.u_coef.shape == (2, 10)
    assert snap.phi_coef.shape == (7,)
    # retained modes are the energetically leading ones, in canonical order
    full = state.phi.ravel()[grid.mode_order[:7]]
    assert np.array_equal(snap.phi_coef, full)


def test_mode_count_bounds(small_run):
    _, grid, state = small_run
    with pytest.raises(DomainError, match="mode counts"):
        _dump(grid, state, n_modes_u=0)
    with pytest.raises(DomainError, match="mode counts"):
        _dump(grid, state, n_modes_phi=grid.n_band_modes + 1)


def test_embed_rejects_oversized(small_run):
    _, grid, _ = small_run
    with pytest.raises(DomainError, match="retains only"):
        embed_coefficients(grid, np.zeros(grid.n_band_modes + 1, complex))


def test_restore_grid_mismatch(small_run):
    cfg, grid, state = small_run
    snap = read_snapshot(io.BytesIO(_dump(grid, state)))
    other = parse_config("[domain]\nn1 = 8\nn2 = 8\n").grid()
    with pytest.raises(DomainError, match="does not match"):
        restore_fields(snap, other)


def test_restore_length_mismatch(small_run):
    _, grid, state = small_run
    snap = read_snapshot(io.BytesIO(_dump(grid, state)))
    other = parse_config(
        "[domain]\nn1 = 16\nn2 = 16\nl1 = 3.0\nl2 = 3.0\n").grid()
    with pytest.raises(DomainError, match="domain"):
        restore_fields(snap, other)


def test_snapshot_sink(small_run, tmp_path):
    _, grid, state = small_run
    sink = SnapshotSink(str(tmp_path), grid)
    sink(state)
    sink(state)
    assert sink.count == 2
    assert (tmp_path / "state_000000.bin").exists()
    assert (tmp_path / "state_000001.bin").exists()
    a = (tmp_path / "state_000000.bin").read_bytes()
    b = (tmp_path / "state_000001.bin").read_bytes()
    assert a == b
