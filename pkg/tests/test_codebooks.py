import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsedft.channel import SystemConfig, UserLocation, far_steering, near_steering
from sparsedft.codebooks import (
    AngularGrid,
    ConstraintError,
    check_interval,
    codebook_from_dict,
    codebook_to_dict,
    dft_codebook,
    load_codebook,
    polar_alpha,
    polar_codebook,
    polar_ranges,
    sampling_vector,
    save_codebook,
    sparse_dft_codebook,
    subarray_bounds,
    subarray_codebook,
)


def assert_codeword_invariants(cb):
    for c in cb:
        assert np.linalg.norm(c.weights) == pytest.approx(1.0, abs=1e-12)
        assert np.all(c.weights[~c.active_mask] == 0)
        assert np.all(c.weights[c.active_mask] != 0)


def aligned(a, b, tol=1e-10):
    """Equal up to a global phase."""
    return abs(abs(np.vdot(a, b)) - 1.0) < tol


@given(st.integers(1, 600))
def test_grid_properties(n):
    g = AngularGrid(n)
    a = g.angles
    assert np.all(np.diff(a) > 0)
    assert a[0] > -1 and a[-1] < 1
    assert np.allclose(np.diff(a), 2.0 / n, atol=1e-12)
    assert g.spacing == 2.0 / n
    assert np.allclose(a + a[::-1], 0.0, atol=1e-12)
    for s in (1, n // 2 + 1, n):
        assert g.nearest_index(float(g.angle(s))) == s
    assert g.wrap(0) == n and g.wrap(n + 1) == 1


def test_sampling_vector():
    m = sampling_vector(257, 16)
    assert m.sum() == 17
    assert np.flatnonzero(m).tolist() == list(range(0, 257, 16))
    assert sampling_vector(257, 1).all()
    assert sampling_vector(5, 2).astype(int).tolist() == [1, 0, 1, 0, 1]
    with pytest.raises(ConstraintError, match="Q is an integer"):
        sampling_vector(257, 15)


def test_interval_constraints():
    assert check_interval(257, 16) == 17
    with pytest.raises(ConstraintError, match="integer"):
        check_interval(257, 15)
    with pytest.raises(ConstraintError, match="even"):
        check_interval(13, 4)  # Q = 4 is even
    with pytest.raises(ConstraintError):
        check_interval(257, 0)


def test_sparse_dft_codebook(cfg):
    cb = sparse_dft_codebook(cfg, 16)
    assert len(cb) == 17 and cb.kind == "sparse_dft"
    angles = np.array([c.steer_angle for c in cb])
    assert angles.min() >= -1 / 16 - 1e-12 and angles.max() < 1 / 16
    assert cb.grid.n_points == 272
    for c in cb:
        assert c.steer_angle == pytest.approx(float(cb.grid.angle(c.index)), abs=1e-15)
    assert_codeword_invariants(cb)
    # SLA weights: entries exp(-j pi k theta) / sqrt(Q) on the active positions
    k = np.flatnonzero(cb.entries[3].active_mask)
    w = cb.entries[3].weights[k]
    assert np.allclose(w, np.exp(-1j * np.pi * k * cb.entries[3].steer_angle) / math.sqrt(17))


def test_sparse_dft_warns_beyond_bound():
    cfg = SystemConfig(n_antennas=65)  # bound sqrt(76.8) = 8.76
    with pytest.warns(UserWarning, match="exceeds"):
        sparse_dft_codebook(cfg, 16)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sparse_dft_codebook(cfg, 8)


def test_sparse_dft_u1_is_dft():
    cfg = SystemConfig(n_antennas=33)
    sp = sparse_dft_codebook(cfg, 1)
    full = dft_codebook(cfg)
    assert len(sp) == len(full) == 33
    for a, b in zip(sp, full):
        assert a.index == b.index
        assert aligned(a.weights, b.weights)
        assert aligned(a.weights, far_steering(cfg, a.steer_angle))


def test_dft_codebook(cfg):
    cb = dft_codebook(cfg, 272)
    assert len(cb) == 272
    assert_codeword_invariants(cb)
    for c in cb.entries[::37]:
        assert aligned(c.weights, far_steering(cfg, c.steer_angle))


def test_subarray_bounds_and_checks(cfg):
    lo, hi = subarray_bounds(257, 16)
    assert lo == 16 and hi == pytest.approx(17.53, abs=0.005)
    subarray_codebook(cfg, 17, 16)
    subarray_codebook(cfg, 16, 16)
    for bad in (15, 18):
        with pytest.raises(ConstraintError, match="U <= M") as ei:
            subarray_codebook(cfg, bad, 16)
        assert "far field" in str(ei.value) and "alias" in str(ei.value)
    with pytest.warns(UserWarning):
        subarray_codebook(cfg, 64, 16, enforce=False)


def test_subarray_codebook_layout(cfg):
    cb = subarray_codebook(cfg, 17, 16)
    assert len(cb) == 272
    assert_codeword_invariants(cb)
    m = cb.entries[0].active_mask
    lead = (257 - 17) // 2
    assert not m[:lead].any() and not m[lead + 17:].any() and m[lead:lead + 17].all()
    # the subarray Rayleigh distance stays below the full-array Fresnel distance
    d0, lam = cfg.antenna_spacing, cfg.wavelength
    assert 2 * 17**2 * d0**2 / lam <= 1.2 * cfg.aperture
    assert 4 / 17 <= 4 / 16


def test_subarray_even_m_padding():
    cfg = SystemConfig()
    with pytest.warns(UserWarning):
        cb = subarray_codebook(cfg, 64, 16, enforce=False)
    m = cb.entries[0].active_mask
    assert m.sum() == 64
    first = int(np.argmax(m))
    assert first == (257 - 64) // 2


def test_subarray_isolation_between_candidates(cfg):
    # the subarray beam aimed at one alias leaks < 0.2 of its peak onto the next alias
    cb = subarray_codebook(cfg, 17, 16)
    g = cb.grid
    for s in (20, 136, 250):
        w = cb.by_index(s).weights
        th = float(g.angle(s))
        peak = abs(np.vdot(far_steering(cfg, th), w))
        for off in (-2 / 16, 2 / 16):
            other = th + off
            if -1 < other < 1:
                assert abs(np.vdot(far_steering(cfg, other), w)) < 0.2 * peak


def test_polar_codebook(cfg):
    grid = AngularGrid(272)
    cb = polar_codebook(cfg, 5, 1.2, grid)
    assert len(cb) == 272 * 5
    assert_codeword_invariants(cb)
    alpha = polar_alpha(cfg, 1.2)
    assert alpha == pytest.approx(257**2 * 0.005**2 / (2 * 0.01 * 1.44), rel=1e-12)
    for s in (1, 100, 137, 272):
        block = cb.polar_block(s)
        assert [c.range_index for c in block] == [1, 2, 3, 4, 5]
        ranges = np.array([c.steer_range for c in block])
        assert np.all(np.diff(ranges) < 0)
        th = float(grid.angle(s))
        assert np.allclose(ranges, alpha * (1 - th * th) / np.arange(1, 6), rtol=1e-12)
        for c in block:
            assert np.allclose(c.weights, near_steering(cfg, UserLocation(c.steer_range, c.steer_angle)))
    # theta = 0 (odd grid): r = alpha / v
    assert np.allclose(polar_ranges(cfg, 0.0, 5, 1.2), alpha / np.arange(1, 6))
    with pytest.raises(ValueError):
        polar_codebook(cfg, 0)
    with pytest.raises(ValueError):
        polar_codebook(cfg, 5, -1.0)
    with pytest.raises(TypeError):
        dft_codebook(cfg).polar_block(1)


@pytest.mark.parametrize("inline", [False, True])
@pytest.mark.parametrize("kind", ["dft", "sparse_dft", "subarray", "polar"])
def test_codebook_json_roundtrip(tmp_path, kind, inline):
    cfg = SystemConfig(n_antennas=65)
    cb = {
        "dft": lambda: dft_codebook(cfg, 72),
        "sparse_dft": lambda: sparse_dft_codebook(cfg, 8),
        "subarray": lambda: subarray_codebook(cfg, 8, 8),
        "polar": lambda: polar_codebook(cfg, 3, 1.2, AngularGrid(72)),
    }[kind]()
    path = tmp_path / f"{kind}.json"
    save_codebook(cb, cfg, path, inline_weights=inline)
    back, cfg2 = load_codebook(path)
    assert cfg2 == cfg
    assert back.kind == cb.kind and len(back) == len(cb)
    for a, b in zip(cb, back):
        assert a.key == b.key
        assert np.allclose(a.weights, b.weights, atol=1e-15)
        assert np.array_equal(a.active_mask, b.active_mask)


def test_codebook_dict_tamper_detected(cfg):
    d = codebook_to_dict(sparse_dft_codebook(cfg, 16), cfg)
    d["entries"][2]["angle"] += 0.1
    with pytest.raises(ValueError, match="mismatch"):
        codebook_from_dict(d)
    d["kind"] = "hierarchical"
    with pytest.raises(ValueError, match="unknown"):
        codebook_from_dict(d)
