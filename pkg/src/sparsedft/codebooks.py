"""Codebooks: conventional DFT, sparse DFT, central subarray and polar domain.

Grid indices ``s`` are 1-based everywhere (``s = 1 .. QU``), so logs and
reports can be read against the usual ``theta_s = (2s - QU - 1) / QU`` grid.
"""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import SystemConfig, UserLocation, near_steering

DEFAULT_BETA_DELTA = 1.2
DEFAULT_N_RANGES = 5
KINDS = ("dft", "sparse_dft", "subarray", "polar")


class ConstraintError(ValueError):
    """A codebook parameter violates one of the design inequalities."""


@dataclass(frozen=True)
class AngularGrid:
    n_points: int

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("grid needs at least one point")

    @property
    def spacing(self) -> float:
        return 2.0 / self.n_points

    def angle(self, s):
        """Angle of (possibly out-of-range, shifted) index ``s``."""
        return (2.0 * np.asarray(s, dtype=float) - self.n_points - 1.0) / self.n_points

    @property
    def angles(self) -> np.ndarray:
        return self.angle(np.arange(1, self.n_points + 1))

    def wrap(self, s: int) -> int:
        """Map any integer index onto 1..n_points (angles wrap with period 2)."""
        return int((s - 1) % self.n_points) + 1

    def nearest_index(self, theta: float) -> int:
        s = round((theta * self.n_points + self.n_points + 1) / 2.0)
        return self.wrap(s)


@dataclass
class Codeword:
    weights: np.ndarray
    active_mask: np.ndarray
    steer_angle: float
    steer_range: float | None = None
    index: int = 0
    range_index: int | None = None

    @property
    def key(self) -> tuple:
        return (self.index, self.range_index)


@dataclass
class Codebook:
    entries: list
    kind: str
    grid: AngularGrid
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def matrix(self) -> np.ndarray:
        """Weights stacked as rows, shape (len, N)."""
        return np.stack([c.weights for c in self.entries])

    def by_index(self, s: int) -> Codeword:
        for c in self.entries:
            if c.index == s and c.range_index in (None, 1):
                return c
        raise KeyError(f"no codeword with grid index {s} in {self.kind} codebook")

    def polar_block(self, s: int) -> list:
        """The V range codewords steered at grid angle ``s``."""
        if self.kind != "polar":
            raise TypeError("polar_block only applies to polar codebooks")
        V = self.params["n_ranges"]
        start = (s - 1) * V
        return self.entries[start:start + V]


def q_count(n_antennas: int, interval: int) -> int:
    return (n_antennas - 1) // interval + 1


def check_interval(n_antennas: int, interval: int) -> int:
    """Validate U against N and return Q."""
    if interval < 1:
        raise ConstraintError(f"activation interval must be >= 1, got {interval}")
    if (n_antennas - 1) % interval:
        raise ConstraintError(
            f"(N-1)/U must be an integer so that Q is an integer: "
            f"({n_antennas}-1)/{interval} = {(n_antennas - 1) / interval:g}"
        )
    if ((n_antennas - 1) // interval) % 2:
        raise ConstraintError(
            f"(N-1)/U must be even so that Q is odd and the sweep window is symmetric: "
            f"({n_antennas}-1)/{interval} = {(n_antennas - 1) // interval}"
        )
    return q_count(n_antennas, interval)


def interval_upper_bound(n_antennas: int) -> float:
    return math.sqrt(1.2 * (n_antennas - 1))


def sampling_vector(n_antennas: int, interval: int) -> np.ndarray:
    """Boolean mask with every U-th antenna (array positions 0, U, ..., N-1) active."""
    if interval < 1 or (n_antennas - 1) % interval:
        raise ConstraintError(
            f"(N-1) must be divisible by U so that Q is an integer; got N={n_antennas}, U={interval}"
        )
    mask = np.zeros(n_antennas, dtype=bool)
    mask[::interval] = True
    return mask


def sweep_indices(n_antennas: int, interval: int) -> np.ndarray:
    """Grid indices of the Q sparse-DFT codewords covering one period around broadside."""
    Q = q_count(n_antennas, interval)
    g0 = math.ceil((Q * interval - Q + 1) / 2)
    return np.arange(g0, g0 + Q)


def _dft_weights(k: np.ndarray, theta: float, n_active: int) -> np.ndarray:
    return np.exp(-1j * np.pi * k * theta) / math.sqrt(n_active)


def dft_codebook(config: SystemConfig, n_points: int | None = None) -> Codebook:
    """Conventional full-array DFT codebook on an ``n_points`` angular grid."""
    N = config.n_antennas
    grid = AngularGrid(n_points or N)
    k = np.arange(N)
    mask = np.ones(N, dtype=bool)
    entries = [
        Codeword(_dft_weights(k, th, N), mask, float(th), None, s)
        for s, th in enumerate(grid.angles, start=1)
    ]
    return Codebook(entries, "dft", grid, {"n_points": grid.n_points})


def sparse_dft_codebook(config: SystemConfig, interval: int) -> Codebook:
    N = config.n_antennas
    Q = check_interval(N, interval)
    if interval > interval_upper_bound(N):
        warnings.warn(
            f"U={interval} exceeds sqrt(1.2(N-1))={interval_upper_bound(N):.3f}; "
            "no central subarray can then resolve the angular ambiguity",
            stacklevel=2,
        )
    grid = AngularGrid(Q * interval)
    mask = sampling_vector(N, interval)
    k = np.flatnonzero(mask)
    entries = []
    for g in sweep_indices(N, interval):
        th = float(grid.angle(g))
        w = np.zeros(N, dtype=complex)
        w[k] = _dft_weights(k, th, Q)
        entries.append(Codeword(w, mask, th, None, int(g)))
    return Codebook(entries, "sparse_dft", grid, {"interval": interval, "q": Q})


def subarray_bounds(n_antennas: int, interval: int) -> tuple:
    """Admissible [lower, upper] for the central subarray size M."""
    return float(interval), interval_upper_bound(n_antennas)


def check_subarray(n_antennas: int, interval: int, m_antennas: int) -> None:
    lo, hi = subarray_bounds(n_antennas, interval)
    if not lo <= m_antennas <= hi:
        raise ConstraintError(
            f"central subarray size M={m_antennas} violates U <= M <= sqrt(1.2(N-1)), "
            f"i.e. {lo:g} <= M <= {hi:.3f}: M >= U keeps the subarray beam narrower than "
            f"the 4/U alias spacing, M <= sqrt(1.2(N-1)) keeps the user in the subarray far field"
        )


def subarray_codebook(
    config: SystemConfig, m_antennas: int, interval: int, enforce: bool = True
) -> Codebook:
    """DFT codebook of the M central antennas on the QU-point grid.

    With ``enforce=False`` the admissibility bounds only warn; used for sweeps
    over M that deliberately leave the admissible range.
    """
    N = config.n_antennas
    Q = check_interval(N, interval)
    if not 1 <= m_antennas <= N:
        raise ConstraintError(f"subarray size must be in [1, {N}], got {m_antennas}")
    try:
        check_subarray(N, interval, m_antennas)
    except ConstraintError as exc:
        if enforce:
            raise
        warnings.warn(str(exc), stacklevel=2)
    grid = AngularGrid(Q * interval)
    lead = (N - m_antennas) // 2
    k = np.arange(lead, lead + m_antennas)
    mask = np.zeros(N, dtype=bool)
    mask[k] = True
    entries = []
    for s, th in enumerate(grid.angles, start=1):
        w = np.zeros(N, dtype=complex)
        w[k] = _dft_weights(k, th, m_antennas)
        entries.append(Codeword(w, mask, float(th), None, s))
    return Codebook(entries, "subarray", grid, {"m_antennas": m_antennas, "interval": interval})


def polar_alpha(config: SystemConfig, beta_delta: float) -> float:
    N, d0 = config.n_antennas, config.antenna_spacing
    return N**2 * d0**2 / (2.0 * config.wavelength * beta_delta**2)


def polar_ranges(config: SystemConfig, theta: float, n_ranges: int, beta_delta: float) -> np.ndarray:
    v = np.arange(1, n_ranges + 1)
    return polar_alpha(config, beta_delta) * (1.0 - theta * theta) / v


def polar_codebook(
    config: SystemConfig,
    n_ranges: int = DEFAULT_N_RANGES,
    beta_delta: float = DEFAULT_BETA_DELTA,
    grid: AngularGrid | None = None,
) -> Codebook:
    """Near-field codewords at (r_{s,v}, theta_s), ordered angle-major."""
    if n_ranges < 1:
        raise ValueError("n_ranges must be >= 1")
    if beta_delta <= 0:
        raise ValueError("beta_delta must be positive")
    grid = grid or AngularGrid(config.n_antennas)
    N = config.n_antennas
    mask = np.ones(N, dtype=bool)
    entries = []
    for s, th in enumerate(grid.angles, start=1):
        for v, r in enumerate(polar_ranges(config, th, n_ranges, beta_delta), start=1):
            w = near_steering(config, UserLocation(float(r), float(th)))
            entries.append(Codeword(w, mask, float(th), float(r), s, v))
    params = {"n_ranges": n_ranges, "beta_delta": beta_delta, "n_points": grid.n_points}
    return Codebook(entries, "polar", grid, params)


# --- text serialization -------------------------------------------------------


def codebook_to_dict(cb: Codebook, config: SystemConfig, inline_weights: bool = False) -> dict:
    out = {
        "kind": cb.kind,
        "config": dataclasses.asdict(config),
        "params": dict(cb.params),
        "n_points": cb.grid.n_points,
        "entries": [],
    }
    for c in cb.entries:
        e = {"index": c.index, "angle": c.steer_angle}
        if c.steer_range is not None:
            e["range"] = c.steer_range
            e["range_index"] = c.range_index
        if inline_weights:
            nz = np.flatnonzero(c.active_mask)
            e["active"] = nz.tolist()
            e["weights"] = [[float(z.real), float(z.imag)] for z in c.weights[nz]]
        out["entries"].append(e)
    return out


def codebook_from_dict(d: dict) -> tuple:
    """Rebuild ``(codebook, config)``; inlined weights override regenerated ones."""
    config = SystemConfig(**d["config"])
    kind, p = d["kind"], d["params"]
    if kind == "dft":
        cb = dft_codebook(config, p["n_points"])
    elif kind == "sparse_dft":
        cb = sparse_dft_codebook(config, p["interval"])
    elif kind == "subarray":
        cb = subarray_codebook(config, p["m_antennas"], p["interval"], enforce=False)
    elif kind == "polar":
        cb = polar_codebook(config, p["n_ranges"], p["beta_delta"], AngularGrid(p["n_points"]))
    else:
        raise ValueError(f"unknown codebook kind {kind!r}")
    if len(cb.entries) != len(d["entries"]):
        raise ValueError("entry count does not match the regenerated codebook")
    for c, e in zip(cb.entries, d["entries"]):
        if c.index != e["index"] or not math.isclose(c.steer_angle, e["angle"], abs_tol=1e-12):
            raise ValueError(f"entry metadata mismatch at index {e['index']}")
        if "weights" in e:
            w = np.zeros(config.n_antennas, dtype=complex)
            w[e["active"]] = [complex(re, im) for re, im in e["weights"]]
            c.weights = w
    return cb, config


def save_codebook(cb: Codebook, config: SystemConfig, path, inline_weights: bool = False) -> None:
    Path(path).write_text(json.dumps(codebook_to_dict(cb, config, inline_weights), indent=1))


def load_codebook(path) -> tuple:
    return codebook_from_dict(json.loads(Path(path).read_text()))
