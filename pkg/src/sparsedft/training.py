"""Beam training schemes: the three-phase sparse-DFT method and its benchmarks.

Every scheme talks to the channel only through a :class:`Link`, which counts
pilot symbols, so the reported overhead is the number of measurements actually
taken rather than a formula evaluated on the side.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    Channel,
    SystemConfig,
    UserLocation,
    complex_noise,
    element_ranges,
)
from .codebooks import (
    DEFAULT_BETA_DELTA,
    AngularGrid,
    Codebook,
    Codeword,
    check_interval,
    dft_codebook,
    interval_upper_bound,
    polar_codebook,
    q_count,
    sparse_dft_codebook,
    subarray_codebook,
)


class NoSignalError(RuntimeError):
    pass


class Link:
    """Downlink pilot channel seen by the user. ``rng=None`` gives noiseless pilots."""

    def __init__(self, config: SystemConfig, ch: Channel, rng: np.random.Generator | None):
        self.config = config
        self.ch = ch
        self.rng = rng
        self.pilots = 0

    def observe_many(self, W: np.ndarray) -> np.ndarray:
        """Complex received samples for beamformers stacked as rows of ``W``."""
        W = np.atleast_2d(W)
        if W.shape[1] != self.ch.coeffs.shape[0]:
            raise ValueError(f"beamformers have {W.shape[1]} entries, channel has {self.ch.coeffs.shape[0]}")
        y = math.sqrt(self.config.tx_power) * (W @ np.conj(self.ch.coeffs))
        if self.rng is not None:
            y = y + complex_noise(self.rng, self.config.noise_power, y.shape)
        self.pilots += W.shape[0]
        return y

    def measure_many(self, codewords) -> np.ndarray:
        W = np.stack([c.weights for c in codewords])
        return np.abs(self.observe_many(W)) ** 2

    def measure(self, codeword: Codeword) -> float:
        return float(self.measure_many([codeword])[0])


@dataclass
class PowerProfile:
    powers: np.ndarray
    codeword_indices: np.ndarray
    shifted: bool = False

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=float)
        self.codeword_indices = np.asarray(self.codeword_indices, dtype=int)
        if self.powers.shape != self.codeword_indices.shape:
            raise ValueError("powers and indices must have equal length")
        if np.any(self.powers < 0):
            raise ValueError("powers must be non-negative")


@dataclass
class AngularSupport:
    member_indices: np.ndarray
    left_angle: float
    right_angle: float

    @property
    def width(self) -> float:
        return self.right_angle - self.left_angle

    @property
    def median(self) -> int:
        """Lower median of the member indices."""
        m = np.sort(self.member_indices)
        return int(m[(len(m) - 1) // 2])


@dataclass
class TrainingOutcome:
    est_angle: float | None
    est_range: float | None
    chosen: Codeword
    pilots_used: int
    phase_log: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ThreePhaseParams:
    interval: int = 16
    m_antennas: int = 17
    n_ranges: int = 5
    k_middle: int = 1
    beta_delta: float = DEFAULT_BETA_DELTA
    mu_db: float = 3.0
    enforce_subarray_bounds: bool = True


# --- beam pattern -------------------------------------------------------------


def beam_pattern(config: SystemConfig, loc: UserLocation, theta, interval: int):
    """|b_SLA^H(r0, theta0) a_SLA(theta)| by exact summation over the Q active antennas.

    ``theta`` may be a scalar or an array.
    """
    N = config.n_antennas
    Q = q_count(N, interval)
    n = config.antenna_index()[::interval]
    r = element_ranges(config, loc)[::interval]
    channel_row = np.exp(-2j * np.pi * r / config.wavelength)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    steer = np.exp(-1j * np.pi * np.outer(th, n))
    out = np.abs(steer @ channel_row) / Q
    return out if np.ndim(theta) else float(out[0])


# --- phase building blocks ----------------------------------------------------


def support_threshold(mu_db: float) -> float:
    return 10.0 ** (-mu_db / 10.0)


def angular_support(profile: PowerProfile, grid: AngularGrid, mu_db: float = 3.0) -> AngularSupport:
    """Indices whose power is at least ``10**(-mu/10)`` times the peak.

    The comparison is inclusive so the peak always belongs to the support, even
    when ``kappa * peak`` rounds up to the peak for subnormal powers.
    """
    if profile.powers.size == 0:
        raise ValueError("empty power profile")
    peak = profile.powers.max()
    if peak <= 0:
        raise NoSignalError("all received powers are zero")
    members = profile.codeword_indices[profile.powers >= support_threshold(mu_db) * peak]
    return AngularSupport(
        member_indices=members,
        left_angle=float(grid.angle(members.min())),
        right_angle=float(grid.angle(members.max())),
    )


def shift_profile(profile: PowerProfile) -> PowerProfile:
    """Move the codewords after the weakest one back by one period.

    The result runs from ``ell - Q + 1`` to ``ell`` (``ell`` = index of the
    minimum power; ties go to the lowest index) so that a support straddling
    the window edge becomes contiguous.
    """
    Q = len(profile.powers)
    pos = int(np.argmin(profile.powers))
    order = np.r_[np.arange(pos + 1, Q), np.arange(pos + 1)]
    idx = profile.codeword_indices[order].copy()
    idx[: Q - pos - 1] -= Q
    return PowerProfile(profile.powers[order], idx, shifted=True)


def middle_k(center: int, k: int) -> np.ndarray:
    """K consecutive indices centred on ``center`` (extra one on the right when K is even)."""
    return np.arange(center - (k - 1) // 2, center + k // 2 + 1)


@dataclass
class Phase1Result:
    profile: PowerProfile
    support: AngularSupport
    median_index: int
    candidate_indices: list
    candidate_angles: list


def phase1_sweep(link: Link, cb: Codebook, mu_db: float = 3.0) -> Phase1Result:
    """Sparse-DFT sweep over one period, shift, and list the U alias candidates."""
    if cb.kind != "sparse_dft":
        raise TypeError("phase 1 needs a sparse_dft codebook")
    U = cb.params["interval"]
    Q = cb.params["q"]
    grid = cb.grid
    powers = link.measure_many(cb.entries)
    raw = PowerProfile(powers, [c.index for c in cb.entries])
    prof = shift_profile(raw)
    support = angular_support(prof, grid, mu_db)
    s_med = support.median
    cand_idx = [grid.wrap(s_med + u * Q) for u in range(U)]
    cand_ang = [float(grid.angle(s)) for s in cand_idx]
    return Phase1Result(prof, support, s_med, cand_idx, cand_ang)


def phase2_resolve(link: Link, sub_cb: Codebook, candidate_indices) -> tuple:
    """Probe each alias candidate with the central subarray; return (index, powers)."""
    words = [sub_cb.by_index(s) for s in candidate_indices]
    powers = link.measure_many(words)
    best = int(np.argmax(powers))
    return candidate_indices[best], powers


def phase3_range(link: Link, polar_cb: Codebook, angle_index: int) -> tuple:
    """Sweep the V polar codewords at one grid angle; return (range, codeword, power)."""
    block = polar_cb.polar_block(angle_index)
    powers = link.measure_many(block)
    best = int(np.argmax(powers))
    return block[best].steer_range, block[best], float(powers[best])


# --- schemes ------------------------------------------------------------------


@dataclass
class TrainingBooks:
    sparse: Codebook
    subarray: Codebook
    polar: Codebook
    dft: Codebook


@functools.lru_cache(maxsize=32)
def build_books(config: SystemConfig, params: ThreePhaseParams) -> TrainingBooks:
    """All codebooks a scenario needs, sharing the QU-point angular grid."""
    U = params.interval
    Q = check_interval(config.n_antennas, U)
    grid = AngularGrid(Q * U)
    return TrainingBooks(
        sparse=sparse_dft_codebook(config, U),
        subarray=subarray_codebook(config, params.m_antennas, U, params.enforce_subarray_bounds),
        polar=polar_codebook(config, params.n_ranges, params.beta_delta, grid),
        dft=dft_codebook(config, grid.n_points),
    )


def three_phase_train(
    config: SystemConfig,
    ch: Channel,
    params: ThreePhaseParams,
    rng: np.random.Generator | None,
    books: TrainingBooks | None = None,
) -> TrainingOutcome:
    books = books or build_books(config, params)
    link = Link(config, ch, rng)
    grid = books.sparse.grid

    p1 = phase1_sweep(link, books.sparse, params.mu_db)
    s_star, p2_powers = phase2_resolve(link, books.subarray, p1.candidate_indices)
    alias_shift = s_star - p1.median_index

    best = None
    tried = []
    for s in middle_k(p1.median_index, params.k_middle):
        s_wrapped = grid.wrap(int(s) + alias_shift)
        r, cw, pw = phase3_range(link, books.polar, s_wrapped)
        tried.append((s_wrapped, r, pw))
        if best is None or pw > best[2]:
            best = (s_wrapped, cw, pw)

    s_fin, cw, _ = best
    return TrainingOutcome(
        est_angle=float(grid.angle(s_fin)),
        est_range=cw.steer_range,
        chosen=cw,
        pilots_used=link.pilots,
        phase_log={
            "phase1": {
                "shifted_indices": p1.profile.codeword_indices.tolist(),
                "powers": p1.profile.powers.tolist(),
                "support": p1.support.member_indices.tolist(),
                "median": p1.median_index,
                "candidates": p1.candidate_indices,
            },
            "phase2": {"winner": s_star, "powers": p2_powers.tolist()},
            "phase3": {"tried": tried, "winner": cw.key},
        },
    )


def exhaustive_train(
    config: SystemConfig, ch: Channel, polar_cb: Codebook, rng: np.random.Generator | None
) -> TrainingOutcome:
    link = Link(config, ch, rng)
    powers = link.measure_many(polar_cb.entries)
    best = polar_cb.entries[int(np.argmax(powers))]
    return TrainingOutcome(best.steer_angle, best.steer_range, best, link.pilots,
                           {"winner": best.key})


def two_phase_train(
    config: SystemConfig,
    ch: Channel,
    dft_cb: Codebook,
    polar_cb: Codebook,
    k_candidates: int,
    rng: np.random.Generator | None,
    mu_db: float = 3.0,
) -> TrainingOutcome:
    """Full-grid DFT sweep, middle-K angles of the support, then range sweeps."""
    link = Link(config, ch, rng)
    grid = dft_cb.grid
    powers = link.measure_many(dft_cb.entries)
    prof = PowerProfile(powers, [c.index for c in dft_cb.entries])
    support = angular_support(prof, grid, mu_db)
    best = None
    for s in middle_k(support.median, k_candidates):
        s_wrapped = grid.wrap(int(s))
        _, cw, pw = phase3_range(link, polar_cb, s_wrapped)
        if best is None or pw > best[1]:
            best = (cw, pw)
    cw = best[0]
    return TrainingOutcome(cw.steer_angle, cw.steer_range, cw, link.pilots,
                           {"support": support.member_indices.tolist(), "winner": cw.key})


def far_field_train(
    config: SystemConfig, ch: Channel, dft_cb: Codebook, rng: np.random.Generator | None
) -> TrainingOutcome:
    link = Link(config, ch, rng)
    powers = link.measure_many(dft_cb.entries)
    best = dft_cb.entries[int(np.argmax(powers))]
    return TrainingOutcome(best.steer_angle, None, best, link.pilots, {"winner": best.index})


def ls_pilot_matrix(n_antennas: int) -> np.ndarray:
    """Unitary DFT pilots; row i is the (unit-norm) beamformer of pilot i."""
    k = np.arange(n_antennas)
    return np.exp(-2j * np.pi * np.outer(k, k) / n_antennas) / math.sqrt(n_antennas)


def ls_estimate(
    config: SystemConfig, ch: Channel, rng: np.random.Generator | None
) -> TrainingOutcome:
    """Least-squares channel estimate from N orthogonal pilots, then MRT on the estimate."""
    N = config.n_antennas
    link = Link(config, ch, rng)
    W = ls_pilot_matrix(N)
    y = link.observe_many(W)
    X = math.sqrt(config.tx_power) * W
    gram = X.conj().T @ X
    try:
        g_hat = np.linalg.solve(gram, X.conj().T @ y)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("pilot Gram matrix X^H X is singular") from exc
    h_hat = np.conj(g_hat)
    w = h_hat / np.linalg.norm(h_hat)
    cw = Codeword(w, np.ones(N, dtype=bool), float("nan"))
    return TrainingOutcome(None, None, cw, link.pilots, {"h_est": h_hat})


def perfect_csi(config: SystemConfig, ch: Channel) -> TrainingOutcome:
    """Matched-filter beamformer on the true channel; the rate upper bound."""
    w = ch.coeffs / np.linalg.norm(ch.coeffs)
    cw = Codeword(w, np.ones(config.n_antennas, dtype=bool), ch.truth.spatial_angle, ch.truth.range_m)
    return TrainingOutcome(ch.truth.spatial_angle, ch.truth.range_m, cw, 0)


# --- overhead -----------------------------------------------------------------


def overhead_three_phase(n_antennas: int, interval: int, n_ranges: int, k_middle: int = 1) -> int:
    return (n_antennas - 1) // interval + 1 + interval + k_middle * n_ranges


def overhead_exhaustive(n_antennas: int, interval: int, n_ranges: int) -> int:
    return q_count(n_antennas, interval) * interval * n_ranges


def overhead_two_phase(n_antennas: int, interval: int, n_ranges: int, k_candidates: int = 1) -> int:
    return q_count(n_antennas, interval) * interval + k_candidates * n_ranges


def overhead_far_field(n_antennas: int, interval: int) -> int:
    return q_count(n_antennas, interval) * interval


def overhead_ls(n_antennas: int) -> int:
    return n_antennas


def overhead_objective(n_antennas: int, interval: int, n_ranges: int) -> float:
    """F(U) = (N-1)/U + U + V + 1."""
    return (n_antennas - 1) / interval + interval + n_ranges + 1


def feasible_intervals(n_antennas: int) -> list:
    """Divisors U of N-1 with U <= sqrt(1.2(N-1))."""
    a = n_antennas - 1
    bound = interval_upper_bound(n_antennas)
    return [u for u in range(1, a + 1) if a % u == 0 and u <= bound]


def optimal_interval(n_antennas: int, v_ranges: int) -> int:
    """Feasible U nearest to sqrt(N-1); ties go to the smaller U.

    ``v_ranges`` does not move the optimum (it is a constant in the objective)
    but is kept so callers can report the objective alongside.
    """
    if n_antennas < 2:
        raise ValueError("need at least two antennas")
    feasible = feasible_intervals(n_antennas)
    if not feasible:
        raise ValueError(f"no feasible activation interval for N={n_antennas}")
    target = math.sqrt(n_antennas - 1)
    return min(feasible, key=lambda u: (abs(target - u), u))
