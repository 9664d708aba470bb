"""Array geometry, steering vectors and the Rician near-field channel.

Conventions used throughout the package:

* Antennas sit at ``n * d0`` for centered indices ``n = -(N-1)/2 .. (N-1)/2``.
  Array position ``k = n + (N-1)/2`` (0-based) is used for codeword weights.
* :func:`near_steering` returns the *beamforming-domain* steering vector
  ``b(r, theta)``; its conjugate is the channel row ``b^H`` whose entries are
  ``exp(-j 2 pi r_n / lambda) / sqrt(N)``.
* ``Channel.coeffs`` holds ``h`` such that the noiseless received sample for a
  beamformer ``w`` is ``h^H w`` (``np.vdot(h, w)``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

# Rounded value: gives d0 = 5 mm exactly at 30 GHz, matching the reference setup.
SPEED_OF_LIGHT = 3.0e8


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Global link parameters. Powers are linear (watts); gains are given in dB.

    ``nlos_normalization`` selects how the Rician factor is applied to the NLoS
    paths: ``"aggregate"`` makes the total NLoS power ``1/kappa`` of the LoS
    power, ``"per_path"`` gives each path that ratio.
    """

    n_antennas: int = 257
    carrier_freq: float = 30e9
    tx_power: float = 1.0
    noise_power: float = 1e-11
    ref_gain_db: float = -62.0
    rician_factor_db: float = 30.0
    n_nlos_paths: int = 2
    nlos_normalization: str = "aggregate"

    def __post_init__(self):
        if self.n_antennas < 1 or self.n_antennas % 2 == 0:
            raise ValueError(f"n_antennas must be a positive odd integer, got {self.n_antennas}")
        if self.carrier_freq <= 0:
            raise ValueError("carrier_freq must be positive")
        if self.tx_power <= 0 or self.noise_power <= 0:
            raise ValueError("tx_power and noise_power must be positive")
        if self.n_nlos_paths < 0:
            raise ValueError("n_nlos_paths must be >= 0")
        if self.nlos_normalization not in ("aggregate", "per_path"):
            raise ValueError(f"unknown nlos_normalization {self.nlos_normalization!r}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def antenna_spacing(self) -> float:
        return self.wavelength / 2.0

    @property
    def aperture(self) -> float:
        return (self.n_antennas - 1) * self.antenna_spacing

    @property
    def ref_gain(self) -> float:
        return db_to_lin(self.ref_gain_db)

    @property
    def rician_factor(self) -> float:
        return db_to_lin(self.rician_factor_db)

    def antenna_index(self) -> np.ndarray:
        half = (self.n_antennas - 1) // 2
        return np.arange(-half, half + 1)


@dataclass(frozen=True)
class UserLocation:
    range_m: float
    spatial_angle: float

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError(f"user range must be positive, got {self.range_m}")
        if not -1.0 < self.spatial_angle < 1.0:
            raise ValueError(f"spatial angle must lie in (-1, 1), got {self.spatial_angle}")

    def check_near_field(self, config: SystemConfig) -> bool:
        """Warn (not raise) when the user is outside the Fresnel near-field band."""
        lo, hi = fresnel_distance(config), rayleigh_distance(config)
        inside = lo <= self.range_m <= hi
        if not inside:
            warnings.warn(
                f"user range {self.range_m:.3f} m outside Fresnel region [{lo:.3f}, {hi:.3f}] m",
                stacklevel=2,
            )
        return inside


@dataclass
class Channel:
    coeffs: np.ndarray
    los_component: np.ndarray
    # ground truth, only for scoring
    truth: UserLocation
    nlos_locations: list = field(default_factory=list)


def rayleigh_distance(config: SystemConfig) -> float:
    return 2.0 * config.aperture**2 / config.wavelength


def fresnel_distance(config: SystemConfig) -> float:
    return 1.2 * config.aperture


def element_ranges(config: SystemConfig, loc: UserLocation, mode: str = "exact") -> np.ndarray:
    n = config.antenna_index().astype(float)
    d0 = config.antenna_spacing
    r0, th = loc.range_m, loc.spatial_angle
    if mode == "exact":
        return np.sqrt(r0 * r0 + (n * d0) ** 2 - 2.0 * r0 * th * n * d0)
    if mode == "fresnel":
        return r0 - n * d0 * th + (n * d0) ** 2 * (1.0 - th * th) / (2.0 * r0)
    raise ValueError(f"unknown steering mode {mode!r}")


def near_steering(config: SystemConfig, loc: UserLocation, mode: str = "exact") -> np.ndarray:
    """Unit-norm near-field steering vector b(r0, theta0).

    ``mode="fresnel"`` uses the second-order expansion of the element ranges.
    """
    r = element_ranges(config, loc, mode)
    return np.exp(2j * np.pi * r / config.wavelength) / math.sqrt(config.n_antennas)


def far_steering(config: SystemConfig, theta: float) -> np.ndarray:
    if abs(theta) > 1.0:
        raise ValueError(f"|theta| must be <= 1, got {theta}")
    k = np.arange(config.n_antennas)
    return np.exp(-1j * np.pi * k * theta) / math.sqrt(config.n_antennas)


def rician_los_gain(config: SystemConfig, loc: UserLocation) -> complex:
    kappa = config.rician_factor
    amp = math.sqrt(kappa / (kappa + 1.0)) * math.sqrt(config.ref_gain) / loc.range_m
    return amp * np.exp(-2j * np.pi * loc.range_m / config.wavelength)


def _nlos_gain_scale(config: SystemConfig, loc: UserLocation) -> float:
    kappa = config.rician_factor
    base = math.sqrt(config.ref_gain / (kappa + 1.0)) / loc.range_m
    if config.nlos_normalization == "per_path":
        return base * math.sqrt(config.n_nlos_paths)
    return base


def make_channel(
    config: SystemConfig, loc: UserLocation, rng: np.random.Generator
) -> Channel:
    """Draw one channel realisation: LoS path plus ``L`` random NLoS paths.

    NLoS angles are uniform on (-1, 1), ranges uniform on [Z_F, Z_R], and the
    complex path gains are CN(0, 1) scaled by the Rician normalisation.
    """
    n = config.n_antennas
    beta = rician_los_gain(config, loc)
    los = math.sqrt(n) * np.conj(beta) * near_steering(config, loc)
    coeffs = los.copy()
    paths = []
    L = config.n_nlos_paths
    if L > 0:
        scale = _nlos_gain_scale(config, loc)
        zf, zr = fresnel_distance(config), rayleigh_distance(config)
        angles = rng.uniform(-1.0, 1.0, size=L)
        ranges = rng.uniform(zf, zr, size=L)
        gains = scale * (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / math.sqrt(2.0)
        for th, rr, g in zip(angles, ranges, gains):
            # rng.uniform can return exactly -1.0
            th = float(np.clip(th, -1.0 + 1e-12, 1.0 - 1e-12))
            path_loc = UserLocation(float(rr), th)
            coeffs = coeffs + math.sqrt(n / L) * np.conj(g) * near_steering(config, path_loc)
            paths.append(path_loc)
    return Channel(coeffs=coeffs, los_component=los, truth=loc, nlos_locations=paths)


def noiseless_sample(ch: Channel, w: np.ndarray, config: SystemConfig) -> complex:
    w = np.asarray(w)
    if w.shape != ch.coeffs.shape:
        raise ValueError(f"beamformer has shape {w.shape}, channel has {ch.coeffs.shape}")
    return math.sqrt(config.tx_power) * np.vdot(ch.coeffs, w)


def complex_noise(rng: np.random.Generator, variance: float, size=None):
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return math.sqrt(variance / 2.0) * (re + 1j * im)


def received_power(
    ch: Channel, w: np.ndarray, config: SystemConfig, rng: np.random.Generator | None
) -> float:
    """|sqrt(P) h^H w x + z|^2 for a unit pilot symbol; ``rng=None`` means noiseless."""
    y = noiseless_sample(ch, w, config)
    if rng is not None:
        y = y + complex_noise(rng, config.noise_power)
    return float(abs(y) ** 2)


def achievable_rate(ch: Channel, w: np.ndarray, config: SystemConfig) -> float:
    snr = abs(noiseless_sample(ch, w, config)) ** 2 / config.noise_power
    return float(np.log2(1.0 + snr))


def reference_snr(config: SystemConfig, loc: UserLocation) -> float:
    """Reference SNR N P beta0 / (r0^2 sigma^2) in dB."""
    lin = (
        config.n_antennas * config.tx_power * config.ref_gain
        / (loc.range_m**2 * config.noise_power)
    )
    return 10.0 * math.log10(lin)


def tx_power_for_snr(config: SystemConfig, range_m: float, snr_db: float) -> float:
    """Transmit power that yields the requested reference SNR at ``range_m``."""
    return db_to_lin(snr_db) * range_m**2 * config.noise_power / (
        config.n_antennas * config.ref_gain
    )
