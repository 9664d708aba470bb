"""Fresnel integrals and the closed-form received beam pattern of a sparse array.

The closed form approximates the discrete sum over the active elements of a
sparse linear array by an integral, which collapses to a difference of Fresnel
integrals. It is used as an analytical cross-check of the exact summation in
:func:`sparsedft.training.beam_pattern`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

# requested quadrature tolerance; realised error stays well under 1e-10
QUAD_ABS_TOL = 1e-12
# below this beta2 the window is vanishingly small and |G| -> 1
BETA2_FLOOR = 1e-6


@dataclass(frozen=True)
class BetaParams:
    """Normalised angle offset (``beta1``) and near-field strength (``beta2``)."""

    beta1: float
    beta2: float


def _check_finite(x: float) -> None:
    if not math.isfinite(x):
        raise ValueError(f"Fresnel integral needs a finite argument, got {x!r}")


def _fresnel_quad(func, x: float, tol: float) -> float:
    if x == 0.0:
        return 0.0
    sign = 1.0 if x > 0 else -1.0
    a = abs(x)
    # roughly one subinterval per half oscillation of t**2/2
    limit = max(200, int(a * a) * 4)
    val, _ = integrate.quad(
        lambda t: func(0.5 * math.pi * t * t), 0.0, a, epsabs=tol, epsrel=0.0, limit=limit
    )
    return sign * val


def fresnel_c(x: float, tol: float = QUAD_ABS_TOL) -> float:
    """C(x) = int_0^x cos(pi t^2 / 2) dt by adaptive quadrature."""
    _check_finite(x)
    return _fresnel_quad(math.cos, float(x), tol)


def fresnel_s(x: float, tol: float = QUAD_ABS_TOL) -> float:
    """S(x) = int_0^x sin(pi t^2 / 2) dt by adaptive quadrature."""
    _check_finite(x)
    return _fresnel_quad(math.sin, float(x), tol)


def beta_params(
    r0: float, theta0: float, delta: float, q_count: int, interval: int, d0: float
) -> BetaParams:
    """Map a user location and steering offset to ``(beta1, beta2)``.

    Args:
        r0: user range in meters.
        theta0: user spatial angle, strictly inside (-1, 1).
        delta: steering angle minus user angle.
        q_count: number of active antennas Q of the sparse array.
        interval: activation interval U.
        d0: antenna spacing in meters.
    """
    if r0 <= 0:
        raise ValueError(f"range must be positive, got {r0}")
    if abs(theta0) >= 1.0:
        raise ValueError(f"spatial angle {theta0} is at endfire; |theta0| < 1 is required")
    g = d0 * (1.0 - theta0 * theta0)
    beta1 = delta * math.sqrt(r0 / g)
    beta2 = 0.5 * q_count * interval * math.sqrt(g / r0)
    return BetaParams(beta1, beta2)


def closed_form_complex(params: BetaParams) -> complex:
    """G(beta1, beta2) before taking the magnitude."""
    b1, b2 = params.beta1, params.beta2
    if b2 <= 0:
        raise ValueError(f"beta2 must be positive, got {b2}")
    if b2 < BETA2_FLOOR:
        return complex(1.0, 0.0)
    c_hat = fresnel_c(b1 + b2) - fresnel_c(b1 - b2)
    s_hat = fresnel_s(b1 + b2) - fresnel_s(b1 - b2)
    return complex(c_hat, s_hat) / (2.0 * b2)


def closed_form_pattern(params: BetaParams) -> float:
    """|G(beta1, beta2)|, the approximate received beam pattern in one period."""
    return abs(closed_form_complex(params))
