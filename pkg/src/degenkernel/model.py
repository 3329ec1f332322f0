"""Model parameters and closed-form scalar functions.

The operator is ``A = (1 + |x|^alpha) Laplacian - |x|^beta`` on R^N, studied in
the weighted space L^2(mu) with ``dmu = (1 + |x|^alpha)^{-1} dx``.  Everything
here is a pure function of the parameters, evaluated in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class ParameterError(ValueError):
    """Raised when a parameter set violates a standing assumption."""


@dataclass(frozen=True)
class ModelParams:
    """The triple (N, alpha, beta) with its standing assumptions enforced."""

    N: int
    alpha: float
    beta: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ParameterError(f"N must be an integer >= 3 (N > 2 required), got N={self.N}")
        if not self.alpha > 2:
            raise ParameterError(f"alpha must satisfy alpha > 2, got alpha={self.alpha}")
        if not self.beta > self.alpha - 2:
            raise ParameterError(
                f"beta must satisfy beta > alpha - 2 (standing assumption 'β>α−2'), "
                f"got beta={self.beta}, alpha-2={self.alpha - 2}"
            )
        object.__setattr__(self, "N", int(self.N))

    def diffusion(self, r):
        """a(r) = 1 + r^alpha."""
        return 1.0 + np.power(r, self.alpha)

    def potential(self, r):
        """V(r) = r^beta."""
        return np.power(r, self.beta)

    def as_dict(self):
        return {"N": self.N, "alpha": float(self.alpha), "beta": float(self.beta)}


@dataclass(frozen=True)
class WeightedMeasure:
    """Radial description of dmu: density (1 + r^alpha)^{-1} times r^{N-1}."""

    params: ModelParams

    def density(self, r):
        return 1.0 / self.params.diffusion(r)

    def volume_factor(self, r):
        return np.power(r, self.params.N - 1)

    def radial_weight(self, r):
        """Full radial weight of dmu: r^{N-1} / (1 + r^alpha)."""
        return self.volume_factor(r) * self.density(r)


def sphere_area(N):
    """Surface area of the unit sphere S^{N-1} in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True)
class ThetaWeight:
    """The weight ``phi_theta = (1 + r^alpha)^e`` attached to a time exponent theta.

    ``e = (2 - theta)/4 + (theta - N)/(2 alpha)`` and ``gamma = alpha * e``.
    """

    theta: float
    params: ModelParams
    gamma: float = field(init=False)
    exponent: float = field(init=False)

    def __post_init__(self):
        p = self.params
        if not self.theta >= p.N:
            raise ParameterError(f"theta below N: theta={self.theta}, N={p.N}")
        e = (2.0 - self.theta) / 4.0 + (self.theta - p.N) / (2.0 * p.alpha)
        gamma = p.alpha * e
        if not gamma < (p.alpha - p.N) / 2.0:
            raise ParameterError(f"gamma={gamma} violates gamma < (alpha - N)/2")
        if not 2.0 * gamma - p.alpha < -p.N:
            raise ParameterError(f"gamma={gamma} violates 2 gamma - alpha < -N (phi not in L2_mu)")
        object.__setattr__(self, "exponent", e)
        object.__setattr__(self, "gamma", gamma)


def phi_theta(tw: ThetaWeight, r):
    """Evaluate the Lyapunov weight (1 + r^alpha)^e."""
    return np.power(tw.params.diffusion(r), tw.exponent)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("time must be positive")
    return t


def rate_psi(theta, t):
    """Nash rate function psi(t) = t^{1 + 2/theta}."""
    t = _check_time(t)
    return np.power(t, 1.0 + 2.0 / theta)


def nash_U(theta, t):
    """U(t) = int_t^inf du / psi(u) = (theta/2) t^{-2/theta}."""
    t = _check_time(t)
    return 0.5 * theta * np.power(t, -2.0 / theta)


def nash_U_inverse(theta, s):
    """Inverse of :func:`nash_U`: (theta / (2 s))^{theta/2}."""
    s = _check_time(s)
    return np.power(theta / (2.0 * s), theta / 2.0)


def ultracontractivity_K(theta, t):
    """K(t) = sqrt(U^{-1}(t)) = (theta / (2t))^{theta/4}."""
    return np.sqrt(nash_U_inverse(theta, t))


def kernel_prefactor(theta, t):
    """K(2t)^2 = (theta / (4t))^{theta/2}, the pointwise kernel prefactor."""
    t = _check_time(t)
    return np.power(theta / (4.0 * t), theta / 2.0)


def lyapunov_drift(params: ModelParams, gamma, r):
    """Drift ratio A phi / phi for ``phi = (1 + r^alpha)^{gamma/alpha}``.

    The value at r = 0 is the limit 0.
    """
    r = np.asarray(r, dtype=float)
    a, b, n = params.alpha, params.beta, params.N
    ra = np.power(r, a)
    bracket = gamma * (gamma - a) * ra / (1.0 + ra) + gamma * (a - 2.0 + n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(r, a - 2.0) * bracket - np.power(r, b)
    return np.where(r == 0, 0.0, out)


def lyapunov_drift_derivative(params: ModelParams, gamma, r):
    """d/dr of :func:`lyapunov_drift`, for r > 0."""
    r = np.asarray(r, dtype=float)
    a, b, n = params.alpha, params.beta, params.N
    ra = np.power(r, a)
    c1 = gamma * (gamma - a)
    c2 = gamma * (a - 2.0 + n)
    # d/dr [r^{a-2} (c1 q + c2)] with q = r^a/(1+r^a), dq/dr = a r^{a-1}/(1+r^a)^2
    q = ra / (1.0 + ra)
    dq = a * np.power(r, a - 1.0) / (1.0 + ra) ** 2
    return ((a - 2.0) * np.power(r, a - 3.0) * (c1 * q + c2)
            + np.power(r, a - 2.0) * c1 * dq
            - b * np.power(r, b - 1.0))


def b_exponent(params: ModelParams):
    """Time exponent (beta - alpha + 2)/(beta + alpha - 2) of the long-time bound."""
    return (params.beta - params.alpha + 2.0) / (params.beta + params.alpha - 2.0)


class QuadratureError(RuntimeError):
    pass


def groundstate_exponent_integral(params: ModelParams, r, rtol=1e-8):
    """int_1^r s^{beta/2} (1 + s^alpha)^{-1/2} ds by adaptive Gauss-Kronrod."""
    if r < 1:
        raise ValueError("the ground-state profile is defined for r >= 1")
    return 0.0 if r == 1 else _segment(params, 1.0, float(r), rtol)


def groundstate_asymptotic(params: ModelParams, r, rtol=1e-8):
    """Profile r^{-(N-1)/2 - (beta-alpha)/4} exp(-int_1^r s^{beta/2}/sqrt(1+s^alpha) ds).

    Accepts a scalar or an array of radii >= 1.
    """
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rr < 1):
        raise ValueError("the ground-state profile is defined for r >= 1")
    # accumulate the integral piecewise along sorted radii
    order = np.argsort(rr)
    integral = np.empty_like(rr)
    acc, prev = 0.0, 1.0
    for idx in order:
        ri = rr[idx]
        if ri > prev:
            acc += _segment(params, prev, ri, rtol)
            prev = ri
        integral[idx] = acc
    power = -(params.N - 1) / 2.0 - (params.beta - params.alpha) / 4.0
    out = np.power(rr, power) * np.exp(-integral)
    return out[0] if np.ndim(r) == 0 else out


def _segment(params, lo, hi, rtol):
    def f(s):
        return s ** (params.beta / 2.0) / math.sqrt(1.0 + s ** params.alpha)

    val, err, info, *msg = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol,
                                          limit=200, full_output=1)
    if msg or not np.isfinite(val):
        raise QuadratureError(f"quadrature did not converge on [{lo}, {hi}]: {msg[0] if msg else val}")
    return val


def suggest_r_max(params: ModelParams, level=1e-10, start=2.0):
    """Smallest radius (in steps of 0.5) where the ground-state profile is below ``level``."""
    r = start
    while groundstate_asymptotic(params, r) >= level:
        r += 0.5
        if r > 1e4:
            raise QuadratureError("profile does not decay below the requested level")
    return r
