"""Analytical coverage quantities for the clustered D2D network.

Everything here reduces to Laplace transforms of the aggregate
interference seen by a typical receiver at the origin under Rayleigh
fading. The serving device is a cluster mate, so the serving distance is
Rayleigh with scale sqrt(2)*sigma. Interference splits into an
inter-cluster part (all other clusters, devices active with the ALOHA
probability) and an intra-cluster part (active devices of the local
cluster, with the interferer distances treated as independent
Rayleigh(sqrt(2)*sigma) draws).

Numerical conventions
---------------------
* All integrals use adaptive Gauss-Kronrod quadrature (absolute
  tolerance 1e-9, relative 1e-7) with a subdivision cap that bounds each
  integral to roughly 1e6 evaluations; non-convergence raises
  :class:`~clustercache.errors.NumericFailure` with diagnostics.
* Semi-infinite ranges are mapped through v = c*t/(1-t); ranges with an
  exponentially decaying weight are truncated where the weight falls
  below 1e-18 of its peak.
* The Rice density is evaluated with the exponentially scaled Bessel
  function so large center distances cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.integrate import quad

from .errors import ConfigError, InfeasibleAccessProbability, NumericFailure
from .model import NetworkConfig

__all__ = [
    "LaplaceArg",
    "CoverageResult",
    "serving_distance_pdf",
    "rice_pdf",
    "laplace_inter",
    "laplace_intra",
    "prob_rate_exceeds",
    "d2d_coverage_conditional",
    "bs_coverage",
    "d2d_coverage_single_link",
    "average_rate",
    "optimal_access_probability",
]

ATOL = 1e-9
RTOL = 1e-7
# Subdivision cap: ~200 intervals x 21 Kronrod points x ~200 inner nodes
# keeps a nested integral under ~1e6 evaluations.
_QUAD_LIMIT = 200
# Rayleigh(sqrt(2)*sigma) mass beyond 14*sigma is ~5e-22.
_RAYLEIGH_CUTOFF = 14.0
# Rice(v, sigma) mass outside v +/- 12*sigma is below 1e-30.
_RICE_WINDOW = 12.0


@dataclass(frozen=True)
class LaplaceArg:
    """Laplace-domain argument for the interference transforms.

    ``s`` follows the serving-link convention s = theta * r**alpha / power
    for a serving distance r; ``power`` is the per-interferer transmit
    power. The transforms depend on the product s * power (the SIR
    argument theta * r**alpha), so the receiver power cancels as it must
    for an interference-limited network. A bare float passed to the
    transforms is treated as already power-normalised (power = 1).
    """

    s: float
    power: float = 1.0

    def __post_init__(self):
        if self.s < 0:
            raise ConfigError(f"Laplace argument must be non-negative, got {self.s}")
        if self.power <= 0:
            raise ConfigError(f"power must be positive, got {self.power}")

    @classmethod
    def from_link(cls, theta: float, r: float, alpha: float, power: float) -> "LaplaceArg":
        return cls(s=theta * r**alpha / power, power=power)

    @property
    def sir_argument(self) -> float:
        """The power-free argument theta * r**alpha consumed by the kernels."""
        return self.s * self.power


@dataclass(frozen=True)
class CoverageResult:
    """A coverage probability together with how it was obtained."""

    value: float
    method: str  # "analytic" | "closed-form" | "monte-carlo"
    degenerate: bool = False

    def __post_init__(self):
        v = self.value
        if -1e-9 <= v < 0.0:
            v = 0.0
        elif 1.0 < v <= 1.0 + 1e-9:
            v = 1.0
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"coverage must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)
        if self.method not in ("analytic", "closed-form", "monte-carlo"):
            raise ConfigError(f"unknown coverage method {self.method!r}")


def _sir_argument(s) -> float:
    if isinstance(s, LaplaceArg):
        return s.sir_argument
    s = float(s)
    if s < 0:
        raise ConfigError(f"Laplace argument must be non-negative, got {s}")
    return s


def serving_distance_pdf(r, sigma: float):
    """Density of the serving distance: Rayleigh with scale sqrt(2)*sigma."""
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    r = np.asarray(r, dtype=float)
    out = (r / (2.0 * sigma**2)) * np.exp(-(r**2) / (4.0 * sigma**2))
    return out if out.ndim else float(out)


def rice_pdf(u, v: float, sigma: float):
    """Rice density of the distance from the origin to a point Gaussian
    (std ``sigma``) around a center at distance ``v``.

    Uses the exponentially scaled Bessel I0 so u*v/sigma^2 beyond ~700
    cannot overflow: (u/s^2) exp(-(u-v)^2 / 2s^2) I0e(u v / s^2).
    """
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    if v < 0:
        raise ConfigError("v must be non-negative")
    u = np.asarray(u, dtype=float)
    s2 = sigma**2
    out = (u / s2) * np.exp(-((u - v) ** 2) / (2.0 * s2)) * special.i0e(u * v / s2)
    out = np.where(u < 0, 0.0, out)
    return out if out.ndim else float(out)


@lru_cache(maxsize=32)
def _gl_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _gl_panel(fn, a: float, b: float, n: int) -> float:
    x, w = _gl_nodes(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * float(w @ fn(mid + half * x))


def _phi(s_sir: float, v: float, sigma: float, alpha: float) -> float:
    """E[ s/(s + U^alpha) ] for U ~ Rice(v, sigma), with s = theta*r^alpha.

    The Rice mass lives in a +/- 12 sigma window around v; the kernel
    transitions around u = s**(1/alpha), so the window is split there to
    keep fixed-order panels accurate.
    """
    if s_sir == 0.0:
        return 0.0
    lo = max(0.0, v - _RICE_WINDOW * sigma)
    hi = v + _RICE_WINDOW * sigma
    knee = s_sir ** (1.0 / alpha)
    edges = [lo, hi]
    if lo < knee < hi:
        edges.insert(1, knee)

    def integrand(u):
        return (s_sir / (s_sir + u**alpha)) * rice_pdf(u, v, sigma)

    return sum(
        _gl_panel(integrand, a, b, 96) for a, b in zip(edges[:-1], edges[1:])
    )


def _checked_quad(fn, a, b, *, points=None, what: str, atol=ATOL, rtol=RTOL) -> float:
    res = quad(
        fn, a, b, epsabs=atol, epsrel=rtol, limit=_QUAD_LIMIT, points=points,
        full_output=1,
    )
    val, err = res[0], res[1]
    tol = max(atol, rtol * abs(val))
    if len(res) > 3 and err > 50 * tol:
        raise NumericFailure(
            f"quadrature for {what} did not converge: value={val!r}, "
            f"error estimate={err!r}, tolerance={tol!r}: {res[3]}"
        )
    return val


def laplace_inter(s, cfg: NetworkConfig) -> float:
    """Laplace transform of the inter-cluster interference.

    exp(-2 pi lambda_p Int_0^inf (1 - exp(-p nbar phi(s, v))) v dv) with
    phi the Rice-averaged fading kernel; the outer integral is mapped to
    (0, 1) through v = c*t/(1-t).
    """
    s_sir = _sir_argument(s)
    if s_sir == 0.0:
        return 1.0
    p_active = cfg.access_p * cfg.n_bar
    if p_active == 0.0 or cfg.lambda_p == 0.0:
        return 1.0
    sigma, alpha = cfg.sigma, cfg.alpha
    knee = s_sir ** (1.0 / alpha)
    scale = knee + 13.0 * sigma

    def integrand(t):
        v = scale * t / (1.0 - t)
        jac = scale / (1.0 - t) ** 2
        return -np.expm1(-p_active * _phi(s_sir, v, sigma, alpha)) * v * jac

    breakpoints = sorted(
        {v / (scale + v) for v in (sigma, knee, knee + 13.0 * sigma) if v > 0}
    )
    exponent = _checked_quad(
        integrand, 0.0, 1.0, points=breakpoints, what="inter-cluster Laplace transform"
    )
    return float(np.exp(-2.0 * math.pi * cfg.lambda_p * exponent))


def laplace_intra(s, intensity: float, sigma: float, alpha: float) -> float:
    """Laplace transform of the intra-cluster interference.

    ``intensity`` is the expected number of simultaneously active
    intra-cluster interferers (p*nbar, or p*k conditioned on k devices).
    The interferer distance is Rayleigh(sqrt(2)*sigma).
    """
    s_sir = _sir_argument(s)
    if intensity < 0:
        raise ConfigError("intensity must be non-negative")
    if s_sir == 0.0 or intensity == 0.0:
        return 1.0
    if sigma <= 0 or alpha <= 2:
        raise ConfigError("require sigma > 0 and alpha > 2")
    hi = _RAYLEIGH_CUTOFF * sigma
    knee = min(s_sir ** (1.0 / alpha), hi)

    def integrand(h):
        return (s_sir / (s_sir + h**alpha)) * serving_distance_pdf(h, sigma)

    integral = _checked_quad(
        integrand, 0.0, hi, points=[sigma, knee],
        what="intra-cluster Laplace transform",
    )
    return float(np.exp(-intensity * integral))


def _d2d_coverage(cfg: NetworkConfig, intra_intensity: float, what: str) -> float:
    sigma = cfg.sigma

    def integrand(r):
        arg = LaplaceArg.from_link(cfg.theta, r, cfg.alpha, cfg.p_d)
        return (
            serving_distance_pdf(r, sigma)
            * laplace_inter(arg, cfg)
            * laplace_intra(arg, intra_intensity, sigma, cfg.alpha)
        )

    hi = _RAYLEIGH_CUTOFF * sigma
    value = _checked_quad(
        integrand, 0.0, hi, points=[sigma, 2.0 * sigma, 4.0 * sigma], what=what
    )
    return value


@lru_cache(maxsize=512)
def prob_rate_exceeds(cfg: NetworkConfig, r0_over_w1: float, w1: float) -> CoverageResult:
    """Probability that the D2D link rate exceeds the threshold R0.

    Under fixed-rate transmission the event reduces to an SIR outage
    check, so the result is the serving-distance average of the two
    interference transforms. Requires the ALOHA rate p*W1*log2(1+theta)
    to exceed R0; otherwise the probability is identically zero and an
    :class:`InfeasibleAccessProbability` is raised.
    """
    if r0_over_w1 < 0:
        raise ConfigError("r0_over_w1 must be non-negative")
    if w1 < 0:
        raise ConfigError("w1 must be non-negative")
    spectral_capacity = cfg.access_p * math.log2(1.0 + cfg.theta)
    if not spectral_capacity > r0_over_w1:
        raise InfeasibleAccessProbability(
            f"access_p * log2(1 + theta) = {spectral_capacity:.6g} bits/s/Hz "
            f"does not exceed R0/W1 = {r0_over_w1:.6g} bits/s/Hz"
        )
    value = _d2d_coverage(cfg, cfg.access_p * cfg.n_bar, "P(R1 > R0)")
    return CoverageResult(value=value, method="analytic")


@lru_cache(maxsize=512)
def d2d_coverage_conditional(cfg: NetworkConfig, k: int) -> CoverageResult:
    """D2D coverage probability conditioned on k devices in the cluster.

    The intra-cluster interferers are modelled as a Gaussian field of
    intensity p*k. With access probability zero no transmission occurs at
    all; the interference-free value 1 is returned with the degenerate
    flag set so sweeps stay total.
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if cfg.access_p == 0.0:
        return CoverageResult(value=1.0, method="analytic", degenerate=True)
    value = _d2d_coverage(cfg, cfg.access_p * k, f"D2D coverage | k={k}")
    return CoverageResult(value=value, method="analytic")


@lru_cache(maxsize=512)
def bs_coverage(theta: float, alpha: float) -> CoverageResult:
    """Coverage probability of the nearest-BS downlink under Rayleigh fading.

    Equal to 1 / 2F1(1, -d; 1-d; -theta) with d = 2/alpha; independent of
    the BS density and of all transmit powers (SIR metric). For alpha = 4
    this reduces to 1 / (1 + sqrt(theta) * arctan(sqrt(theta))).
    """
    if theta <= 0:
        raise ConfigError("theta must be positive")
    if alpha <= 2:
        raise ConfigError("alpha must exceed 2")
    delta = 2.0 / alpha
    denom = float(special.hyp2f1(1.0, -delta, 1.0 - delta, -theta))
    if not math.isfinite(denom) or denom < 1.0:
        raise NumericFailure(f"hypergeometric evaluation failed: 2F1 = {denom!r}")
    return CoverageResult(value=1.0 / denom, method="closed-form")


@lru_cache(maxsize=512)
def d2d_coverage_single_link(cfg: NetworkConfig) -> CoverageResult:
    """D2D coverage with exactly one active link per cluster.

    With a single transmitter per cluster the displaced interferer field
    is again Poisson with the parent density, which yields the closed
    form 1 / (4 sigma^2 Z) with
    Z = pi lambda_p theta^(2/alpha) Gamma(1+2/alpha) Gamma(1-2/alpha) + 1/(4 sigma^2).
    """
    delta = 2.0 / cfg.alpha
    z = (
        math.pi
        * cfg.lambda_p
        * cfg.theta**delta
        * special.gamma(1.0 + delta)
        * special.gamma(1.0 - delta)
        + 1.0 / (4.0 * cfg.sigma**2)
    )
    return CoverageResult(value=1.0 / (4.0 * cfg.sigma**2 * z), method="closed-form")


def average_rate(w: float, theta: float, coverage) -> float:
    """Average throughput W * log2(1 + theta) * P_c in bits/s."""
    if w < 0:
        raise ConfigError("bandwidth must be non-negative")
    p_c = coverage.value if isinstance(coverage, CoverageResult) else float(coverage)
    return w * math.log2(1.0 + theta) * p_c


def optimal_access_probability(
    r0_over_w1: float, theta: float, epsilon_rel: float = 1e-6
) -> float:
    """Smallest feasible ALOHA access probability for the rate threshold.

    The offloading problem fixes p just above R0 / (W1 log2(1+theta));
    ``epsilon_rel`` is the relative margin added to stay strictly
    feasible.
    """
    if r0_over_w1 < 0:
        raise ConfigError("r0_over_w1 must be non-negative")
    p_star = r0_over_w1 / math.log2(1.0 + theta) * (1.0 + epsilon_rel)
    if p_star > 1.0:
        raise InfeasibleAccessProbability(
            f"required access probability {p_star:.6g} exceeds 1"
        )
    return p_star
