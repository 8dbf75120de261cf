"""Domain types, Zipf popularity, and caching schemes.

The network is a Thomas cluster process: cluster centers form a planar
Poisson point process of density ``lambda_p`` and each cluster holds a
Poisson(``n_bar``) number of devices scattered around the center with an
isotropic Gaussian of standard deviation ``sigma``. Devices cache files
from a Zipf-popular catalog under a random caching policy ``b`` where
file ``i`` is held by any given device with probability ``b_i`` and the
per-device cache stores exactly ``M`` files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "NetworkConfig",
    "ContentLibrary",
    "CachingPolicy",
    "CacheRealization",
    "zipf_popularity",
    "sample_cache_realization",
    "baseline_policy",
]

# Tolerances used when validating caching policies.
_BOX_TOL = 1e-12
_BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class NetworkConfig:
    """Physical-layer and geometry parameters.

    Attributes
    ----------
    lambda_p : float
        Cluster-center density in clusters per square meter.
        (20 clusters/km^2 corresponds to 2e-5.)
    n_bar : float
        Mean number of devices per cluster.
    sigma : float
        Gaussian displacement standard deviation in meters.
    alpha : float
        Path-loss exponent; must exceed 2 for the interference
        integrals to converge.
    theta : float
        SIR threshold in linear scale (not dB).
    p_d : float
        D2D transmit power in watts.
    p_b : float
        Base-station transmit power in watts.
    w_total : float
        Total system bandwidth in Hz.
    access_p : float
        Slotted-ALOHA channel access probability.
    """

    lambda_p: float
    n_bar: float
    sigma: float
    alpha: float
    theta: float
    p_d: float
    p_b: float
    w_total: float
    access_p: float

    def __post_init__(self):
        if not self.alpha > 2:
            raise ConfigError(f"alpha must exceed 2, got {self.alpha}")
        if not 0 <= self.access_p <= 1:
            raise ConfigError(f"access_p must lie in [0, 1], got {self.access_p}")
        if not self.theta > 0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not self.lambda_p > 0:
            raise ConfigError(f"lambda_p must be positive, got {self.lambda_p}")
        if not self.n_bar > 0:
            raise ConfigError(f"n_bar must be positive, got {self.n_bar}")
        for name in ("p_d", "p_b", "w_total"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def replace(self, **kwargs) -> "NetworkConfig":
        """Return a copy with the given fields overridden."""
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(kwargs)
        return NetworkConfig(**values)


@dataclass(frozen=True, eq=False)
class ContentLibrary:
    """Content catalog: popularity, per-file sizes, and cache capacity.

    ``popularity`` must be a probability vector sorted in non-increasing
    order (files are indexed by descending popularity). ``sizes`` holds
    per-file sizes in Mbits; energy computations consume the vector and
    delay computations consume its mean.
    """

    n_files: int
    beta: float
    cache_size: int
    popularity: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.asarray(self.popularity, dtype=float)
        s = np.asarray(self.sizes, dtype=float)
        if self.n_files < 1:
            raise ConfigError("n_files must be at least 1")
        if q.shape != (self.n_files,) or s.shape != (self.n_files,):
            raise ConfigError("popularity and sizes must have length n_files")
        if not 0 < self.cache_size < self.n_files:
            raise ConfigError(
                f"cache_size must satisfy 0 < M < N_f, got M={self.cache_size}, "
                f"N_f={self.n_files}"
            )
        if abs(q.sum() - 1.0) > 1e-12:
            raise ConfigError(f"popularity must sum to 1, got {q.sum()!r}")
        if np.any(q < 0):
            raise ConfigError("popularity entries must be non-negative")
        if np.any(np.diff(q) > 1e-15):
            raise ConfigError("popularity must be non-increasing in file index")
        if np.any(s <= 0):
            raise ConfigError("all file sizes must be positive")
        q.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "popularity", q)
        object.__setattr__(self, "sizes", s)

    @classmethod
    def zipf(
        cls,
        n_files: int,
        beta: float,
        cache_size: int,
        mean_size_mbits: float = 5.0,
        sizes=None,
    ) -> "ContentLibrary":
        """Build a library with Zipf popularity and uniform sizes by default."""
        q = zipf_popularity(n_files, beta)
        if sizes is None:
            sizes = np.full(n_files, float(mean_size_mbits))
        return cls(
            n_files=n_files,
            beta=beta,
            cache_size=cache_size,
            popularity=q,
            sizes=np.asarray(sizes, dtype=float),
        )

    @property
    def mean_size_mbits(self) -> float:
        """Mean file size in Mbits."""
        return float(self.sizes.mean())

    @property
    def mean_size_bits(self) -> float:
        return self.mean_size_mbits * 1e6

    def replace(self, **kwargs) -> "ContentLibrary":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(kwargs)
        return ContentLibrary(**values)


@dataclass(frozen=True, eq=False)
class CachingPolicy:
    """Per-file caching probabilities ``b`` with sum equal to the cache size."""

    b: np.ndarray = field(repr=False)
    cache_size: int = 0

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 1 or b.size == 0:
            raise ConfigError("b must be a non-empty 1-D vector")
        if np.any(b < -_BOX_TOL) or np.any(b > 1 + _BOX_TOL):
            raise ConfigError("caching probabilities must lie in [0, 1]")
        b = np.clip(b, 0.0, 1.0)
        if self.cache_size <= 0:
            raise ConfigError("cache_size must be a positive integer")
        if abs(b.sum() - self.cache_size) > _BUDGET_TOL:
            raise ConfigError(
                f"sum(b) = {b.sum()!r} violates the cache budget M = {self.cache_size}"
            )
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def n_files(self) -> int:
        return int(self.b.size)


@dataclass(frozen=True)
class CacheRealization:
    """A concrete cache content: exactly M distinct 1-based file indices."""

    cached: frozenset
    n_files: int

    def __post_init__(self):
        if not all(1 <= i <= self.n_files for i in self.cached):
            raise ConfigError("cached indices must lie in [1, n_files]")


def zipf_popularity(n_files: int, beta: float) -> np.ndarray:
    """Zipf popularity vector: element i proportional to (i+1)^-beta.

    Returns a length-``n_files`` probability vector; uniform when beta = 0.
    """
    if n_files < 1:
        raise ConfigError(f"n_files must be at least 1, got {n_files}")
    if beta < 0:
        raise ConfigError(f"beta must be non-negative, got {beta}")
    ranks = np.arange(1, n_files + 1, dtype=float)
    weights = ranks ** (-beta)
    return weights / weights.sum()


def sample_cache_realization(
    policy: CachingPolicy, uniform_draw: float
) -> CacheRealization:
    """Draw one cache content from the block placement scheme.

    A continuous memory of length M is filled left to right with segments
    of lengths b_1, ..., b_N (wrapping across the M unit blocks), then a
    single cut at offset ``uniform_draw`` selects the file covering
    position ``m + uniform_draw`` in each unit block m. Every file has
    segment length at most one, so the M selected files are distinct, and
    file i is selected with marginal probability exactly b_i.
    """
    if not 0 <= uniform_draw < 1:
        raise ConfigError(f"uniform_draw must lie in [0, 1), got {uniform_draw}")
    m = policy.cache_size
    boundaries = np.cumsum(policy.b)
    cuts = uniform_draw + np.arange(m)
    idx = np.searchsorted(boundaries, cuts, side="right")
    # Guard against float round-off at the final boundary (sum(b) ~ M).
    idx = np.minimum(idx, policy.n_files - 1)
    files = frozenset(int(i) + 1 for i in idx)
    if len(files) != m:
        raise ConfigError(
            "placement produced a duplicate file; policy violates the box "
            "constraints"
        )
    return CacheRealization(cached=files, n_files=policy.n_files)


def _capped_proportional(weights: np.ndarray, budget: int) -> np.ndarray:
    """Allocate ``budget`` over [0,1] boxes proportionally to ``weights``.

    Entries that would exceed one are pinned at one and the surplus is
    redistributed proportionally over the remaining entries, repeating
    until the allocation is feasible.
    """
    n = weights.size
    b = np.zeros(n)
    free = np.ones(n, dtype=bool)
    remaining = float(budget)
    for _ in range(n):
        total = weights[free].sum()
        if total <= 0 or remaining <= 0:
            break
        b[free] = weights[free] * (remaining / total)
        over = free & (b >= 1.0)
        if not over.any():
            break
        b[over] = 1.0
        free &= ~over
        remaining = float(budget - b[~free].sum())
    return np.clip(b, 0.0, 1.0)


def baseline_policy(kind: str, library: ContentLibrary) -> CachingPolicy:
    """Reference caching schemes used as benchmarks.

    ``cpf`` caches the M most popular files deterministically.
    ``zipf-proportional`` sets b_i proportional to popularity, clipping
    at one and redistributing the clipped surplus so that sum(b) = M.
    """
    m = library.cache_size
    if kind == "cpf":
        b = np.zeros(library.n_files)
        b[:m] = 1.0
    elif kind == "zipf-proportional":
        b = _capped_proportional(library.popularity.copy(), m)
        # Redistribution leaves sum(b) = M up to float error; snap it.
        b = _snap_budget(b, m)
    else:
        raise ConfigError(f"unknown baseline kind {kind!r}")
    return CachingPolicy(b=b, cache_size=m)


def _snap_budget(b: np.ndarray, budget: int) -> np.ndarray:
    """Remove float drift in sum(b) by rescaling the interior entries."""
    gap = budget - b.sum()
    if gap == 0:
        return b
    interior = (b > 0) & (b < 1)
    if interior.any():
        b = b.copy()
        b[interior] += gap / interior.sum()
    return np.clip(b, 0.0, 1.0)
