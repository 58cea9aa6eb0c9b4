"""Reproducible random streams and the error/instrument generators of the simulation kit.

Every stream is a counter-based Philox generator keyed by the pair
``(master_seed, stream_id)`` through ``numpy.random.SeedSequence``; a task
that owns stream ``k`` draws the same numbers no matter which worker runs it
or in which order tasks complete.
"""
from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize

from .dist import check_cov
from .errors import DomainError

LOGGER = logging.getLogger(__name__)

SKEWNESS_MAX = 0.5 * (4.0 - math.pi) * (2.0 / (math.pi - 2.0)) ** 1.5


def stream(seed: int, stream_id: int | Sequence[int] = 0) -> np.random.Generator:
    """Return the generator for ``stream_id`` under the master ``seed``."""

    if int(seed) < 0:
        raise DomainError("seed must be a non-negative integer")
    spawn_key = tuple(int(s) for s in np.atleast_1d(stream_id))
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *stream_id: int) -> int:
    """A 63-bit integer seed derived from ``(seed, stream_id...)``."""

    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream_id))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def normal(rng: np.random.Generator, size, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    return rng.normal(mu, sigma, size)


def bivariate_normal(rng: np.random.Generator, cov, size: int) -> np.ndarray:
    """``size x 2`` draws from ``N(0, cov)``."""

    mat = check_cov(cov)
    chol = np.linalg.cholesky(mat)
    return rng.standard_normal((size, mat.shape[0])) @ chol.T


def multivariate_normal(rng: np.random.Generator, cov, size: int) -> np.ndarray:
    return bivariate_normal(rng, cov, size)


def logistic(rng: np.random.Generator, size, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
    return rng.logistic(loc, scale, size)


def gumbel(rng: np.random.Generator, size, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Maximum-type Gumbel draws (cdf ``exp(-exp(-(x - loc) / scale))``)."""

    return rng.gumbel(loc, scale, size)


def uniform(rng: np.random.Generator, size, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    if not high > low:
        raise DomainError("uniform requires high > low")
    return rng.uniform(low, high, size)


def skew_normal_delta(skewness: float) -> float:
    """Shape ``delta`` of ``delta*|U0| + sqrt(1 - delta**2)*U1`` with the given marginal skewness."""

    if not 0.0 <= skewness < SKEWNESS_MAX:
        raise DomainError(f"skewness must lie in [0, {SKEWNESS_MAX:.4f})")
    if skewness == 0.0:
        return 0.0

    def excess(delta: float) -> float:
        mu = delta * math.sqrt(2.0 / math.pi)
        return 0.5 * (4.0 - math.pi) * mu**3 / (1.0 - mu * mu) ** 1.5 - skewness

    return float(optimize.brentq(excess, 1e-9, 1.0 - 1e-12, xtol=1e-14))


def _half_normal_cov(c: float) -> float:
    """Covariance of ``|G1|`` and ``|G2|`` for standard normals with correlation ``c``."""

    return 2.0 / math.pi * (math.sqrt(1.0 - c * c) + c * math.asin(c) - 1.0)


@lru_cache(maxsize=64)
def _latent_corr(delta: float, rho: float) -> float:
    var = 1.0 - 2.0 * delta * delta / math.pi

    def excess(c: float) -> float:
        cov = delta * delta * _half_normal_cov(c) + (1.0 - delta * delta) * c
        return cov / var - rho

    # |G1| and |G2| are never negatively correlated, so strongly skewed
    # margins cannot reach every negative correlation.
    lo, hi = (0.0, 1.0 - 1e-12) if rho >= 0 else (-1.0 + 1e-12, 0.0)
    try:
        return float(optimize.brentq(excess, lo, hi, xtol=1e-13))
    except ValueError as exc:
        raise DomainError(
            f"correlation {rho} is not attainable with skew-normal margins (delta={delta:.4f})"
        ) from exc


def skew_normal(
    rng: np.random.Generator,
    cov,
    size: int,
    skewness: float = 0.92,
) -> np.ndarray:
    """Bivariate errors with skew-normal marginals, mean zero and covariance ``cov``.

    Each margin is ``delta*|G_j| + sqrt(1 - delta**2)*U_j``, centred and scaled.
    The latent pairs ``(G_1, G_2)`` and ``(U_1, U_2)`` share a correlation chosen
    so the standardised margins have the correlation implied by ``cov``.
    """

    mat = check_cov(cov)
    if mat.shape != (2, 2):
        raise DomainError("skew_normal generates bivariate errors")
    sd = np.sqrt(np.diag(mat))
    rho = mat[0, 1] / (sd[0] * sd[1])
    delta = skew_normal_delta(skewness)
    c = _latent_corr(delta, rho)
    latent = np.array([[1.0, c], [c, 1.0]])
    g = bivariate_normal(rng, latent, size)
    u = bivariate_normal(rng, latent, size)
    z = delta * np.abs(g) + math.sqrt(1.0 - delta * delta) * u
    mean = delta * math.sqrt(2.0 / math.pi)
    scale = math.sqrt(1.0 - 2.0 * delta * delta / math.pi)
    return (z - mean) / scale * sd


def bivariate_t(rng: np.random.Generator, cov, size: int, df: float = 3.0) -> np.ndarray:
    """Multivariate t draws rescaled so that their covariance equals ``cov``."""

    if df <= 2.0:
        raise DomainError("df must exceed 2 for a finite covariance")
    normals = bivariate_normal(rng, cov, size)
    chi2 = rng.chisquare(df, size)
    return normals / np.sqrt(chi2 / df)[:, None] * math.sqrt((df - 2.0) / df)


__all__ = [
    "SKEWNESS_MAX",
    "bivariate_normal",
    "bivariate_t",
    "derive_seed",
    "gumbel",
    "logistic",
    "multivariate_normal",
    "normal",
    "skew_normal",
    "skew_normal_delta",
    "stream",
    "uniform",
]
