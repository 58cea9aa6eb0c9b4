"""Gaussian distribution kernels used by the likelihoods and the test statistic.

The bivariate normal upper-orthant probability follows Genz's BVNU routine
(Drezner-Wesolowsky reduction with 6/12/20-point Gauss-Legendre rules), which
is accurate to about 1e-15. The trivariate case integrates the conditional
bivariate tail over the first coordinate with an adaptive vector quadrature,
so that a whole batch of records shares one subdivision.
"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError, UnsupportedDimensionError

LOGGER = logging.getLogger(__name__)

RHO_MAX = 1.0 - 1e-9
_TWOPI = 2.0 * math.pi
_LOG_SQRT_2PI = 0.5 * math.log(_TWOPI)

# Half Gauss-Legendre abscissae/weights on [-1, 0) for 6, 12 and 20 point rules.
_GL_X = (
    np.array([-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]),
    np.array([
        -0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
        -0.5873179542866171, -0.3678314989981802, -0.1252334085114692,
    ]),
    np.array([
        -0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
        -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
        -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
        -0.07652652113349733,
    ]),
)
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([
        0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
        0.2031674267230659, 0.2334925365383547, 0.2491470458134029,
    ]),
    np.array([
        0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
        0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
        0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
        0.1527533871307259,
    ]),
)


def norm_pdf(x):
    """Standard normal density."""

    return np.exp(norm_logpdf(x))


def norm_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - _LOG_SQRT_2PI


def norm_cdf(x):
    """Standard normal distribution function."""

    return special.ndtr(x)


def norm_sf(x):
    """Upper tail ``1 - Phi(x)`` computed without cancellation."""

    return special.ndtr(-np.asarray(x, dtype=float))


def norm_logsf(x):
    return special.log_ndtr(-np.asarray(x, dtype=float))


def norm_quantile(p):
    """Inverse of :func:`norm_cdf` on the open unit interval."""

    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("norm_quantile requires p in the open interval (0, 1)")
    return special.ndtri(arr)


def check_corr(rho: float) -> float:
    """Validate a correlation and clamp it to ``[-RHO_MAX, RHO_MAX]``."""

    value = float(rho)
    if not math.isfinite(value) or abs(value) >= 1.0:
        raise DomainError(f"correlation must satisfy |rho| < 1, got {rho!r}")
    return max(-RHO_MAX, min(RHO_MAX, value))


def _bvnu(h: np.ndarray, k: np.ndarray, r: float) -> np.ndarray:
    """P(X > h, Y > k) for a standard bivariate normal with correlation ``r``."""

    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    h_fin = np.where(np.isfinite(h), h, 0.0)
    k_fin = np.where(np.isfinite(k), k, 0.0)

    if abs(r) < 0.3:
        ng = 0
    elif abs(r) < 0.75:
        ng = 1
    else:
        ng = 2
    xg, wg = _GL_X[ng], _GL_W[ng]

    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        hh = h_fin[..., None]
        kk = k_fin[..., None]
        hk = hh * kk
        if abs(r) < 0.925:
            hs = (hh * hh + kk * kk) / 2.0
            asr = math.asin(r)
            sn1 = np.sin(asr * (xg + 1.0) / 2.0)
            sn2 = np.sin(asr * (-xg + 1.0) / 2.0)
            bvn = np.sum(
                wg * (np.exp((sn1 * hk - hs) / (1.0 - sn1 * sn1))
                      + np.exp((sn2 * hk - hs) / (1.0 - sn2 * sn2))),
                axis=-1,
            )
            bvn = bvn * asr / (2.0 * _TWOPI) + norm_cdf(-h_fin) * norm_cdf(-k_fin)
        else:
            if r < 0:
                kk = -kk
                hk = -hk
            k_use = kk[..., 0]
            hk0 = hk[..., 0]
            bvn = np.zeros_like(h_fin)
            if abs(r) < 1.0:
                as_ = (1.0 - r) * (1.0 + r)
                a = math.sqrt(as_)
                bs = (h_fin - k_use) ** 2
                c = (4.0 - hk0) / 8.0
                d = (12.0 - hk0) / 16.0
                bvn = a * np.exp(-(bs / as_ + hk0) / 2.0) * (
                    1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
                )
                hk_safe = np.maximum(hk0, -160.0)
                b = np.sqrt(bs)
                tail = (
                    np.exp(-hk_safe / 2.0) * math.sqrt(_TWOPI) * norm_cdf(-b / a) * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
                )
                bvn = bvn - np.where(hk0 > -160.0, tail, 0.0)
                a2 = a / 2.0
                bs_ = bs[..., None]
                hk_ = hk0[..., None]
                c_ = c[..., None]
                d_ = d[..., None]
                xs = (a2 * (xg + 1.0)) ** 2
                rs = np.sqrt(1.0 - xs)
                part1 = a2 * wg * (
                    np.exp(-bs_ / (2.0 * xs) - hk_ / (1.0 + rs)) / rs
                    - np.exp(-(bs_ / xs + hk_) / 2.0) * (1.0 + c_ * xs * (1.0 + d_ * xs))
                )
                xs = as_ * (-xg + 1.0) ** 2 / 4.0
                rs = np.sqrt(1.0 - xs)
                part2 = a2 * wg * np.exp(-(bs_ / xs + hk_) / 2.0) * (
                    np.exp(-hk_ * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                    - (1.0 + c_ * xs * (1.0 + d_ * xs))
                )
                bvn = bvn + np.sum(part1 + part2, axis=-1)
                bvn = -bvn / _TWOPI
            if r > 0:
                bvn = bvn + norm_cdf(-np.maximum(h_fin, k_use))
            else:
                bvn = -bvn + np.maximum(0.0, norm_cdf(-h_fin) - norm_cdf(-k_use))

    # infinite limits
    out = np.clip(bvn, 0.0, 1.0)
    out = np.where(np.isneginf(h), norm_cdf(-k_fin), out)
    out = np.where(np.isneginf(k), norm_cdf(-h_fin), out)
    out = np.where(np.isneginf(h) & np.isneginf(k), 1.0, out)
    out = np.where(np.isposinf(h) | np.isposinf(k), 0.0, out)
    return out


def _restore(out: np.ndarray, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(out)
    return out


def bvn_tail(a, b, rho: float):
    """Upper orthant probability ``P(U > a, V > b)`` of a standard bivariate normal."""

    r = check_corr(rho)
    if np.any(np.isnan(np.asarray(a, dtype=float))) or np.any(np.isnan(np.asarray(b, dtype=float))):
        raise DomainError("bvn_tail arguments must not be NaN")
    return _restore(_bvnu(a, b, r), a, b)


def bvn_cdf(a, b, rho: float):
    """Distribution function ``P(U <= a, V <= b)``."""

    r = check_corr(rho)
    return _restore(_bvnu(-np.asarray(a, dtype=float), -np.asarray(b, dtype=float), r), a, b)


def partial_corr(rho_1j: float, rho_1q: float, rho_jq: float) -> float:
    """Correlation of components j and q conditional on component 1."""

    corr = np.array([
        [1.0, rho_1j, rho_1q],
        [rho_1j, 1.0, rho_jq],
        [rho_1q, rho_jq, 1.0],
    ])
    try:
        np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise DomainError("implied correlation matrix is not positive definite") from exc
    return float((rho_jq - rho_1j * rho_1q) / math.sqrt((1.0 - rho_1j**2) * (1.0 - rho_1q**2)))


def check_cov(cov) -> np.ndarray:
    """Validate a covariance matrix (symmetric, positive definite)."""

    mat = np.atleast_2d(np.asarray(cov, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise DomainError("covariance matrix must be square")
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12):
        raise DomainError("covariance matrix must be symmetric")
    if np.any(np.diag(mat) <= 0.0):
        raise DomainError("covariance matrix must have a positive diagonal")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise DomainError("covariance matrix is not positive definite") from exc
    return mat


def cov_to_corr(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sd = np.sqrt(np.diag(cov))
    return sd, cov / np.outer(sd, sd)


def _trivariate_tail(z: np.ndarray, corr: np.ndarray, epsabs: float) -> np.ndarray:
    r12, r13, r23 = corr[0, 1], corr[0, 2], corr[1, 2]
    s2 = math.sqrt(1.0 - r12 * r12)
    s3 = math.sqrt(1.0 - r13 * r13)
    r23_1 = check_corr(partial_corr(r12, r13, r23))
    q1 = norm_sf(z[:, 0])

    def integrand(u: float) -> np.ndarray:
        # X1 = -Phi^{-1}(q1 * u) runs over X1 > z1 as u runs over (0, 1)
        p = np.maximum(q1 * u, 1e-300)
        x1 = -special.ndtri(p)
        return _bvnu((z[:, 1] - r12 * x1) / s2, (z[:, 2] - r13 * x1) / s3, r23_1)

    value, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=0.0, norm="max")
    LOGGER.debug("trivariate tail quadrature error estimate %.3g", err)
    return np.clip(q1 * value, 0.0, 1.0)


def mvn_tail(lower, cov, *, epsabs: float = 1e-11) -> np.ndarray | float:
    """``P(eps_j > lower_j for all j)`` for ``eps ~ N(0, cov)``, dimension at most 3.

    ``lower`` is a vector of length ``d`` or an ``(n, d)`` batch; the result
    is a float or a length-``n`` array respectively.
    """

    mat = check_cov(cov)
    dim = mat.shape[0]
    if dim > 3:
        raise UnsupportedDimensionError(f"mvn_tail supports at most 3 dimensions, got {dim}")
    arr = np.asarray(lower, dtype=float)
    single = arr.ndim == 1
    batch = np.atleast_2d(arr)
    if batch.shape[1] != dim:
        raise DomainError(f"lower has {batch.shape[1]} columns but covariance is {dim}x{dim}")

    sd, corr = cov_to_corr(mat)
    z = batch / sd
    if dim == 1:
        out = norm_sf(z[:, 0])
    elif dim == 2:
        out = _bvnu(z[:, 0], z[:, 1], check_corr(corr[0, 1]))
    else:
        out = _trivariate_tail(z, corr, epsabs)
    return float(out[0]) if single else out


__all__ = [
    "RHO_MAX",
    "bvn_cdf",
    "bvn_tail",
    "check_corr",
    "check_cov",
    "cov_to_corr",
    "mvn_tail",
    "norm_cdf",
    "norm_logpdf",
    "norm_logsf",
    "norm_pdf",
    "norm_quantile",
    "norm_sf",
    "partial_corr",
]
