"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Every kernel exists in two versions: a ``*_numpy`` reference implementation
and, when numba is importable, a compiled one. The module-level aliases
(``erf_product_mean``, ``erf_product_quad``) point at the compiled versions
unless the environment variable ``CVHIDING_NO_NUMBA`` is set to a truthy
value, in which case the numpy path is used everywhere. Both paths compute
identical values; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import math
import os

import numpy as np
from scipy.special import erf as _erf

_SQRT2 = math.sqrt(2.0)

NUMBA_ENABLED = os.environ.get("CVHIDING_NO_NUMBA", "0").lower() not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False


def erf_product_mean_numpy(z1, z2, l11, l21, l22, sigma):
    """Mean and standard error of the sign-scheme integrand over MC draws.

    ``z1, z2`` are i.i.d. standard normal draws; the marginal pair is
    recovered through the Cholesky factor (l11; l21, l22).
    """
    q1 = l11 * z1
    q4 = l21 * z1 + l22 * z2
    f = (1.0 - _erf(np.abs(q1) / (_SQRT2 * sigma))) * (1.0 - _erf(np.abs(q4) / (_SQRT2 * sigma)))
    mean = float(f.mean())
    return mean, float(f.std() / np.sqrt(f.size))


def erf_product_quad_numpy(q1, w1, q4, w4, dens_a, dens_b, dens_c, dens_norm, sigma):
    """Quadrant-folded Gauss-Legendre sum of the sign-scheme integrand.

    Nodes live on the positive quadrant; the Gaussian density is folded
    across both axes so the |.| kinks of the integrand never enter the
    integration domain. ``dens_a/b/c`` are the entries of the inverse
    marginal covariance, ``dens_norm`` its normalisation constant.
    """
    Q1 = q1[:, None]
    Q4 = q4[None, :]
    quad = 0.5 * (dens_a * Q1 * Q1 + dens_c * Q4 * Q4)
    cross = dens_b * Q1 * Q4
    dens = np.exp(-(quad + cross)) + np.exp(-(quad - cross))
    f = (1.0 - _erf(Q1 / (_SQRT2 * sigma))) * (1.0 - _erf(Q4 / (_SQRT2 * sigma)))
    return float(2.0 * dens_norm * ((w1[:, None] * w4[None, :]) * f * dens).sum())


if NUMBA_ENABLED:

    @njit(cache=True, fastmath=True, parallel=True)
    def erf_product_mean_numba(z1, z2, l11, l21, l22, sigma):
        n = z1.shape[0]
        acc = 0.0
        acc2 = 0.0
        for i in prange(n):
            q1 = l11 * z1[i]
            q4 = l21 * z1[i] + l22 * z2[i]
            f = (1.0 - math.erf(abs(q1) / (_SQRT2 * sigma))) * (
                1.0 - math.erf(abs(q4) / (_SQRT2 * sigma))
            )
            acc += f
            acc2 += f * f
        mean = acc / n
        var = max(acc2 / n - mean * mean, 0.0)
        return mean, math.sqrt(var / n)

    @njit(cache=True, fastmath=True)
    def erf_product_quad_numba(q1, w1, q4, w4, dens_a, dens_b, dens_c, dens_norm, sigma):
        n1 = q1.shape[0]
        n4 = q4.shape[0]
        total = 0.0
        for i in range(n1):
            x = q1[i]
            g1 = 1.0 - math.erf(x / (_SQRT2 * sigma))
            row = 0.0
            for j in range(n4):
                y = q4[j]
                quad = 0.5 * (dens_a * x * x + dens_c * y * y)
                cross = dens_b * x * y
                dens = math.exp(-(quad + cross)) + math.exp(-(quad - cross))
                g4 = 1.0 - math.erf(y / (_SQRT2 * sigma))
                row += w4[j] * g1 * g4 * dens
            total += w1[i] * row
        return 2.0 * dens_norm * total

    erf_product_mean = erf_product_mean_numba
    erf_product_quad = erf_product_quad_numba
else:
    erf_product_mean = erf_product_mean_numpy
    erf_product_quad = erf_product_quad_numpy
