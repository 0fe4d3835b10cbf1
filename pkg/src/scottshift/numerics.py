"""Quadrature grids and special functions.

Units throughout are natural (hbar = m = e^2 = 1) with the speed of light
scaled to one, so momenta and radii are dimensionless.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import DomainError, InvalidArgument

# Upward recurrence amplifies rounding by roughly x**(2l+1), x = z + sqrt(z^2-1).
_UPWARD_GROWTH_LIMIT = math.log(1e6)
_MILLER_DIGITS = math.log(1e18)


def gauss_legendre(n):
    """Nodes and weights of the n-point Gauss-Legendre rule on (-1, 1)."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"Gauss-Legendre order must be a positive integer, got {n!r}")
    return leggauss(int(n))


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature on (0, inf): ``sum(weights * f(nodes)) ~ integral of f``."""

    nodes: np.ndarray
    weights: np.ndarray
    map_scale: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise InvalidArgument("nodes and weights must be 1-d arrays of equal length")
        if not (np.all(nodes > 0) and np.all(np.diff(nodes) > 0)):
            raise InvalidArgument("grid nodes must be positive and strictly increasing")
        if not np.all(weights > 0):
            raise InvalidArgument("grid weights must be positive")
        if not self.map_scale > 0:
            raise InvalidArgument("map_scale must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "map_scale", float(self.map_scale))

    @property
    def size(self):
        return self.nodes.size

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def digest(self):
        """Content hash of the exact node and weight bits."""
        h = hashlib.sha256()
        h.update(self.nodes.tobytes())
        h.update(self.weights.tobytes())
        return h.hexdigest()


def build_momentum_grid(n, scale=1.0):
    """Map an n-point Gauss-Legendre rule onto (0, inf) via p = s(1+u)/(1-u)."""
    if int(n) != n or n < 8:
        raise InvalidArgument(f"momentum grid needs n >= 8, got {n!r}")
    if not (scale > 0 and math.isfinite(scale)):
        raise InvalidArgument(f"grid scale must be positive, got {scale!r}")
    u, w = gauss_legendre(int(n))
    one_minus = 1.0 - u
    nodes = scale * (1.0 + u) / one_minus
    weights = w * 2.0 * scale / one_minus**2
    return RadialGrid(nodes, weights, scale)


def _q0(zm1):
    return 0.5 * np.log1p(2.0 / zm1)


def _legendre_q(l, z, zm1):
    """Vectorized Q_l for z > 1; ``zm1`` carries z - 1 without cancellation."""
    q0 = _q0(zm1)
    if l == 0:
        return q0
    log_x = np.log(z + np.sqrt(zm1 * (z + 1.0)))
    upward = (2 * l + 1) * log_x < _UPWARD_GROWTH_LIMIT
    out = np.empty_like(z)

    if upward.any():
        zz = z[upward]
        prev, cur = q0[upward], zz * q0[upward] - 1.0
        for k in range(1, l):
            prev, cur = cur, ((2 * k + 1) * zz * cur - k * prev) / (k + 1)
        out[upward] = cur

    down = ~upward
    if down.any():
        # Miller's backward recurrence; Q_l is the minimal solution so the
        # arbitrary start decays away, normalisation comes from Q_0.
        zz = z[down]
        start = l + int(math.ceil(_MILLER_DIGITS / (2.0 * float(log_x[down].min())))) + 8
        upper = np.zeros_like(zz)
        cur = np.full_like(zz, 1e-280)
        kept = np.zeros_like(zz)
        for k in range(start, 0, -1):
            lower = ((2 * k + 1) * zz * cur - (k + 1) * upper) / k
            upper, cur = cur, lower
            if k - 1 == l:
                kept = cur.copy()
            big = np.abs(cur) > 1e250
            if big.any():
                cur[big] *= 1e-250
                upper[big] *= 1e-250
                kept[big] *= 1e-250
        out[down] = kept / cur * q0[down]
    return out


def legendre_q(l, z):
    """Legendre function of the second kind Q_l(z) for real z > 1.

    Small l (or z close to 1) uses the upward three-term recurrence from the
    closed forms of Q_0 and Q_1; elsewhere Miller's backward recurrence.
    """
    if int(l) != l or l < 0:
        raise InvalidArgument(f"degree must be a non-negative integer, got {l!r}")
    arr = np.asarray(z, dtype=float)
    if np.any(~(arr > 1.0)):
        raise DomainError("Q_l(z) requires z > 1")
    flat = arr.reshape(-1)
    out = _legendre_q(int(l), flat, flat - 1.0).reshape(arr.shape)
    return float(out) if np.ndim(z) == 0 else out


def legendre_q_from_gap(l, zm1):
    """Q_l(1 + zm1) evaluated without forming 1 + zm1 first."""
    zm1 = np.asarray(zm1, dtype=float)
    if np.any(~(zm1 > 0)):
        raise DomainError("Q_l needs z - 1 > 0")
    flat = zm1.reshape(-1)
    return _legendre_q(int(l), 1.0 + flat, flat).reshape(zm1.shape)


def legendre_q_integral(l, z):
    """Q_l(z) by adaptive quadrature of its integral representation.

    Q_l(z) = int_0^inf (z + sqrt(z^2-1) cosh t)^(-l-1) dt.  Slow; used as a
    cross-check of :func:`legendre_q`.
    """
    if z <= 1:
        raise DomainError("Q_l(z) requires z > 1")
    root = math.sqrt((z - 1.0) * (z + 1.0))

    def integrand(t):
        # written with exp(-t) to stay finite for large t
        base = z + root * math.cosh(t) if t < 700 else math.inf
        return base ** (-l - 1)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=500)
    return value


def trigamma_int(m):
    """psi'(m) for integer m >= 1, i.e. sum_{n>=1} 1/(n+m-1)^2."""
    if int(m) != m or m < 1:
        raise InvalidArgument(f"trigamma_int needs a positive integer, got {m!r}")
    m = int(m)
    if m <= 64:
        return math.pi**2 / 6.0 - math.fsum(1.0 / k**2 for k in range(1, m))
    return float(special.polygamma(1, m))


@lru_cache(maxsize=None)
def coulomb_log_integral(l):
    """int_0^inf Q_l((1+t^2)/(2t)) dt/t = (pi/2) [Gamma((l+1)/2) / Gamma(l/2+1)]^2.

    This is the closed form that the diagonal subtraction in the momentum
    space Coulomb kernel relies on; for l = 0 it equals pi^2/2.
    """
    return 0.5 * math.pi * math.exp(2.0 * (math.lgamma(0.5 * (l + 1)) - math.lgamma(0.5 * l + 1.0)))


def hurwitz_tail(s, start):
    """sum_{n >= start} n^-s."""
    return float(special.zeta(s, start))


def bessel_laplace(l, beta):
    """L_l(beta) = int_0^inf j_l(x) exp(-beta x) dx for beta >= 0.

    L_0 = arctan(1/beta), L_1 = 1 - beta L_0 and
    (l+1) L_{l+1} = l L_{l-1} - (2l+1) beta L_l.  For large beta the wanted
    solution is the decaying one, so Miller's backward recurrence takes over
    as for Q_l (L_l(beta) = (-i)^(l+1) Q_l(-i beta)).
    """
    if int(l) != l or l < 0:
        raise InvalidArgument(f"degree must be a non-negative integer, got {l!r}")
    b = np.asarray(beta, dtype=float)
    if np.any(~(b >= 0)):
        raise DomainError("bessel_laplace needs beta >= 0")
    flat = b.reshape(-1)
    l = int(l)
    l0 = np.arctan2(1.0, flat)
    if l == 0:
        out = l0
    else:
        growth = (2 * l + 1) * np.arcsinh(flat)
        upward = growth < _UPWARD_GROWTH_LIMIT
        out = np.empty_like(flat)
        if upward.any():
            bb = flat[upward]
            prev, cur = l0[upward], 1.0 - bb * l0[upward]
            for k in range(1, l):
                prev, cur = cur, (k * prev - (2 * k + 1) * bb * cur) / (k + 1)
            out[upward] = cur
        down = ~upward
        if down.any():
            bb = flat[down]
            log_x = float(np.arcsinh(bb).min())
            start = l + int(math.ceil(_MILLER_DIGITS / (2.0 * log_x))) + 8
            upper = np.zeros_like(bb)
            cur = np.full_like(bb, 1e-280)
            kept = np.zeros_like(bb)
            for k in range(start, 0, -1):
                # L_{k-1} = ((2k+1) beta L_k + (k+1) L_{k+1}) / k
                lower = ((2 * k + 1) * bb * cur + (k + 1) * upper) / k
                upper, cur = cur, lower
                if k - 1 == l:
                    kept = cur.copy()
                big = np.abs(cur) > 1e250
                if big.any():
                    cur[big] *= 1e-250
                    upper[big] *= 1e-250
                    kept[big] *= 1e-250
            out[down] = kept / cur * l0[down]
    out = out.reshape(b.shape)
    return float(out) if np.ndim(beta) == 0 else out


def yukawa_log_integral(l, beta):
    """int_0^inf Q_l((1 + beta^2 + t^2)/(2t)) dt/t = 2 L_l(0) L_l(beta).

    At beta = 0 this is :func:`coulomb_log_integral`.
    """
    return 2.0 * bessel_laplace(l, 0.0) * bessel_laplace(l, beta)
