"""Fixed-l radial discretizations of S(v) = p^2/2 - v and C(v) = sqrt(p^2+1) - 1 - v.

Both operators are represented in momentum space on the same quadrature
grid, so that the kinetic terms are diagonal and the two matrices differ
by the diagonal (1/2) T_C^2 only.  Reduced radial functions u(p) = p phi(p)
are used; matrices are symmetrized by conjugation with sqrt(weights).
"""

from __future__ import annotations

import csv
import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, special
from scipy.interpolate import PchipInterpolator

from .errors import CouplingTooLarge, InternalConsistencyError, InvalidArgument, NumericalFailure
from .numerics import (
    RadialGrid,
    build_momentum_grid,
    coulomb_log_integral,
    gauss_legendre,
    legendre_q_from_gap,
    trigamma_int,
    yukawa_log_integral,
)

CRITICAL_COUPLING = 2.0 / math.pi
# admits kappa = 2/pi written in decimal to 16 digits
_COUPLING_SLACK = 4 * np.finfo(float).eps


class KineticKind(str, enum.Enum):
    SCHROEDINGER = "schroedinger"
    CHANDRASEKHAR = "chandrasekhar"


def check_coupling(kappa, kind=KineticKind.CHANDRASEKHAR):
    """Validate kappa; only the Chandrasekhar form needs kappa <= 2/pi."""
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < 0:
        raise InvalidArgument(f"coupling must be a finite non-negative number, got {kappa!r}")
    if KineticKind(kind) is KineticKind.SCHROEDINGER:
        return kappa
    if kappa > CRITICAL_COUPLING * (1 + _COUPLING_SLACK):
        raise CouplingTooLarge(kappa)
    return min(kappa, CRITICAL_COUPLING)


def default_scale(kappa, l):
    """Grid scale tracking the momenta kappa/n of the channel's bound states."""
    return max(kappa, 1e-3) / (l + 1)


@dataclass(frozen=True)
class ExponentialSum:
    """v(r) ~ sum_k coeffs[k] (1 - exp(-r/ranges[k])) / r.

    Each term has a closed-form partial-wave kernel, which is how bounded
    potentials enter the momentum-space matrices.  ``residual`` is the
    largest fit error relative to |v| + 1e-3 max|v| on the sample points.
    """

    ranges: np.ndarray
    coeffs: np.ndarray
    residual: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        basis = -np.expm1(-r[..., None] / self.ranges) / r[..., None]
        return basis @ self.coeffs


@dataclass(frozen=True, eq=False)
class RadialTable:
    """Tabulated radial function v(r) >= 0, bounded at the origin.

    Inside the table, v is interpolated monotonically in log r; below the
    first node it is held at the first value; beyond the last node it is
    tail_charge / r (zero for short-range tables).
    """

    r: np.ndarray
    values: np.ndarray
    tail_charge: float = 0.0
    _interp: object = field(default=None, repr=False, compare=False)
    _expansion: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise InvalidArgument("radial table needs matching 1-d arrays with >= 2 points")
        if not (np.all(r > 0) and np.all(np.diff(r) > 0)):
            raise InvalidArgument("radial table nodes must be positive and increasing")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("radial table values must be finite (bounded potential)")
        if not (self.tail_charge >= 0 and math.isfinite(self.tail_charge)):
            raise InvalidArgument("tail_charge must be finite and >= 0")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "tail_charge", float(self.tail_charge))
        object.__setattr__(self, "_interp", PchipInterpolator(np.log(r), v, extrapolate=False))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inner = self._interp(np.log(np.clip(r, self.r[0], self.r[-1])))
        with np.errstate(divide="ignore"):
            outer = self.tail_charge / r
        return np.where(r <= self.r[-1], inner, outer)

    def is_zero(self):
        return not np.any(self.values) and self.tail_charge == 0.0

    def scaled(self, factor):
        """The table of factor * v."""
        return RadialTable(self.r, factor * self.values, factor * self.tail_charge)

    def exponential_sum(self, per_decade=4):
        """Least-squares :class:`ExponentialSum` of this table (cached).

        Ranges are log-spaced from r[0]/10 to 10 r[-1] and the fit is to the
        table nodes (not the interpolant); the coefficients are constrained
        to add up to tail_charge so the 1/r tail is exact.
        """
        cached = self._expansion.get(per_decade)
        if cached is not None:
            return cached
        r0, r1 = self.r[0], self.r[-1]
        ranges = np.geomspace(r0 / 10.0, r1 * 10.0, int(per_decade * math.log10(100.0 * r1 / r0)) + 1)
        # the table nodes themselves, plus the declared behaviour outside
        rs = np.concatenate([np.geomspace(r0 / 100.0, r0, 20, endpoint=False), self.r,
                             np.geomspace(r1, r1 * 100.0, 41)[1:]])
        vs = self(rs)
        basis = -np.expm1(-rs[:, None] / ranges[None, :]) / rs[:, None]
        scale = float(np.max(np.abs(vs)))
        if scale == 0.0:
            out = ExponentialSum(ranges, np.zeros(ranges.size), 0.0)
        else:
            wt = 1.0 / (np.abs(vs) + 1e-3 * scale)
            big = 1e6 * float(np.max(wt))
            lhs = np.vstack([basis * wt[:, None], np.full(ranges.size, big)])
            rhs = np.append(vs * wt, big * self.tail_charge)
            coeffs = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
            out = ExponentialSum(ranges, coeffs, float(np.max(np.abs(basis @ coeffs - vs) * wt)))
        self._expansion[per_decade] = out
        return out

    def digest(self):
        h = hashlib.sha256()
        h.update(self.r.tobytes())
        h.update(self.values.tobytes())
        h.update(np.array([self.tail_charge]).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    kind: KineticKind
    l: int
    kappa: float
    grid: RadialGrid
    screening: Optional[RadialTable] = None

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise InvalidArgument(f"angular momentum must be a non-negative integer, got {self.l!r}")
        object.__setattr__(self, "kind", KineticKind(self.kind))
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "kappa", check_coupling(self.kappa, self.kind))
        if self.screening is not None and np.any(self.screening.values < 0):
            raise InvalidArgument("screening potential must be non-negative")


@dataclass(frozen=True)
class ChannelSpectrum:
    spec: ChannelSpec
    eigenvalues: np.ndarray


_kernel_cache: dict = {}


def coulomb_kernel(grid, l):
    """Symmetrized Nystrom matrix of the Coulomb potential 1/r in channel l.

    Off the diagonal: sqrt(w_i w_j) Q_l(z_ij) / pi with z = (p^2+q^2)/(2pq).
    The log singularity at p = q is removed by subtracting
    Q_l(z) (p/q) u(p), whose integral over q is p times
    :func:`coulomb_log_integral`; the quadrature defect of that term is put
    on the diagonal.
    """
    key = (grid.digest(), int(l))
    cached = _kernel_cache.get(key)
    if cached is not None:
        return cached.copy()
    p, w = grid.nodes, grid.weights
    n = p.size
    off = ~np.eye(n, dtype=bool)
    P, Q = p[:, None], p[None, :]
    # products written so that entry (i, j) and (j, i) round identically
    gap = np.where(off, (P - Q) ** 2 / (2.0 * (P * Q)), 1.0)
    ql = np.where(off, legendre_q_from_gap(l, gap), 0.0)
    defect = p * coulomb_log_integral(l) - (ql * (P / Q) * w[None, :]).sum(axis=1)
    sw = np.sqrt(w)
    kernel = ql * (sw[:, None] * sw[None, :])
    kernel[np.diag_indices(n)] = defect
    kernel /= math.pi
    if len(_kernel_cache) > 64:
        _kernel_cache.clear()
    _kernel_cache[key] = kernel
    return kernel.copy()


def riccati_bessel(l, x):
    x = np.asarray(x, dtype=float)
    return x * special.spherical_jn(l, x)


def radial_quadrature(r_min, r_max, panels_log=60, max_width=None, order=8):
    """Composite Gauss-Legendre nodes on (0, r_max], log-graded near the origin."""
    if max_width is None:
        max_width = max(r_max / 400.0, 0.02)
    edges = np.concatenate(
        [[0.0], np.geomspace(r_min, r_max, panels_log), np.arange(max_width, r_max, max_width)]
    )
    edges = np.unique(edges)
    x, wx = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * wx[None, :]
    return nodes.ravel(), weights.ravel()


def potential_kernel_values(p, q, l, v, r_max):
    """(2/pi) int_0^r_max jhat_l(p r) v(r) jhat_l(q r) dr by direct radial quadrature.

    A pointwise reference for moderate p, q; ``v`` is any bounded callable
    that is negligible beyond r_max.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    r_nodes, r_w = radial_quadrature(1e-4, r_max)
    vals = np.asarray(v(r_nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InvalidArgument("potential must be bounded; use coulomb_kernel for 1/r")
    fp = riccati_bessel(l, p[:, None] * r_nodes[None, :])
    fq = riccati_bessel(l, q[:, None] * r_nodes[None, :])
    return (2.0 / math.pi) * (fp * (r_w * vals)[None, :]) @ fq.T


def cutoff_coulomb_kernel(grid, l, a):
    """Symmetrized matrix of (1 - exp(-r/a)) / r in channel l.

    The kernel is [Q_l(z) - Q_l(z + 1/(2 a^2 p q))] / pi: Coulomb minus
    Yukawa.  Both parts get the diagonal subtraction of
    :func:`coulomb_kernel`; for the Yukawa part the integral of the
    subtracted term is p * yukawa_log_integral(l, 1/(a p)).
    """
    if not a > 0:
        raise InvalidArgument("cutoff range must be positive")
    p, w = grid.nodes, grid.weights
    n = p.size
    off = ~np.eye(n, dtype=bool)
    P, Q = p[:, None], p[None, :]
    gap = np.where(off, (P - Q) ** 2 / (2.0 * (P * Q)), 1.0)
    extra = 1.0 / (2.0 * a * a * (P * Q))
    diff = np.where(off, legendre_q_from_gap(l, gap) - legendre_q_from_gap(l, gap + extra), 0.0)
    ridge = p * (coulomb_log_integral(l) - yukawa_log_integral(l, 1.0 / (a * p)))
    defect = ridge - (diff * (P / Q) * w[None, :]).sum(axis=1)
    sw = np.sqrt(w)
    kernel = diff * (sw[:, None] * sw[None, :])
    kernel[np.diag_indices(n)] = defect
    return kernel / math.pi


# largest tolerated relative misfit of a table's exponential-sum expansion
EXPANSION_TOLERANCE = 1e-3


def smooth_potential_kernel(grid, l, v):
    """Symmetrized matrix of a bounded radial potential v in channel l.

    v is expanded as sum_k c_k (1 - exp(-r/a_k)) / r (see
    :meth:`RadialTable.exponential_sum`) and each term uses the closed-form
    kernel of :func:`cutoff_coulomb_kernel`.
    """
    if not isinstance(v, RadialTable):
        raise InvalidArgument("smooth_potential_kernel expects a RadialTable")
    n = grid.size
    if v.is_zero():
        return np.zeros((n, n))
    expansion = v.exponential_sum()
    if expansion.residual > EXPANSION_TOLERANCE:
        raise NumericalFailure(
            f"exponential-sum fit of the potential table misses by {expansion.residual:.2e}",
            {"residual": expansion.residual},
        )
    mat = np.zeros((n, n))
    for a, c in zip(expansion.ranges, expansion.coeffs):
        if c != 0.0:
            mat += c * cutoff_coulomb_kernel(grid, l, a)
    return 0.5 * (mat + mat.T)


def kinetic_diagonal(kind, p):
    p = np.asarray(p, dtype=float)
    if KineticKind(kind) is KineticKind.SCHROEDINGER:
        return 0.5 * p * p
    # sqrt(p^2+1) - 1 without cancellation at small p
    return p * p / (np.sqrt(p * p + 1.0) + 1.0)


def assemble(spec):
    """Matrix of S(kappa/r - chi) or C(kappa/r - chi) for one channel."""
    p = spec.grid.nodes
    mat = -spec.kappa * coulomb_kernel(spec.grid, spec.l) if spec.kappa else np.zeros((p.size, p.size))
    mat[np.diag_indices(p.size)] += kinetic_diagonal(spec.kind, p)
    if spec.screening is not None:
        mat += smooth_potential_kernel(spec.grid, spec.l, spec.screening)
    return mat


def _check_symmetric(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgument("expected a square matrix")
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    if scale and np.max(np.abs(matrix - matrix.T)) > 1e-12 * scale:
        raise InternalConsistencyError("matrix is not symmetric within 1e-12 relative")
    return matrix


def eigenvalues(matrix):
    """Full ascending spectrum of a real symmetric matrix."""
    matrix = _check_symmetric(matrix)
    return linalg.eigvalsh(matrix)


def channel_spectrum(spec):
    return ChannelSpectrum(spec, eigenvalues(assemble(spec)))


def negative_part_sum(eigs, mu=0.0):
    """tr[A + mu]_- from the eigenvalues of A: sum of -(lambda + mu) over lambda < -mu."""
    if mu < 0:
        raise InvalidArgument(f"mu must be >= 0, got {mu!r}")
    shifted = np.asarray(eigs, dtype=float) + mu
    return float(-shifted[shifted < 0].sum())


def hydrogen_levels(kappa, l, count):
    """Exact Schroedinger-Coulomb levels -kappa^2 / (2 (n_r + l + 1)^2)."""
    n = np.arange(count) + l + 1
    return -0.5 * kappa * kappa / n.astype(float) ** 2


def hydrogen_channel_trace(kappa, l):
    """tr_l [S(kappa/r)]_- = (2l+1) kappa^2/2 * sum_n 1/(n+l)^2."""
    if kappa < 0:
        raise InvalidArgument("kappa must be >= 0")
    if kappa == 0:
        return 0.0
    return (2 * l + 1) * 0.5 * kappa * kappa * trigamma_int(l + 1)


def default_spec(kind, l, kappa, n=400, screening=None):
    return ChannelSpec(kind, l, kappa, build_momentum_grid(n, default_scale(kappa, l)), screening)


def dump_matrix_csv(matrix, path):
    """Row-major CSV dump with 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(matrix, dtype=float):
            writer.writerow([format(x, ".17g") for x in row])
