"""Channel spectral shifts D_l and the Scott coefficient s(kappa).

D_l = (2l+1) (tr[C(v)+mu]_- - tr[S(v)+mu]_-) restricted to angular momentum
l.  On a common momentum grid S - C is the diagonal T_C^2/2 >= 0, so the
k-th eigenvalue of C never exceeds the k-th eigenvalue of S.  Each state's
drop delta_k = e_S,k - e_C,k is taken either from the two dense spectra
(when it is far above their rounding floor) or from the Hellmann-Feynman
integral over the path S - t T_C^2/2, t in [0, 1], whose integrand
<v_k(t), T_C^2/2 v_k(t)> is a sum of non-negative terms.  Either way every
channel term is non-negative in floating point, not only within tolerance.

For mu = 0 the Coulomb channel has infinitely many bound states while a
finite grid resolves only the lowest ones.  States whose Schroedinger
level is off the exact hydrogen level by more than ``resolve_tol`` are
dropped and replaced by the asymptotic Rydberg series
delta_n ~ A/n^3 + B/n^4 fitted to the last resolved states.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .channel import (
    CRITICAL_COUPLING,
    ChannelSpec,
    ChannelSpectrum,
    KineticKind,
    RadialTable,
    assemble,
    check_coupling,
    default_scale,
    eigenvalues,
    hydrogen_levels,
    kinetic_diagonal,
)
from .errors import InvalidArgument, NumericalFailure
from .numerics import RadialGrid, build_momentum_grid, gauss_legendre, hurwitz_tail, trigamma_int

DEFAULT_L_MAX = 30
DEFAULT_GRID = 400
DEFAULT_WINDOW = 8

# Bump when the numerical recipe changes so stale cache entries are ignored.
ALGORITHM_VERSION = 1

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ShiftOptions:
    """Knobs of the per-channel computation (all enter the cache key)."""

    hf_nodes: int = 8
    hf_grading: int = 3
    # direct differences are trusted above this multiple of eps*||S||
    direct_margin: float = 1.0
    resolve_tol: float = 1e-3
    rydberg_window: int = 8


@dataclass(frozen=True, eq=False)
class ChannelPair:
    """Schroedinger and Chandrasekhar spectra of one channel on one grid.

    ``state_shifts[k]`` is e_S,k - e_C,k for every Schroedinger bound state
    (e_S,k < 0).  Nothing here depends on mu.
    """

    l: int
    kappa: float
    schroedinger: np.ndarray
    chandrasekhar: np.ndarray
    state_shifts: np.ndarray
    screened: bool = False

    def spectra(self, grid, screening=None):
        s = ChannelSpec(KineticKind.SCHROEDINGER, self.l, self.kappa, grid, screening)
        c = ChannelSpec(KineticKind.CHANDRASEKHAR, self.l, self.kappa, grid, screening)
        return ChannelSpectrum(s, self.schroedinger), ChannelSpectrum(c, self.chandrasekhar)


def _hf_state_shifts(s_mat, delta_diag, indices, options):
    """Hellmann-Feynman integral of <v_k, diag(delta) v_k> over t in [0, 1].

    Nodes are graded towards t = 1 where the relativistic endpoint makes the
    integrand singular (integrably) for s waves near critical coupling.
    """
    x, xw = gauss_legendre(options.hf_nodes)
    tau = 0.5 * (x + 1.0)
    g = options.hf_grading
    t_nodes = 1.0 - (1.0 - tau) ** g
    t_weights = 0.5 * xw * g * (1.0 - tau) ** (g - 1)
    lo, hi = int(indices.min()), int(indices.max())
    acc = np.zeros(hi - lo + 1)
    work = s_mat.copy()
    diag = np.diag_indices_from(work)
    base = np.diag(s_mat).copy()
    for t, wt in zip(t_nodes, t_weights):
        work[diag] = base - t * delta_diag
        _, vecs = linalg.eigh(work, subset_by_index=[lo, hi])
        acc += wt * (delta_diag[:, None] * vecs * vecs).sum(axis=0)
    return acc[indices - lo]


def solve_channel_pair(l, kappa, grid, screening=None, options=ShiftOptions()):
    """Spectra of S and C for one channel plus the per-state drops."""
    kappa = check_coupling(kappa)
    s_spec = ChannelSpec(KineticKind.SCHROEDINGER, l, kappa, grid, screening)
    s_mat = assemble(s_spec)
    p = grid.nodes
    # exact float difference of the two kinetic diagonals, never negative
    delta_diag = np.maximum(kinetic_diagonal("schroedinger", p) - kinetic_diagonal("chandrasekhar", p), 0.0)
    c_mat = s_mat.copy()
    c_mat[np.diag_indices_from(c_mat)] -= delta_diag
    e_s = eigenvalues(s_mat)
    e_c = eigenvalues(c_mat)
    bound = np.flatnonzero(e_s < 0)
    shifts = np.zeros(bound.size)
    if bound.size:
        direct = e_s[bound] - e_c[bound]
        floor = options.direct_margin * _EPS * float(np.max(np.abs(np.diag(s_mat))))
        trusted = direct > floor
        shifts[trusted] = direct[trusted]
        rest = bound[~trusted]
        if rest.size:
            shifts[~trusted] = _hf_state_shifts(s_mat, delta_diag, rest, options)
    return ChannelPair(int(l), kappa, e_s, e_c, shifts, screening is not None)


def _resolved_count(pair, options):
    """Number of leading Schroedinger states that match exact hydrogen levels."""
    n_bound = pair.state_shifts.size
    if n_bound == 0:
        return 0
    exact = hydrogen_levels(pair.kappa, pair.l, n_bound)
    good = np.abs(pair.schroedinger[:n_bound] / exact - 1.0) < options.resolve_tol
    bad = np.flatnonzero(~good)
    return int(bad[0]) if bad.size else n_bound


def rydberg_tail(n_values, shifts, window):
    """Fit delta_n = A/n^3 + B/n^4 on the last ``window`` states; sum the model beyond.

    Returns (A, B, tail).  The tail is clamped at zero.
    """
    n_values = np.asarray(n_values, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    if n_values.size < 2:
        return 0.0, 0.0, 0.0
    w = min(window, n_values.size)
    n_fit, d_fit = n_values[-w:], shifts[-w:]
    design = np.column_stack([n_fit**-3, n_fit**-4])
    # weight rows so each state counts relative to its own size
    scale = n_fit**3
    (a, b), *_ = np.linalg.lstsq(design * scale[:, None], d_fit * scale, rcond=None)
    start = n_fit[-1] + 1
    tail = a * hurwitz_tail(3, start) + b * hurwitz_tail(4, start)
    return float(a), float(b), max(float(tail), 0.0)


@dataclass(frozen=True)
class ChannelShift:
    l: int
    value: float
    states: int
    rydberg_tail: float


def shift_from_pair(pair, mu=0.0, options=ShiftOptions()):
    """(2l+1)(tr[C+mu]_- - tr[S+mu]_-) from a solved channel pair."""
    if mu < 0:
        raise InvalidArgument(f"mu must be >= 0, got {mu!r}")
    e_s, e_c, drops = pair.schroedinger, pair.chandrasekhar, pair.state_shifts
    n_bound = drops.size
    tail = 0.0
    if mu == 0 and not pair.screened:
        # pure Coulomb: keep resolved states, complete the Rydberg series
        k_res = _resolved_count(pair, options)
        terms = drops[:k_res]
        if k_res:
            n_values = np.arange(k_res) + pair.l + 1
            _, _, tail = rydberg_tail(n_values, terms, options.rydberg_window)
        used = k_res
    else:
        below = e_s[:n_bound] < -mu
        terms = drops[below]
        # states bound below -mu for C but not for S contribute -(e_C + mu)
        crossing = (e_c < -mu) & (e_s >= -mu)
        terms = np.concatenate([terms, -(e_c[crossing] + mu)])
        used = terms.size
    total = math.fsum(terms) + tail
    return ChannelShift(pair.l, (2 * pair.l + 1) * total, int(used), (2 * pair.l + 1) * tail)


SolveFn = Callable[..., ChannelPair]


def _grid_for(l, kappa, grid, grid_size):
    if grid is not None:
        return grid
    return build_momentum_grid(grid_size, default_scale(kappa, l))


def channel_shift(l, kappa, mu=0.0, grid=None, screening=None, grid_size=DEFAULT_GRID,
                  options=ShiftOptions(), solver: Optional[SolveFn] = None):
    """D_l for the Coulomb coupling kappa, optionally screened by chi."""
    kappa = check_coupling(kappa)
    if mu < 0:
        raise InvalidArgument(f"mu must be >= 0, got {mu!r}")
    if kappa == 0:
        return 0.0
    grid = _grid_for(l, kappa, grid, grid_size)
    solve = solver or solve_channel_pair
    pair = solve(l, kappa, grid, screening, options)
    return shift_from_pair(pair, mu, options).value


def screened_channel_shift(l, kappa, chi, grid=None, grid_size=DEFAULT_GRID, mu=0.0,
                           options=ShiftOptions(), solver=None):
    """D_l with the screening chi applied identically to both operators."""
    if chi is not None and not isinstance(chi, RadialTable):
        raise InvalidArgument("chi must be a RadialTable")
    if chi is not None and chi.is_zero():
        chi = None
    return channel_shift(l, kappa, mu, grid, chi, grid_size, options, solver)


def tail_fit(shifts, window=DEFAULT_WINDOW):
    """Least-squares D_l = a/(l+1)^2 + b/(l+1)^3 over the top ``window`` channels.

    Returns (a, b, tail_sum) where tail_sum is the model summed over
    l > l_max.  a is clamped at zero, which keeps tail_sum >= 0.
    """
    pairs = sorted((int(l), float(d)) for l, d in shifts)
    if window < 3:
        raise InvalidArgument("tail window must be >= 3")
    if len(pairs) < window:
        raise InvalidArgument(f"need at least {window} channels for the tail fit, got {len(pairs)}")
    top = pairs[-window:]
    ls = np.array([l for l, _ in top], dtype=float)
    if np.any(np.diff(ls) != 1):
        raise InvalidArgument("tail fit needs consecutive l at the top of the series")
    ds = np.array([d for _, d in top])
    if not np.any(ds):
        return 0.0, 0.0, 0.0
    x = ls + 1.0
    design = np.column_stack([x**-2, x**-3])
    weight = x**2
    (a, b), *_ = np.linalg.lstsq(design * weight[:, None], ds * weight, rcond=None)
    if a < 0:
        a = 0.0
        b = max(float(np.dot(x**-3 * weight, ds * weight) / np.dot(x**-6, weight**2)), 0.0)
    start = int(ls[-1]) + 2  # first omitted l+1
    tail = a * trigamma_int(start) + b * hurwitz_tail(3, start)
    return float(a), float(b), max(float(tail), 0.0)


@dataclass
class ShiftSeries:
    kappa: float
    mu: float
    shifts: list
    tail_a: float
    tail_b: float
    tail_sum: float
    s_value: float
    error_estimate: float
    grid_size: int = DEFAULT_GRID
    window: int = DEFAULT_WINDOW
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "mu": self.mu,
            "shifts": [[int(l), float(d)] for l, d in self.shifts],
            "tail": {"a": self.tail_a, "b": self.tail_b, "sum": self.tail_sum},
            "s": self.s_value,
            "error": self.error_estimate,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data):
        return cls(
            kappa=data["kappa"],
            mu=data["mu"],
            shifts=[(int(l), float(d)) for l, d in data["shifts"]],
            tail_a=data["tail"]["a"],
            tail_b=data["tail"]["b"],
            tail_sum=data["tail"]["sum"],
            s_value=data["s"],
            error_estimate=data["error"],
        )


def shift_series(kappa, l_max=DEFAULT_L_MAX, grid_size=DEFAULT_GRID, mu=0.0, window=DEFAULT_WINDOW,
                 options=ShiftOptions(), solver=None, workers=1):
    """Channel shifts for l = 0..l_max on per-channel adapted grids."""
    kappa = check_coupling(kappa)

    def one(l):
        return l, channel_shift(l, kappa, mu, None, None, grid_size, options, solver)

    ls = range(l_max + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, ls))
    else:
        results = [one(l) for l in ls]
    return sorted(results)


def _assemble_s(kappa, shifts, window):
    a, b, tail = tail_fit(shifts, window)
    total = math.fsum(d for _, d in sorted(shifts)) + tail
    return a, b, tail, total / kappa**2


def scott_coefficient(kappa, l_max=DEFAULT_L_MAX, grid_size=DEFAULT_GRID, mu=0.0, window=DEFAULT_WINDOW,
                      tolerance=None, options=ShiftOptions(), solver=None, workers=1):
    """s(kappa) = kappa^-2 (sum_l D_l + tail) with a two-part error estimate.

    error = |s(n) - s(n/2)| + |tail(window) - tail(window + 2)| / kappa^2.
    """
    kappa = check_coupling(kappa)
    if not kappa > 0:
        raise InvalidArgument("scott_coefficient needs kappa > 0")
    if l_max < 8:
        raise InvalidArgument(f"l_max must be >= 8, got {l_max}")
    if window > l_max + 1:
        raise InvalidArgument("tail window larger than the number of channels")
    shifts = shift_series(kappa, l_max, grid_size, mu, window, options, solver, workers)
    a, b, tail, s_value = _assemble_s(kappa, shifts, window)
    coarse = shift_series(kappa, l_max, grid_size // 2, mu, window, options, solver, workers)
    s_coarse = _assemble_s(kappa, coarse, window)[3]
    alt_window = min(window + 2, l_max + 1)
    tail_alt = tail_fit(shifts, alt_window)[2]
    error = abs(s_value - s_coarse) + abs(tail - tail_alt) / kappa**2
    series = ShiftSeries(kappa, float(mu), shifts, a, b, tail, s_value, error, grid_size, window,
                         {"s_coarse": s_coarse, "tail_alt_window": tail_alt})
    if tolerance is not None and error > tolerance:
        raise NumericalFailure(
            f"s({kappa}) error estimate {error:.3e} exceeds tolerance {tolerance:.3e}",
            {"kappa": kappa, "s": s_value, "s_coarse": s_coarse, "tail": tail, "tail_alt": tail_alt},
        )
    return series


@dataclass(frozen=True)
class ScanResult:
    rows: list
    monotone: bool
    violations: list


def scott_scan(kappas, l_max=DEFAULT_L_MAX, grid_size=DEFAULT_GRID, mu=0.0, window=DEFAULT_WINDOW,
               options=ShiftOptions(), solver=None, workers=1):
    """s(kappa) over an ascending list; flags steps that fail strict increase.

    A step k -> k+1 is a violation unless s_{k+1} - s_k exceeds the sum of
    both error estimates.
    """
    kappas = [float(k) for k in kappas]
    if any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise InvalidArgument("kappas must be strictly ascending")
    rows = []
    for kappa in kappas:
        series = scott_coefficient(kappa, l_max, grid_size, mu, window, None, options, solver, workers)
        rows.append((kappa, series.s_value, series.error_estimate))
    violations = [
        (k0, k1)
        for (k0, s0, e0), (k1, s1, e1) in zip(rows, rows[1:])
        if not s1 - s0 > e0 + e1
    ]
    return ScanResult(rows, not violations, violations)
