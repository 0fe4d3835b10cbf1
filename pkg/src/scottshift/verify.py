"""Numerical checks of the operator inequalities and identities.

Each check returns a :class:`CheckReport`; ``worst_margin`` is the most
adverse slack (negative means violated) in the units stated per check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, optimize, special

from .channel import CRITICAL_COUPLING, coulomb_kernel, kinetic_diagonal
from .errors import InvalidArgument
from .numerics import build_momentum_grid, gauss_legendre
from .shift import channel_shift


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float
    tolerance: float = 0.0
    details: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "tolerance": self.tolerance,
            "details": [[_plain(i), float(m)] for i, m in self.details],
            "info": {k: _plain(v) for k, v in self.info.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _plain(x):
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _report(name, details, tolerance, info=None):
    worst = min((m for _, m in details), default=0.0)
    return CheckReport(name, bool(worst >= -tolerance), float(worst), tolerance, details, info or {})


def banff_identity_check(grid, tolerance=1e-13):
    """p^2/2 = T + T^2/2 with T = sqrt(p^2+1) - 1, node by node (relative residual)."""
    p = grid.nodes
    t = kinetic_diagonal("chandrasekhar", p)
    lhs = 0.5 * p * p
    rhs = t + 0.5 * t * t
    scale = np.maximum(np.abs(lhs), np.finfo(float).tiny)
    resid = np.where(lhs == 0, np.abs(rhs), np.abs(lhs - rhs) / scale)
    details = [(float(pi), -float(r)) for pi, r in zip(p, resid)]
    return _report("banff", details, tolerance, {"max_residual": float(resid.max())})


def _trial_integrals(coeffs, powers, rates, l):
    """Hardy integrals of u = sum c r^a exp(-b r) by adaptive quadrature."""

    def u(r):
        return sum(c * r**a * math.exp(-b * r) for c, a, b in zip(coeffs, powers, rates))

    def du(r):
        return sum(c * (a * r ** (a - 1) - b * r**a) * math.exp(-b * r) for c, a, b in zip(coeffs, powers, rates))

    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    split = 1.0 / max(rates)
    kin = sum(integrate.quad(lambda r: du(r) ** 2, a, c, **opts)[0] for a, c in ((0, split), (split, np.inf)))
    inv2 = sum(integrate.quad(lambda r: (u(r) / r) ** 2, a, c, **opts)[0] for a, c in ((0, split), (split, np.inf)))
    return kin, inv2


def hardy_margin(coeffs, powers, rates, l):
    """Relative slack of int u'^2 + l(l+1) int u^2/r^2 >= (l+1/2)^2 int u^2/r^2."""
    kin, inv2 = _trial_integrals(coeffs, powers, rates, l)
    lhs = kin + l * (l + 1) * inv2
    rhs = (l + 0.5) ** 2 * inv2
    return (lhs - rhs) / rhs


def hardy_trial_check(l, trials=200, seed=0):
    """Random superpositions of r^a exp(-b r), a >= 1, checked against Hardy's inequality."""
    if int(l) != l or l < 0:
        raise InvalidArgument("l must be a non-negative integer")
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    rng = np.random.default_rng(seed)
    details = []
    for _ in range(trials):
        k = int(rng.integers(1, 5))
        coeffs = rng.normal(size=k)
        powers = rng.uniform(1.0, 4.0, size=k)
        rates = rng.uniform(0.2, 3.0, size=k)
        margin = hardy_margin(coeffs, powers, rates, l)
        details.append(({"c": coeffs.tolist(), "a": powers.tolist(), "b": rates.tolist()}, margin))
    return _report(f"hardy-l{l}", details, 0.0, {"seed": seed, "trials": trials})


def hardy_near_optimizer(eps, l=0):
    """Relative Hardy slack of u = r^(1/2+eps) exp(-r); tends to 0 with eps."""
    return hardy_margin([1.0], [0.5 + eps], [1.0], l)


def kato_matrix(grid, l, coupling=CRITICAL_COUPLING):
    mat = -coupling * coulomb_kernel(grid, l)
    mat[np.diag_indices_from(mat)] += grid.nodes
    return mat


def kato_check(grid, l=0, coupling=CRITICAL_COUPLING, tolerance=None):
    """Lowest eigenvalue of |p| - coupling/r in channel l (exact bound 0 at coupling <= 2/pi)."""
    if tolerance is None:
        tolerance = 1e-3 * grid.map_scale
    low = float(linalg.eigvalsh(kato_matrix(grid, l, coupling), subset_by_index=[0, 0])[0])
    info = {"l": l, "coupling": coupling, "n": grid.size, "scale": grid.map_scale, "min_eigenvalue": low}
    return _report("kato", [({"l": l, "coupling": coupling}, low)], tolerance, info)


def ambi_constant(l, R):
    """M_l(R) = (l+1/2)^2 / (R + sqrt(R^2 + (l+1/2)^2))."""
    if not R > 0:
        raise InvalidArgument("R must be positive")
    h = l + 0.5
    return h * h / (R + math.hypot(R, h))


def ambi_scalar_check(l, R, samples=200, tolerance=1e-12):
    """sqrt((l+1/2)^2/r^2 + 1) - 1 >= M_l(R)/r on (0, R], with equality at r = R.

    Margins are relative to M_l(R)/r.  The left side is evaluated as
    x/(sqrt(x+1)+1) to avoid cancellation.
    """
    if int(l) != l or l < 0:
        raise InvalidArgument("l must be a non-negative integer")
    m = ambi_constant(l, R)
    h2 = (l + 0.5) ** 2
    r = np.geomspace(R * 1e-6, R, samples)
    x = h2 / r**2
    lhs = x / (np.sqrt(x + 1.0) + 1.0)
    rhs = m / r
    rel = lhs / rhs - 1.0
    details = [(float(ri), float(e)) for ri, e in zip(r, rel)]
    equality = abs(float(rel[-1]))
    report = _report(f"ambi-l{l}", details, tolerance, {"M": m, "R": R, "equality_residual": equality})
    report.passed = report.passed and equality <= tolerance
    return report


def decay_bound_check(kappa, l_max=30, grid_size=400, factor=1.2, workers=1):
    """D_l (l+1)^2 bounded by factor times its maximum over l <= 5."""
    if l_max < 5:
        raise InvalidArgument("l_max must be >= 5")
    scaled = []
    for l in range(l_max + 1):
        d = channel_shift(l, kappa, grid_size=grid_size) if kappa > 0 else 0.0
        scaled.append((l, d * (l + 1) ** 2))
    head = max(v for l, v in scaled if l <= 5)
    bound = factor * head
    if bound == 0:
        details = [({"l": l}, -v) for l, v in scaled]
    else:
        details = [({"l": l}, (bound - v) / bound) for l, v in scaled]
    info = {"kappa": kappa, "M_hat": max(v for _, v in scaled), "head_max": head, "scaled": scaled}
    return _report("decay", details, 0.0, info)


# Dirichlet spherical-Bessel box basis, used where the potential has a sharp
# inner cutoff that the momentum-space kernels cannot represent.


def spherical_bessel_zeros(l, count):
    """First ``count`` positive zeros of j_l."""
    x = np.arange(0.05, (count + l / 2.0 + 2.0) * math.pi, 0.05)
    f = special.spherical_jn(l, x)
    idx = np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[:count]
    if idx.size < count:
        raise InvalidArgument("zero scan too short")
    return np.array([optimize.brentq(lambda t: special.spherical_jn(l, t), x[i], x[i + 1], xtol=1e-14) for i in idx])


def box_channel_eigenvalues(l, potential, r_inner, box, count, kind="chandrasekhar"):
    """Spectrum of T - v in channel l on [0, box] with Dirichlet walls.

    Basis: jhat_l(k_n r) with j_l(k_n box) = 0, in which the kinetic term is
    diagonal.  v is supported on [r_inner, box] and integrated by panels.
    """
    zeros = spherical_bessel_zeros(l, count)
    k = zeros / box
    norm = np.sqrt(0.5 * box) * zeros * np.abs(special.spherical_jn(l + 1, zeros))
    x, wx = gauss_legendre(12)
    width = math.pi / (2.0 * k[-1])
    edges = np.linspace(r_inner, box, int(math.ceil((box - r_inner) / width)) + 1)
    half = 0.5 * np.diff(edges)
    r = ((0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * x).ravel()
    w = (half[:, None] * wx).ravel()
    phi = (k[:, None] * r[None, :]) * special.spherical_jn(l, k[:, None] * r[None, :]) / norm[:, None]
    vmat = (phi * (w * potential(r))[None, :]) @ phi.T
    mat = -0.5 * (vmat + vmat.T)
    mat[np.diag_indices(count)] += kinetic_diagonal(kind, k)
    return linalg.eigvalsh(mat), float(k[-1])


def lt_ratio_report(gamma, l_max=20, coupling=10.0, box_extra=250.0, k_max=3.0, max_basis=1500):
    """Ratio tr_l[C(v_l)]_-^gamma / ((2l+1) int [v^(1+gamma) + v^(1/2+gamma)]) for v_l = c/r on r >= l^2/4.

    Asserted: the ratio at l_max is at most 1.1 times the ratio at l = 4.
    ``resolved`` in the details is False when the basis cap left the
    channel's momentum range short of (1 + max v) + k_max.
    """
    if not gamma > 0.5:
        raise InvalidArgument("gamma must exceed 1/2")
    if l_max < 4:
        raise InvalidArgument("l_max must be >= 4")
    rows = []
    for l in range(1, l_max + 1):
        r_in = l * l / 4.0
        v_max = coupling / r_in
        box = r_in + box_extra
        want = (1.0 + v_max) + k_max
        count = int(min(max_basis, math.ceil(want * box / math.pi)))

        def v(r, r_in=r_in):
            return np.where(r >= r_in, coupling / r, 0.0)

        eigs, reach = box_channel_eigenvalues(l, v, r_in, box, count)
        neg = -eigs[eigs < 0]
        trace = (2 * l + 1) * float(np.sum(neg**gamma))
        denom = (2 * l + 1) * (
            coupling ** (1 + gamma) * r_in ** (-gamma) / gamma
            + coupling ** (0.5 + gamma) * r_in ** (0.5 - gamma) / (gamma - 0.5)
        )
        rows.append((l, trace / denom, reach >= want))
    ratio = {l: q for l, q, _ in rows}
    growth = ratio[l_max] / ratio[4] - 1.0
    details = [({"l": l, "resolved": ok}, q) for l, q, ok in rows]
    info = {"gamma": gamma, "sup": max(ratio.values()), "growth_l4_to_lmax": growth}
    report = CheckReport("lt-ratio", bool(growth <= 0.1), float(0.1 - growth), 0.0, details, info)
    return report


SUITES = ("banff", "hardy", "kato", "ambi", "decay", "lt")


def run_suite(names, grid_size=400, seed=0, trials=200):
    """Run the named checks in declaration order."""
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InvalidArgument(f"unknown check(s): {', '.join(unknown)}")
    reports = []
    for name in SUITES:
        if name not in names:
            continue
        if name == "banff":
            reports.append(banff_identity_check(build_momentum_grid(grid_size, 1.0)))
        elif name == "hardy":
            per = max(1, trials // 4)
            reports.extend(hardy_trial_check(l, per, seed + l) for l in range(4))
        elif name == "kato":
            reports.append(kato_check(build_momentum_grid(grid_size, 1.0), 0))
        elif name == "ambi":
            for l in range(6):
                for R in (0.1, 1.0, 10.0):
                    reports.append(ambi_scalar_check(l, R))
        elif name == "decay":
            reports.append(decay_bound_check(CRITICAL_COUPLING, 30, grid_size))
        elif name == "lt":
            reports.append(lt_ratio_report(2.0))
    return reports
