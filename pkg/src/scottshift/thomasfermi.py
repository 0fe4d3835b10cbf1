"""Thomas-Fermi atom: screening function, density, energy and screening potentials.

Units are atomic (hbar = m = e = 1).  The neutral atom of charge Z reduces
to the Majorana-type problem phi'' = phi^(3/2) / sqrt(x), phi(0) = 1,
phi(inf) = 0, with r = b_Z x and the effective potential Z phi(x) / r.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

from .channel import CRITICAL_COUPLING, RadialTable
from .errors import InvalidArgument, InvariantViolation, NoSolution, NumericalFailure

X_START = 1e-6
# linearised correction to the Sommerfeld tail 144/x^3 decays like x^-LAMBDA
TAIL_EXPONENT = (math.sqrt(73.0) - 7.0) / 2.0
_NODES_PER_DECADE = 64


def sommerfeld_tail(x, coeffs):
    """phi and phi' of 144/x^3 + F x^(-3-L) + G x^(-3-2L) for coeffs = (F, G)."""
    x = np.asarray(x, dtype=float)
    f, g = coeffs
    e1, e2 = 3.0 + TAIL_EXPONENT, 3.0 + 2.0 * TAIL_EXPONENT
    phi = 144.0 / x**3 + f * x**-e1 + g * x**-e2
    dphi = -432.0 / x**4 - e1 * f * x ** (-e1 - 1.0) - e2 * g * x ** (-e2 - 1.0)
    return phi, dphi


def gamma_tf(q):
    return 0.5 * (6.0 * math.pi**2 / q) ** (2.0 / 3.0)


def length_scale(q, Z=1.0):
    """b_Z with r = b_Z x in the dimensionless equation."""
    return 0.5 * (3.0 * math.pi / (2.0 * q)) ** (2.0 / 3.0) * Z ** (-1.0 / 3.0)


def _rhs(x, y):
    phi, dphi = y
    return [dphi, max(phi, 0.0) ** 1.5 / math.sqrt(x)]


def _series_start(slope, x):
    s = math.sqrt(x)
    return [1.0 + slope * x + (4.0 / 3.0) * x * s, slope + 2.0 * s]


def _hit_zero(x, y):
    return y[0]


_hit_zero.terminal = True
_hit_zero.direction = -1


def _turns_up(x, y):
    return y[1]


_turns_up.terminal = True
_turns_up.direction = 1


def _shoot(slope, x_max=1e4, dense=False):
    """Integrate from the series start; returns (solution, outcome)."""
    sol = integrate.solve_ivp(
        _rhs,
        (X_START, x_max),
        _series_start(slope, X_START),
        method="DOP853",
        rtol=1e-13,
        atol=1e-15,
        events=(_hit_zero, _turns_up),
        dense_output=dense,
    )
    if sol.status == -1:
        raise NumericalFailure(f"TF integration failed at slope {slope!r}: {sol.message}")
    if sol.t_events[0].size:
        return sol, "crosses"
    if sol.t_events[1].size:
        return sol, "turns"
    return sol, "undecided"


@dataclass(frozen=True, eq=False)
class TfSolution:
    """Neutral TF solution at Z = 1 for ``q`` spin states.

    ``x``, ``phi`` and ``dphi`` tabulate the screening function on a log
    grid.  Beyond ``x_match`` phi is the Sommerfeld tail
    of :func:`sommerfeld_tail` with ``tail_coeffs``; below the first node it
    is the small-x series.
    """

    slope0: float
    q: int
    x: np.ndarray
    phi_values: np.ndarray
    dphi_values: np.ndarray
    x_match: float
    tail_coeffs: tuple
    K: float = float("nan")
    A: float = float("nan")
    R: float = float("nan")
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        u = np.log(self.x)
        object.__setattr__(self, "_spline", CubicHermiteSpline(u, self.phi_values, self.x * self.dphi_values))

    @property
    def gamma_tf(self):
        return gamma_tf(self.q)

    @property
    def b(self):
        return length_scale(self.q)

    @property
    def energy1(self):
        return self.K - self.A + self.R

    @property
    def slope_energy(self):
        """E_TF(1) from the initial slope, (3/7) phi'(0) / b."""
        return 3.0 / 7.0 * self.slope0 / self.b

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        small = x < self.x[0]
        tail = x > self.x_match
        mid = ~(small | tail)
        xs = x[small]
        out[small] = 1.0 + self.slope0 * xs + (4.0 / 3.0) * xs**1.5
        out[mid] = self._spline(np.log(x[mid]))
        xt = x[tail]
        out[tail] = sommerfeld_tail(xt, self.tail_coeffs)[0]
        return out

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        small = x < self.x[0]
        tail = x > self.x_match
        mid = ~(small | tail)
        out[small] = self.slope0 + 2.0 * np.sqrt(x[small])
        out[mid] = self._spline(np.log(x[mid]), 1) / x[mid]
        xt = x[tail]
        out[tail] = sommerfeld_tail(xt, self.tail_coeffs)[1]
        return out

    def to_dict(self):
        return {
            "slope0": self.slope0,
            "q": self.q,
            "gamma_tf": self.gamma_tf,
            "b": self.b,
            "x_match": self.x_match,
            "tail_coeffs": list(self.tail_coeffs),
            "K": self.K,
            "A": self.A,
            "R": self.R,
            "energy1": self.energy1,
            "slope_energy": self.slope_energy,
            "x": self.x.tolist(),
            "phi": self.phi_values.tolist(),
            "dphi": self.dphi_values.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["slope0"], int(data["q"]), np.array(data["x"]), np.array(data["phi"]), np.array(data["dphi"]),
            data["x_match"], tuple(data["tail_coeffs"]), data["K"], data["A"], data["R"],
        )


def _bracket_slope(tol):
    lo, hi = -1.60, -1.57
    if _shoot(lo)[1] != "crosses" or _shoot(hi)[1] != "turns":
        raise NumericalFailure("TF slope bracket [-1.60, -1.57] does not straddle the neutral solution")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        outcome = _shoot(mid)[1]
        if outcome == "crosses":
            lo = mid
        elif outcome == "turns":
            hi = mid
        else:
            raise NumericalFailure(f"TF shooting undecided at slope {mid!r}")
    return lo, hi


def solve_majorana(tol=1e-10, q=2):
    """Neutral TF screening function by shooting on phi'(0).

    ``tol`` bounds phi at the outer end of the tabulation; the slope
    bisection itself is carried to the last representable bracket.
    """
    if not 1e-12 < tol < 1e-3:
        raise InvalidArgument(f"tol must lie in (1e-12, 1e-3), got {tol!r}")
    if int(q) != q or q < 1:
        raise InvalidArgument(f"q must be a positive integer, got {q!r}")
    lo, hi = _bracket_slope(1e-15)
    sol_lo, _ = _shoot(lo, dense=True)
    sol_hi, _ = _shoot(hi, dense=True)
    x_stop = min(sol_lo.t[-1], sol_hi.t[-1])

    # the two bracketing branches agree until the instability takes over
    probe = np.geomspace(1.0, x_stop, 2000)
    a, c = sol_lo.sol(probe)[0], sol_hi.sol(probe)[0]
    split = np.flatnonzero(np.abs(c - a) > 1e-7 * np.abs(0.5 * (a + c)))
    if split.size == 0 or split[0] == 0:
        raise NumericalFailure("could not locate the TF matching radius")
    x_match = float(probe[split[0] - 1])
    phi_m, dphi_m = 0.5 * (sol_lo.sol(x_match) + sol_hi.sol(x_match))
    # match value and slope with the first two Sommerfeld corrections
    e1, e2 = 3.0 + TAIL_EXPONENT, 3.0 + 2.0 * TAIL_EXPONENT
    lhs = np.array([[x_match**-e1, x_match**-e2], [-e1 * x_match ** (-e1 - 1), -e2 * x_match ** (-e2 - 1)]])
    rhs = np.array([phi_m - 144.0 / x_match**3, dphi_m + 432.0 / x_match**4])
    tail_coeffs = tuple(float(c) for c in np.linalg.solve(lhs, rhs))

    x_end = max((144.0 / tol) ** (1.0 / 3.0), 2.0 * x_match)
    decades = math.log10(x_end / X_START)
    x = np.geomspace(X_START, x_end, int(decades * _NODES_PER_DECADE) + 1)
    inner = x <= x_match
    y = 0.5 * (sol_lo.sol(x[inner]) + sol_hi.sol(x[inner]))
    xt = x[~inner]
    t_phi, t_dphi = sommerfeld_tail(xt, tail_coeffs)
    phi_v = np.concatenate([y[0], t_phi])
    dphi_v = np.concatenate([y[1], t_dphi])
    slope = 0.5 * (lo + hi)
    bare = TfSolution(slope, int(q), x, phi_v, dphi_v, x_match, tail_coeffs)
    K, A, R = _functional_terms(bare)
    return TfSolution(slope, int(q), x, phi_v, dphi_v, x_match, tail_coeffs, K, A, R)


def _log_grid(r_min, r_max, per_unit=80):
    """Uniform grid in log r; trapezoid weights for integrals in dr."""
    u = np.linspace(math.log(r_min), math.log(r_max), int(per_unit * math.log(r_max / r_min)) + 1)
    r = np.exp(u)
    w = np.full(u.size, u[1] - u[0]) * r
    w[0] *= 0.5
    w[-1] *= 0.5
    return r, w


def _functional_terms(sol):
    """K, A, R at Z = 1 by quadrature of the density itself.

    The integrands vanish like powers of r at both ends, so the trapezoid
    rule in log r converges geometrically.  The Hartree term uses the
    enclosed mass from a cumulative integral of rho, not the ODE.
    """
    b, g = sol.b, sol.gamma_tf
    r, w = _log_grid(1e-16, 1e8)
    rho = (np.maximum(sol.phi(r / b), 0.0) / (g * r)) ** 1.5
    shell = 4.0 * math.pi * r**2 * rho
    K = 0.6 * g * float(np.dot(w, shell * rho ** (2.0 / 3.0)))
    A = float(np.dot(w, shell / r))
    du = math.log(r[1] / r[0])
    enclosed = integrate.cumulative_trapezoid(shell * r, dx=du, initial=0.0)
    enclosed += 2.0 / 3.0 * shell[0] * r[0]  # rho ~ r^-3/2 below the first node
    R = float(np.dot(w, shell * enclosed / r))
    return K, A, R


@dataclass(frozen=True, eq=False)
class RadialDensity:
    """rho_Z(r) for the neutral TF atom, evaluated through the Z = 1 solution."""

    Z: float
    solution: TfSolution
    r: np.ndarray
    values: np.ndarray
    total_mass: float

    @property
    def b(self):
        return length_scale(self.solution.q, self.Z)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            phi = np.maximum(self.solution.phi(r / self.b), 0.0)
            return (self.Z * phi / (self.solution.gamma_tf * r)) ** 1.5

    def to_dict(self):
        return {"Z": self.Z, "total_mass": self.total_mass, "r": self.r.tolist(), "rho": self.values.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())


def tf_density(sol, Z):
    if not Z > 0:
        raise InvalidArgument(f"Z must be positive, got {Z!r}")
    b = length_scale(sol.q, Z)
    r_tab = b * np.geomspace(1e-6, 1e4, 401)
    probe = RadialDensity(float(Z), sol, r_tab, np.zeros_like(r_tab), 0.0)
    r, w = _log_grid(1e-16 * b, 1e8 * b)
    mass = float(np.dot(w, 4.0 * math.pi * r**2 * probe(r)))
    return RadialDensity(float(Z), sol, r_tab, probe(r_tab), mass)


def tf_energy(sol, Z=1.0, virial_tol=1e-3, slope_tol=2e-3):
    """Z^(7/3) (K - A + R) with the virial and slope-formula checks enforced."""
    if not Z > 0:
        raise InvalidArgument(f"Z must be positive, got {Z!r}")
    e1 = sol.energy1
    virial = abs(2.0 * sol.K - sol.A + sol.R) / abs(e1)
    if virial > virial_tol:
        raise InvariantViolation(f"TF virial residual {virial:.3e} exceeds {virial_tol:.1e}")
    mismatch = abs(e1 / sol.slope_energy - 1.0)
    if mismatch > slope_tol:
        raise InvariantViolation(f"TF functional and slope energies differ by {mismatch:.3e}")
    return e1 * Z ** (7.0 / 3.0)


def virial_residual(sol):
    return abs(2.0 * sol.K - sol.A + sol.R) / abs(sol.energy1)


# Shell integrals for radial densities.  For a shell of radius s seen from a
# point at distance r, the distance d = |x - y| runs over [|r-s|, r+s] with
# surface measure (2 pi s / r) d dd.  Integrals over s use Gauss-Legendre
# panels in log s, split where the integrands have kinks.

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_PANEL_WIDTH = 0.5
_LOG_SPAN = 40.0


def _log_nodes(a, c):
    """Nodes and weights for int_a^c f(s) ds, a = 0 and c = inf allowed."""
    if c == np.inf:
        u0, u1 = math.log(a), math.log(a) + _LOG_SPAN
    elif a == 0:
        u0, u1 = math.log(c) - _LOG_SPAN, math.log(c)
    else:
        u0, u1 = math.log(a), math.log(c)
    panels = max(1, int(math.ceil((u1 - u0) / _PANEL_WIDTH)))
    edges = np.linspace(u0, u1, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel()
    s = np.exp(u)
    return s, w * s


def _piecewise_nodes(density, breaks, lower=0.0, upper=np.inf):
    """Nodes on (lower, upper) split at ``breaks`` and at the density's own kinks."""
    pts = set(float(p) for p in breaks) | set(getattr(density, "breaks", ()))
    edges = [lower] + sorted(p for p in pts if lower < p < upper) + [upper]
    parts = [_log_nodes(a, c) for a, c in zip(edges, edges[1:]) if c > a]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def ball_mass(density, r, R):
    """Mass of rho inside the ball of radius R centred at distance r from 0."""
    if r < 0 or R < 0:
        raise InvalidArgument("r and R must be non-negative")
    if R == 0:
        return 0.0
    total = 0.0
    if R > r:
        s, w = _piecewise_nodes(density, (), 0.0, R - r)
        total += float(np.dot(w, 4.0 * math.pi * s**2 * density(s)))
    lo, hi = abs(r - R), r + R
    if r > 0 and hi > lo:
        s, w = _piecewise_nodes(density, (), lo, hi)
        # fraction of the shell at s lying within distance R of the centre
        frac = (R * R - (r - s) ** 2) / (4.0 * r * s)
        total += float(np.dot(w, 4.0 * math.pi * s**2 * density(s) * frac))
    return total


def hole_radius(density, r):
    """Smallest R with ball_mass(r, R) = 1/2, by bisection."""
    if r < 0:
        raise InvalidArgument("r must be non-negative")
    if density.total_mass < 0.5:
        raise NoSolution(f"total mass {density.total_mass!r} is below 1/2, the hole radius is undefined")
    hi = max(r, density.b)
    while ball_mass(density, r, hi) < 0.5:
        hi *= 2.0
        if hi > 1e12 * density.b:
            raise NumericalFailure("hole radius search did not bracket the root")
    return optimize.bisect(lambda R: ball_mass(density, r, R) - 0.5, 0.0, hi, xtol=1e-14 * hi, rtol=1e-15, maxiter=200)


def newton_potential(density, r):
    """(rho * |.|^-1)(r) via Newton's theorem."""
    if r < 0:
        raise InvalidArgument("r must be non-negative")
    if r == 0:
        s, w = _piecewise_nodes(density, [density.b])
        return float(np.dot(w, 4.0 * math.pi * s * density(s)))
    s, w = _piecewise_nodes(density, (), 0.0, r)
    inner = float(np.dot(w, 4.0 * math.pi * s**2 * density(s))) / r
    s, w = _piecewise_nodes(density, (), r)
    return inner + float(np.dot(w, 4.0 * math.pi * s * density(s)))


def screening_potential(density, r, R=None):
    """chi_TF(r): Coulomb potential of rho with the exchange hole removed."""
    if r < 0:
        raise InvalidArgument("r must be non-negative")
    if R is None:
        R = hole_radius(density, r)
    if r == 0:
        s, w = _piecewise_nodes(density, (), R)
        return float(np.dot(w, 4.0 * math.pi * s * density(s)))
    s, w = _piecewise_nodes(density, [abs(r - R), r, r + R])
    far = r + s
    near = np.maximum(np.abs(r - s), np.minimum(far, R))
    return float(np.dot(w, 2.0 * math.pi * s / r * (far - near) * density(s)))


def chi_scaled(density, kappa, Z, x, chi_tf=None):
    """kappa^2 Z^-2 chi_TF(kappa x / Z); ``chi_tf`` may supply a precomputed chi_TF."""
    if not 0 <= kappa <= CRITICAL_COUPLING * (1 + 4 * np.finfo(float).eps):
        raise InvalidArgument(f"kappa must lie in [0, 2/pi], got {kappa!r}")
    if not Z > 0:
        raise InvalidArgument(f"Z must be positive, got {Z!r}")
    if kappa == 0:
        return 0.0
    chi = chi_tf if chi_tf is not None else (lambda r: screening_potential(density, r))
    return kappa**2 / Z**2 * chi(kappa * x / Z)


def chi_table(density, kappa, Z, x_min=1e-4, x_max=1e6, points=121):
    """chi_Z tabulated on a log grid for the screened channel operators.

    At large x, chi_Z approaches kappa (Z - 1/2) / (Z x): everything but
    the hole mass screens the nucleus.  That Coulomb part is declared as the
    table's tail charge.
    """
    if not 0 < kappa <= CRITICAL_COUPLING * (1 + 4 * np.finfo(float).eps):
        raise InvalidArgument(f"kappa must lie in (0, 2/pi], got {kappa!r}")
    x = np.geomspace(x_min, x_max, points)
    values = np.array([chi_scaled(density, kappa, Z, xi) for xi in x])
    charge = kappa * max(density.Z - 0.5, 0.0) / Z
    return RadialTable(x, values, charge)
