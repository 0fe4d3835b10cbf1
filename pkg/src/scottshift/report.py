"""Leading-order energy table E_TF(Z) + (1/4 - s(kappa)) q Z^2.

The rows are the asymptotic right-hand side of the heavy-atom expansion,
not many-body energies.  s(kappa) is computed once at q = 1 and the spin
multiplicity enters only through the factor q.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

from .channel import check_coupling
from .errors import InvalidArgument
from .shift import DEFAULT_GRID, DEFAULT_L_MAX, DEFAULT_WINDOW, ShiftOptions, scott_coefficient
from .thomasfermi import solve_majorana, tf_energy

CSV_FIELDS = ("Z", "kappa", "q", "e_tf", "scott_nonrel", "scott_shift", "e_estimate", "s_error")


@dataclass(frozen=True)
class ScottRow:
    Z: float
    kappa: float
    q: int
    e_tf: float
    scott_nonrel: float
    scott_shift: float
    e_estimate: float
    s_error: float


def make_row(Z, kappa, q, e_tf1, s_value, s_error):
    """One row from E_TF(1; q), s(kappa) and its error estimate."""
    if not Z > 0:
        raise InvalidArgument(f"Z must be positive, got {Z!r}")
    e_tf = e_tf1 * Z ** (7.0 / 3.0)
    nonrel = 0.25 * q * Z**2
    shift = s_value * q * Z**2
    return ScottRow(float(Z), float(kappa), int(q), e_tf, nonrel, shift, e_tf + nonrel - shift, float(s_error))


def scott_table(Zs, kappa, q=2, l_max=DEFAULT_L_MAX, grid_size=DEFAULT_GRID, window=DEFAULT_WINDOW,
                options=ShiftOptions(), solver=None, workers=1, series=None, tf_solution=None):
    """Rows for each Z in ``Zs``.

    ``series`` (a ShiftSeries) and ``tf_solution`` may be passed in to
    reuse earlier computations.
    """
    kappa = check_coupling(kappa)
    if not kappa > 0:
        raise InvalidArgument("scott_table needs kappa > 0")
    if int(q) != q or q < 1:
        raise InvalidArgument(f"q must be a positive integer, got {q!r}")
    Zs = [float(z) for z in Zs]
    if any(not z > 0 for z in Zs):
        raise InvalidArgument("every Z must be positive")
    if series is None:
        series = scott_coefficient(kappa, l_max, grid_size, 0.0, window, None, options, solver, workers)
    elif series.kappa != kappa:
        raise InvalidArgument("supplied shift series is for a different kappa")
    sol = tf_solution if tf_solution is not None else solve_majorana(q=int(q))
    if sol.q != q:
        raise InvalidArgument("supplied TF solution is for a different q")
    e_tf1 = tf_energy(sol, 1.0)
    return [make_row(z, kappa, int(q), e_tf1, series.s_value, series.error_estimate) for z in Zs]


def _fmt(x):
    if isinstance(x, int):
        return str(x)
    return format(x, ".17g")


def rows_to_csv(rows):
    buf = io.StringIO(newline="")
    buf.write(",".join(CSV_FIELDS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(getattr(row, name)) for name in CSV_FIELDS) + "\n")
    return buf.getvalue()


def rows_to_json(rows):
    return json.dumps([asdict(row) for row in rows])
