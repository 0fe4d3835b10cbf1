"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 numerical failure, 3 invariant
violation.  Failures print one ``reason: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

from . import report, shift, verify
from .cache import PairCache, resolve_cache_dir
from .channel import check_coupling
from .errors import InvalidArgument, InvariantViolation, NumericalFailure, ScottShiftError
from .thomasfermi import solve_majorana, tf_energy, virial_residual

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3
COMMANDS = ("shift", "scott", "scan", "tf", "table", "verify")


class UsageError(ScottShiftError):
    reason = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _real(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return value


def _real_list(text):
    parts = [p for p in text.split(",") if p.strip()]
    return [_real(p) for p in parts]


def _name_list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


@dataclass
class RunConfig:
    command: str
    kappa: float = None
    kappa_list: list = field(default_factory=list)
    l: int = None
    mu: float = 0.0
    l_max: int = shift.DEFAULT_L_MAX
    grid_size: int = shift.DEFAULT_GRID
    window: int = shift.DEFAULT_WINDOW
    q: int = 2
    Z_list: list = field(default_factory=list)
    out_path: str = None
    format: str = "json"
    cache_dir: str = None
    tolerance: float = None
    suite: list = field(default_factory=list)
    workers: int = 1

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.grid_size < 8:
            raise InvalidArgument(f"--grid must be >= 8, got {self.grid_size}")
        if self.mu < 0:
            raise InvalidArgument(f"--mu must be >= 0, got {self.mu}")
        if self.workers < 1:
            raise InvalidArgument("--workers must be >= 1")
        if self.q < 1:
            raise InvalidArgument(f"--q must be >= 1, got {self.q}")
        if self.command in ("shift", "scott", "table"):
            if self.kappa is None:
                raise UsageError(f"{self.command} needs --kappa")
            check_coupling(self.kappa)
            if self.command != "shift" and not self.kappa > 0:
                raise InvalidArgument("kappa must be positive")
        if self.command == "scan":
            for k in self.kappa_list:
                check_coupling(k)
                if not k > 0:
                    raise InvalidArgument("kappa must be positive")
        if self.command in ("scott", "scan", "table") and self.l_max < 8:
            raise InvalidArgument(f"--lmax must be >= 8, got {self.l_max}")
        if self.command == "table" and not self.Z_list:
            raise UsageError("table needs --Z")
        if self.command == "verify":
            unknown = [s for s in self.suite if s not in verify.SUITES]
            if unknown:
                raise InvalidArgument(f"unknown check(s): {', '.join(unknown)}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise InvalidArgument("--tolerance must be positive")
        return self


def build_parser():
    parser = _Parser(prog="scottshift", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--kappa", type=_real, help="coupling Z/c in (0, 2/pi]")
    parser.add_argument("--kappas", type=_real_list, default=[], help="comma-separated ascending couplings (scan)")
    parser.add_argument("--l", type=int, dest="l", help="single channel for the shift command")
    parser.add_argument("--mu", type=_real, default=0.0)
    parser.add_argument("--lmax", type=int, default=shift.DEFAULT_L_MAX)
    parser.add_argument("--grid", type=int, default=shift.DEFAULT_GRID)
    parser.add_argument("--window", type=int, default=shift.DEFAULT_WINDOW)
    parser.add_argument("--q", type=int, default=2, help="spin states per orbital")
    parser.add_argument("--Z", type=_real_list, default=[], help="comma-separated nuclear charges (table)")
    parser.add_argument("--format", choices=("csv", "json"), default="json")
    parser.add_argument("--out", help="output file (default stdout)")
    parser.add_argument("--cache-dir", help="channel cache directory (overridden by $SCOTTSHIFT_CACHE)")
    parser.add_argument("--tolerance", type=_real, help="fail if the error estimate exceeds this")
    parser.add_argument("--suite", type=_name_list, default=list(verify.SUITES[:4]),
                        help="comma-separated checks: " + ",".join(verify.SUITES))
    parser.add_argument("--workers", type=int, default=1)
    return parser


def parse_config(argv):
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=ns.command, kappa=ns.kappa, kappa_list=ns.kappas, l=ns.l, mu=ns.mu, l_max=ns.lmax,
        grid_size=ns.grid, window=ns.window, q=ns.q, Z_list=ns.Z, out_path=ns.out, format=ns.format,
        cache_dir=ns.cache_dir, tolerance=ns.tolerance, suite=ns.suite, workers=ns.workers,
    )
    return cfg.validate()


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _csv(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json(obj):
    return json.dumps(obj) + "\n"


def _cmd_shift(cfg, solver):
    ls = [cfg.l] if cfg.l is not None else range(cfg.l_max + 1)
    rows = []
    for l in ls:
        if l < 0:
            raise InvalidArgument("--l must be >= 0")
        rows.append((int(l), shift.channel_shift(l, cfg.kappa, cfg.mu, None, None, cfg.grid_size, solver=solver)))
    if cfg.format == "csv":
        return _csv(("l", "D"), rows), EXIT_OK
    return _json({"kappa": cfg.kappa, "mu": cfg.mu, "shifts": [[l, d] for l, d in rows]}), EXIT_OK


def _cmd_scott(cfg, solver):
    series = shift.scott_coefficient(cfg.kappa, cfg.l_max, cfg.grid_size, cfg.mu, cfg.window, cfg.tolerance,
                                     solver=solver, workers=cfg.workers)
    if cfg.format == "csv":
        header = ("kappa", "mu", "l_max", "grid", "tail_a", "tail_b", "tail_sum", "s", "error")
        row = (series.kappa, series.mu, cfg.l_max, cfg.grid_size, series.tail_a, series.tail_b, series.tail_sum,
               series.s_value, series.error_estimate)
        return _csv(header, [row]), EXIT_OK
    return series.to_json() + "\n", EXIT_OK


def _cmd_scan(cfg, solver):
    result = shift.scott_scan(cfg.kappa_list, cfg.l_max, cfg.grid_size, cfg.mu, cfg.window,
                              solver=solver, workers=cfg.workers)
    if not result.monotone:
        pairs = "; ".join(f"{a!r}->{b!r}" for a, b in result.violations)
        print(f"warning: invariant-violation: s not increasing beyond error bars at {pairs}", file=sys.stderr)
    if cfg.format == "csv":
        return _csv(("kappa", "s", "error"), result.rows), EXIT_OK
    payload = {
        "rows": [[k, s, e] for k, s, e in result.rows],
        "monotone": result.monotone,
        "violations": [[a, b] for a, b in result.violations],
    }
    return _json(payload), EXIT_OK


def _cmd_tf(cfg, solver):
    sol = solve_majorana(q=cfg.q)
    energy = tf_energy(sol, 1.0)
    if cfg.format == "csv":
        return _csv(("x", "phi", "dphi"), zip(sol.x.tolist(), sol.phi_values.tolist(), sol.dphi_values.tolist())), EXIT_OK
    data = sol.to_dict()
    data["virial_residual"] = virial_residual(sol)
    data["energies"] = [[z, energy * z ** (7.0 / 3.0)] for z in cfg.Z_list]
    return _json(data), EXIT_OK


def _cmd_table(cfg, solver):
    rows = report.scott_table(cfg.Z_list, cfg.kappa, cfg.q, cfg.l_max, cfg.grid_size, cfg.window,
                              solver=solver, workers=cfg.workers)
    if cfg.format == "csv":
        return report.rows_to_csv(rows), EXIT_OK
    return report.rows_to_json(rows) + "\n", EXIT_OK


def _cmd_verify(cfg, solver):
    reports = verify.run_suite(cfg.suite, grid_size=cfg.grid_size)
    status = EXIT_OK if all(r.passed for r in reports) else EXIT_INVARIANT
    if cfg.format == "csv":
        rows = [(r.name, r.passed, r.worst_margin, r.tolerance) for r in reports]
        return _csv(("name", "passed", "worst_margin", "tolerance"), rows), status
    return _json([r.to_dict() for r in reports]), status


_DISPATCH = {
    "shift": _cmd_shift,
    "scott": _cmd_scott,
    "scan": _cmd_scan,
    "tf": _cmd_tf,
    "table": _cmd_table,
    "verify": _cmd_verify,
}


def _emit(text, out_path):
    if out_path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with io.open(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fail(exc):
    message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
    print(f"{exc.reason}: {message}", file=sys.stderr)


def run(argv=None):
    """Parse ``argv``, run the command and return the exit status."""
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else list(argv))
        cache_dir = resolve_cache_dir(cfg.cache_dir)
        solver = PairCache(cache_dir) if cache_dir else None
        text, status = _DISPATCH[cfg.command](cfg, solver)
        _emit(text, cfg.out_path)
        return status
    except (UsageError, InvalidArgument) as exc:
        _fail(exc)
        return EXIT_USAGE
    except InvariantViolation as exc:
        _fail(exc)
        return EXIT_INVARIANT
    except (NumericalFailure, ScottShiftError) as exc:
        _fail(exc)
        return EXIT_NUMERICAL


def main():
    sys.exit(run())
