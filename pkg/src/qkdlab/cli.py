"""Command-line front end: one command per reproduced figure or table.

Every command writes a CSV (header first, ``,`` separated, ``\\n`` line
endings, numbers in lower-case scientific notation with 12 significant
digits).  Strategy commands append ``# security=...`` as the last line.

Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure or an
infeasible match.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import attack, strategies
from .channel import SystemParams, normal_observables

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
THREADS_ENV = "QKDLAB_THREADS"
PARALLEL_MIN_POINTS = 16


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{float(x):.11e}"


def render_csv(header: Sequence[str], rows: Sequence[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    for c in comments:
        buf.write(f"# {c}\n")
    return buf.getvalue()


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    n = int(raw) if raw else 0
    if n < 0:
        raise UsageError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def sweep(fn: Callable, items: Sequence) -> list:
    """Map ``fn`` over ``items`` keeping input order, fanned out over processes."""
    n = min(worker_count(), len(items))
    if n <= 1 or len(items) < PARALLEL_MIN_POINTS:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * n))))


# --------------------------------------------------------------------------
# per-point workers (module level so they pickle)

def _curve_row(d, protocol, mode, mismatch):
    pt = attack.curve_point(d, protocol, mode, mismatch)
    return [pt.delta, pt.qber, pt.conclusive_prob, pt.transmittance]


def _suboptimal_row(d):
    return [d, attack.suboptimal_qber(d), attack.curve_point(d).qber]


def _strategy1_row(d, p, bsteps):
    r = strategies.report_one(p, d, bsteps)
    return [d, r.observables.q_signal, r.observables.e_signal, r.key.rate]


def _strategy2_row(d, p, mismatch, bsteps):
    r = strategies.report_two(p, d, mismatch, bsteps)
    return [d, r.observables.q_signal, r.observables.e_signal, r.key.rate]


# --------------------------------------------------------------------------

def system_params(a: argparse.Namespace) -> SystemParams:
    return SystemParams(alpha=a.alpha, length=a.length, eta_bob=a.eta_bob,
                        e_detector=a.e_detector, p_dark=a.p_dark, p_detector=a.p_detector,
                        mu=a.mu, f_ec=a.f_ec)


def delta_grid(a: argparse.Namespace) -> list[float]:
    if a.points < 1:
        raise UsageError("--points must be >= 1")
    if a.points == 1:
        return [a.delta_min]
    return [float(x) for x in np.linspace(a.delta_min, a.delta_max, a.points)]


def _security_footer(rates: Sequence[float]) -> list[str]:
    out = []
    if any(r > 0.0 for r in rates):
        out.append(f"positive_rate_label={strategies.INSECURE_LABEL}")
    out.append(f"security={strategies.SECURITY_NOTE}")
    return out


def cmd_curve(a):
    rows = sweep(partial(_curve_row, protocol=a.protocol, mode=a.mode, mismatch=a.mismatch),
                 delta_grid(a))
    return render_csv(["delta", "qber", "conclusive_prob", "transmittance"], rows)


def cmd_suboptimal(a):
    rows = sweep(_suboptimal_row, delta_grid(a))
    return render_csv(["delta", "qber_suboptimal", "qber_optimal"], rows)


def cmd_strategy1(a):
    p = system_params(a)
    rows = sweep(partial(_strategy1_row, p=p, bsteps=a.bsteps), delta_grid(a))
    return render_csv(["delta", "q_signal", "e_signal", "rate"], rows,
                      _security_footer([r[3] for r in rows]))


def cmd_fig6(a):
    p = system_params(a)
    grid = delta_grid(a)
    rows = sweep(partial(_strategy1_row, p=p, bsteps=a.bsteps), grid)
    win = strategies.positive_window(p, grid, a.bsteps)
    comments = ["positive_window=none" if win is None else
                f"positive_window={fmt(win[0])},{fmt(win[1])}"]
    comments.append("note=attacked observables carry no distance dependence")
    return render_csv(["delta", "q_signal", "e_signal", "rate"], rows,
                      comments + _security_footer([r[3] for r in rows]))


def cmd_strategy2(a):
    p = system_params(a)
    rows = sweep(partial(_strategy2_row, p=p, mismatch=a.mismatch, bsteps=a.bsteps),
                 delta_grid(a))
    return render_csv(["delta", "q_signal", "e_signal", "rate"], rows,
                      _security_footer([r[3] for r in rows]))


_ROW3 = ["length", "mismatch", "delta", "y0", "gamma", "e_1", "c_1", "q_signal", "e_signal",
         "q_normal", "e_normal", "rate"]


def _row3(p: SystemParams, rep: strategies.StrategyReport) -> list:
    n = normal_observables(p)
    sp = rep.params
    return [p.length, sp.mismatch, sp.delta, sp.y0, sp.gamma, rep.attack.e_1, rep.attack.c_1,
            rep.observables.q_signal, rep.observables.e_signal, n.q_signal, n.e_signal,
            rep.key.rate]


def cmd_strategy3(a):
    p = system_params(a)
    sp = strategies.StrategyParams(a.delta, a.mismatch, a.y0, a.gamma)
    row = _row3(p, strategies.report_three(p, sp, a.bsteps))
    return render_csv(_ROW3, [row], _security_footer([row[-1]]))


def cmd_match(a):
    p = system_params(a)
    res = strategies.match_normal(p, a.mismatch, a.tol, a.bsteps)
    row = _row3(p, res.report)
    return render_csv(_ROW3, [row], [f"feasible_points={res.feasible_points}"]
                      + _security_footer([row[-1]]))


def cmd_table2(a):
    p = system_params(a)
    rows = []
    for m, d in strategies.TABLE2_ROWS:
        combined = strategies.report_two(p, d, m, a.bsteps)
        fake_only = strategies.report_two(p, math.pi / 2, m, a.bsteps)
        rows.append([m, d, combined.key.rate, fake_only.key.rate])
    return render_csv(["mismatch", "delta", "rate", "rate_fake_signals_only"], rows,
                      _security_footer([r[2] for r in rows] + [r[3] for r in rows]))


def cmd_table3(a):
    base = system_params(a)
    rows = []
    for length, m, d, y0, g in strategies.TABLE3_ROWS:
        p = base.at(length=length)
        sp = strategies.StrategyParams(d, m, y0, g)
        rows.append(_row3(p, strategies.report_three(p, sp, a.bsteps)))
    return render_csv(_ROW3, rows, _security_footer([r[-1] for r in rows]))


# --------------------------------------------------------------------------

def _add_system(sp: argparse.ArgumentParser, length: float = 0.0) -> None:
    d = SystemParams()
    sp.add_argument("--alpha", type=float, default=d.alpha, help="fiber loss, dB/km")
    sp.add_argument("--length", type=float, default=length, help="fiber length, km")
    sp.add_argument("--eta-bob", type=float, default=d.eta_bob)
    sp.add_argument("--e-detector", type=float, default=d.e_detector)
    sp.add_argument("--p-dark", type=float, default=None, help="system dark-count probability (default 1e-7)")
    sp.add_argument("--p-detector", type=float, default=None, help="per-detector dark probability")
    sp.add_argument("--mu", type=float, default=d.mu)
    sp.add_argument("--f-ec", type=float, default=d.f_ec)


def _add_grid(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--delta-min", type=float, default=attack.DELTA_MIN)
    sp.add_argument("--delta-max", type=float, default=math.pi / 2)
    sp.add_argument("--points", type=int, default=attack.DEFAULT_GRID_POINTS)


COMMANDS = {
    "curve": cmd_curve,
    "suboptimal": cmd_suboptimal,
    "strategy1": cmd_strategy1,
    "strategy2": cmd_strategy2,
    "strategy3": cmd_strategy3,
    "match": cmd_match,
    "table2": cmd_table2,
    "table3": cmd_table3,
    "fig6": cmd_fig6,
}


def build_parser() -> _Parser:
    p = _Parser(prog="qkdlab", description="Phase-remapping attack analysis.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_: str) -> _Parser:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", default=None, help="key=value file; flags override it")
        s.add_argument("--output", default=None, help="CSV path (default: stdout)")
        return s

    s = add("curve", "minimum QBER versus phase step")
    s.add_argument("--protocol", choices=["bb84", "sarg04"], default="bb84")
    s.add_argument("--mode", choices=["fixed", "optimized"], default="fixed")
    s.add_argument("--mismatch", type=float, default=1.0)
    _add_grid(s)

    s = add("suboptimal", "QBER of the single-element strategy next to the optimum")
    _add_grid(s)

    for name, help_, bsteps in (("strategy1", "phase remapping alone", 3),
                                ("fig6", "strategy one rate window", 3)):
        s = add(name, help_)
        s.add_argument("--bsteps", type=int, default=bsteps)
        _add_system(s)
        _add_grid(s)

    s = add("strategy2", "phase remapping plus fake signals")
    s.add_argument("--mismatch", type=float, default=0.04)
    s.add_argument("--bsteps", type=int, default=0)
    _add_system(s)
    _add_grid(s)

    s = add("strategy3", "fake-signal attack disguised as normal operation")
    s.add_argument("--delta", type=float, default=1.31)
    s.add_argument("--mismatch", type=float, default=0.04)
    s.add_argument("--y0", type=float, default=1e-9)
    s.add_argument("--gamma", type=float, default=0.096)
    s.add_argument("--bsteps", type=int, default=0)
    _add_system(s, length=88.0)

    s = add("match", "search strategy-three parameters matching normal gain and QBER")
    s.add_argument("--mismatch", type=float, default=0.04)
    s.add_argument("--tol", type=float, default=0.10)
    s.add_argument("--bsteps", type=int, default=0)
    _add_system(s, length=88.0)

    for name, help_ in (("table2", "strategy-two key rates"), ("table3", "strategy-three key rates")):
        s = add(name, help_)
        s.add_argument("--bsteps", type=int, default=0)
        _add_system(s)
    return p


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = (t.strip() for t in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = read_config(args.config)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from None
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for k, v in cfg.items():
        if k in ("config", "output", "help") or k not in actions:
            raise UsageError(f"unknown config key {k!r} for {args.command}")
        act = actions[k]
        try:
            val = act.type(v) if act.type else v
        except ValueError:
            raise UsageError(f"bad value for {k}: {v!r}") from None
        if act.choices is not None and val not in act.choices:
            raise UsageError(f"bad value for {k}: {v!r}")
        defaults[k] = val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
        text = COMMANDS[args.command](args)
    except UsageError as e:
        print(f"qkdlab: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except strategies.InfeasibleMatch as e:
        print(f"qkdlab: infeasible: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError) as e:
        print(f"qkdlab: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.output is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        print(f"qkdlab: cannot write {args.output}: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    sys.exit(run())
