"""Command line driver.

Subcommands: ``simulate-lattice``, ``simulate-spde``, ``markov``,
``predict-ek``, ``renorm-constants`` and ``regstruct``.  Options can also be
given in an INI file passed with ``--config``; the section named after the
subcommand supplies defaults and command-line flags win.  Output files are
written below ``--out`` (or ``$SPDELAB_OUT``) when one is given, and every
result is echoed to stdout.

Exit codes: 0 on success, 1 on invalid input, 2 on a numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kramers, lattice, markov, regstruct, spde
from .gaussian import renorm_constants_3d, wick_constant_CN
from .records import SCHEMA_VERSION, NumericalAbort, dump_json, hits_csv, table_csv, write_text

OUT_ENV = "SPDELAB_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> _Parser:
    p = _Parser(prog="spdelab", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", type=Path, help="INI file with one section per subcommand")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate-lattice", help="Euler-Maruyama transitions of the coupled double-well lattice")
    s.add_argument("--N", type=int, default=2)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--eps", type=float, nargs="+", required=True, help="noise level(s); several values run a sweep")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--runs", type=int, default=100)
    s.add_argument("--t-max", type=float, default=None)
    s.add_argument("--hit-radius", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("simulate-spde", help="Galerkin Allen-Cahn transitions from phi=-1 to phi=+1")
    s.add_argument("--d", type=int, default=1, choices=(1, 2))
    s.add_argument("--L", type=float, default=1.0)
    s.add_argument("--N", type=int, default=16)
    s.add_argument("--eps", type=float, nargs="+", required=True, help="noise level(s); several values run a sweep")
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--runs", type=int, default=100)
    s.add_argument("--t-max", type=float, default=None)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--hit-radius", type=float, default=0.2)
    s.add_argument("--renormalize", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("markov", help="potential theory of a reversible chain given as an edge list")
    s.add_argument("--edges", type=Path, required=True, help="lines 'x y p(x,y)', optional 'pi' block")
    s.add_argument("--A", type=int, nargs="+", required=True)
    s.add_argument("--B", type=int, nargs="+", required=True)
    s.add_argument("--mc-runs", type=int, default=0, help="Monte Carlo check from each state of A")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("predict-ek", help="Eyring-Kramers prediction for the field equation")
    s.add_argument("--d", type=int, default=1, choices=(1, 2))
    s.add_argument("--L", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--theta", type=float, default=0.0)

    s = sub.add_parser("renorm-constants", help="renormalisation constants for a list of cutoffs")
    s.add_argument("--d", type=int, default=3, choices=(2, 3))
    s.add_argument("--N", type=int, nargs="+", required=True)
    s.add_argument("--L", type=float, default=1.0)

    s = sub.add_parser("regstruct", help="symbols, coproducts and renormalisation of the regularity structure")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true", help="reference symbols of degree up to 3/2")
    g.add_argument("--list-all", action="store_true", help="every generated symbol up to --cap")
    g.add_argument("--coproduct", metavar="SYMBOL")
    g.add_argument("--renorm", metavar="SYMBOL")
    s.add_argument("--cap", type=Fraction, default=Fraction(3, 2))
    s.add_argument("--dim", type=int, default=3)
    return p


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    pre = _Parser(add_help=False)
    pre.add_argument("--config", type=Path)
    pre.add_argument("--out", type=Path)
    known, rest = pre.parse_known_args(argv)
    command = next((t for t in rest if t in COMMANDS), None)
    if known.config is None or command is None:
        return parser.parse_args(argv)
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(known.config) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    if not cp.has_section(command):
        return parser.parse_args(argv)
    items = dict(cp.items(command))
    actions = {a.dest: a for a in _subparser(parser, command)._actions if a.dest != "help"}
    tokens = []
    for key, value in items.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"unknown key {key!r} in section [{command}]")
        flag = f"--{dest.replace('_', '-')}"
        if actions[dest].nargs == 0:
            on = value.strip().lower() in ("", "1", "true", "yes", "on")
            if on:
                tokens.append(flag)
            elif isinstance(actions[dest], argparse.BooleanOptionalAction):
                tokens.append(f"--no-{dest.replace('_', '-')}")
        elif actions[dest].nargs == "+":
            tokens += [flag] + value.replace(",", " ").split()
        else:
            tokens += [flag, value]
    # config first, then the user's flags so that flags win
    head = argv[: argv.index(command) + 1]
    tail = argv[argv.index(command) + 1 :]
    return parser.parse_args(head + tokens + tail)


def _subparser(parser: _Parser, name: str) -> _Parser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _out_dir(args) -> Path | None:
    if args.out is not None:
        return args.out
    env = os.environ.get(OUT_ENV)
    return Path(env) if env else None


def _emit(out: Path | None, name: str, text: str) -> None:
    if out is not None:
        write_text(out / name, text)


# subcommands ----------------------------------------------------------------


def _lattice_job(job):
    N, gamma, eps, dt, t_max, hit_radius, seed, runs = job
    cfg = lattice.SdeConfig(eps=eps, dt=dt, t_max=t_max, seed=seed, hit_radius=hit_radius)
    return lattice.transition_batch(N, gamma, cfg, runs)


def _spde_job(job):
    cfg, runs = job
    return spde.transition_time_experiment(cfg, runs)


def _run_jobs(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _report_sweep(out, tag, eps_list, batches, extra):
    rows = []
    for eps, b in zip(eps_list, batches):
        _emit(out, f"{tag}_hits_eps{eps:g}.csv", hits_csv(b.records))
        rows.append([eps, b.mean, b.stderr, len(b.records), b.n_timeouts])
    _emit(out, f"{tag}_summary.csv", table_csv(["eps", "mean", "stderr", "n_runs", "n_timeouts"], rows))
    summary = {"runs": [b.to_dict() for b in batches], **extra}
    if len(eps_list) >= 2:
        x = 1.0 / np.array(eps_list)
        y = np.log([b.mean for b in batches])
        if np.all(np.isfinite(y)):
            summary["arrhenius_slope"] = float(np.polyfit(x, y, 1)[0])
    text = dump_json(summary)
    _emit(out, f"{tag}_summary.json", text)
    sys.stdout.write(text)


def cmd_simulate_lattice(args) -> int:
    jobs = [(args.N, args.gamma, e, args.dt, args.t_max, args.hit_radius, args.seed, args.runs) for e in args.eps]
    batches = _run_jobs(_lattice_job, jobs, args.workers)
    pred = {f"{e:g}": lattice.eyring_kramers_time(args.N, args.gamma, e) for e in args.eps} if args.gamma > lattice.gamma_one(args.N) else {}
    _report_sweep(_out_dir(args), "lattice", args.eps, batches, {"eyring_kramers": pred})
    return 0


def cmd_simulate_spde(args) -> int:
    cfgs = [
        spde.SpdeConfig(
            d=args.d, L=args.L, N=args.N, eps=e, dt=args.dt, t_max=args.t_max, seed=args.seed,
            renormalize=args.renormalize, theta=args.theta, hit_radius=args.hit_radius,
        )
        for e in args.eps
    ]
    batches = _run_jobs(_spde_job, [(c, args.runs) for c in cfgs], args.workers)
    pred = {}
    for c in cfgs:
        try:
            pred[f"{c.eps:g}"] = kramers.ek_predict_galerkin(c.d, c.L, c.N, c.eps, c.theta, c.renormalize).value
        except (ValueError, OverflowError):
            pass
    _report_sweep(_out_dir(args), "spde", args.eps, batches, {"eyring_kramers_galerkin": pred})
    return 0


def cmd_markov(args) -> int:
    try:
        chain = markov.parse_edge_list(args.edges.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read edge list: {exc}") from exc
    sol = markov.committor(chain, args.A, args.B)
    flow = markov.harmonic_unit_flow(chain, args.A, args.B)
    markov.validate_flow(chain, args.A, args.B, flow)
    tau = markov.mean_hitting_time(chain, args.B)
    res = {
        "n_states": chain.n_states,
        "A": sorted(set(args.A)),
        "B": sorted(set(args.B)),
        "committor": sol.h,
        "capacity": sol.cap,
        "dirichlet_upper": markov.dirichlet_upper_bound(chain, args.A, args.B, sol.h),
        "thomson_lower": markov.thomson_lower_bound(chain, args.A, args.B, flow),
        "equilibrium_measure": sol.nu,
        "mean_time_to_B_from_nu": float(np.dot(sol.nu, tau)),
        "magic_formula": float(np.sum(chain.pi * sol.h) / sol.cap),
    }
    if args.mc_runs > 0:
        res["monte_carlo"] = [
            vars(markov.mc_oracle(chain, int(a), args.A, args.B, args.mc_runs, args.seed + i))
            for i, a in enumerate(sorted(set(args.A)))
        ]
    text = dump_json(res)
    out = _out_dir(args)
    _emit(out, "markov.json", text)
    _emit(out, "committor.csv", table_csv(["state", "pi", "h"], zip(range(chain.n_states), chain.pi.tolist(), sol.h.tolist())))
    sys.stdout.write(text)
    return 0


def cmd_predict_ek(args) -> int:
    if args.d == 1:
        pred = kramers.ek_predict_1d(args.L, args.eps, N=args.N or 512)
    else:
        pred = kramers.ek_predict_2d(args.L, args.eps, N=args.N or 256, theta=args.theta)
    if not math.isfinite(pred.value):
        raise NumericalAbort("prediction overflowed; increase eps")
    text = dump_json({"d": args.d, "L": args.L, **pred.to_dict()})
    _emit(_out_dir(args), "predict_ek.json", text)
    sys.stdout.write(text)
    return 0


def cmd_renorm_constants(args) -> int:
    rows = []
    if args.d == 3:
        header = ["N", "C1", "C2", "C3", "C4"]
        for N in args.N:
            c = renorm_constants_3d(N, args.L)
            rows.append([N] + [c[k].value for k in header[1:]])
    else:
        header = ["N", "C_N", "C_N_minus_log_over_2pi"]
        for N in args.N:
            v = wick_constant_CN(2, N, args.L).value
            rows.append([N, v, v - math.log(N) / (2.0 * math.pi)])
    text = table_csv(header, rows)
    _emit(_out_dir(args), f"renorm_constants_d{args.d}.csv", text)
    sys.stdout.write(text)
    return 0


def _fmt_deg(deg) -> str:
    a, b = deg
    if b == 0:
        return str(a)
    sign = "-" if b < 0 else "+"
    return f"{a} {sign} {abs(b)}k"


def _fmt_poly(poly: dict) -> str:
    parts = []
    for (i, j), c in sorted(poly.items()):
        mono = "*".join(([f"c1^{i}" if i > 1 else "c1"] if i else []) + ([f"c2^{j}" if j > 1 else "c2"] if j else []))
        parts.append(f"{c}" + (f"*{mono}" if mono else ""))
    return " + ".join(parts)


def cmd_regstruct(args) -> int:
    S = regstruct.Structure(args.dim)
    lines = []
    if args.list:
        generated = set(S.generate(Fraction(3, 2)))
        for row, deg in regstruct.REFERENCE_SYMBOLS:
            syms = [S.parse(t) for t in regstruct.expand_axes(row, S.dim)]
            found = all(s in generated for s in syms) and all(S.degree(s) == deg for s in syms)
            lines.append(f"{row}\t{_fmt_deg(S.degree(syms[0]))}\t{'generated' if found else 'MISSING'}")
    elif args.list_all:
        for s in S.generate(args.cap):
            lines.append(f"{s}\t{_fmt_deg(S.degree(s))}")
    elif args.coproduct:
        sym = _parse(S, args.coproduct)
        for (a, b), c in sorted(S.coproduct(sym).items(), key=lambda kv: str(kv[0])):
            lines.append(f"{c}\t{a}\t(x)\t{b}")
    else:
        sym = _parse(S, args.renorm)
        for s, poly in sorted(S.renormalize(sym).items(), key=lambda kv: (S.degree(kv[0]), str(kv[0]))):
            lines.append(f"{_fmt_poly(poly)}\t{s}")
    text = "\n".join(lines) + "\n"
    _emit(_out_dir(args), "regstruct.txt", f"# schema_version={SCHEMA_VERSION}\n{text}")
    sys.stdout.write(text)
    return 0


def _parse(S, text):
    try:
        return S.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


COMMANDS = {
    "simulate-lattice": cmd_simulate_lattice,
    "simulate-spde": cmd_simulate_spde,
    "markov": cmd_markov,
    "predict-ek": cmd_predict_ek,
    "renorm-constants": cmd_renorm_constants,
    "regstruct": cmd_regstruct,
}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except (NumericalAbort, OverflowError) as exc:
        sys.stderr.write(f"numerical abort: {exc}\n")
        return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"{parser.format_usage()}error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
