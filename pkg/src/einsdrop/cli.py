"""Command-line front end.

Subcommands: ``toy``, ``bound``, ``tradeoff``, ``sweep``, ``verify`` and
``rerun``.  Every command that writes files (``--out``) also writes a
``<command>_manifest.txt`` whose ``args`` line replays the run exactly.

Exit codes: 0 success, 1 usage or config error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import logging
import math
import os
import re
import shlex
import sys
from pathlib import Path

from . import __version__
from . import qubit_env as qe
from .antenna_optimizer import SweepConfig, run_sweep
from .verification import N_GRID, THETA_GRID, run_checks

log = logging.getLogger("einsdrop")

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2
SLACK_TOL = 1e-12
SEED_ENV = "EINSDROP_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_ANGLE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(text: str) -> float:
    """Radians from ``"0.3"``, ``"pi/4"``, ``"3pi/4"``, ``"-2*pi/3"``."""
    try:
        return float(text)
    except ValueError:
        pass
    m = _ANGLE.match(text.lower())
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}")
    coef = m.group(1)
    coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
    den = float(m.group(2)) if m.group(2) else 1.0
    return coef * math.pi / den


def _int_list(text: str) -> list:
    """``"1,3,5"`` or ranges ``"1-200"`` (inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if re.fullmatch(r"\d+-\d+", part):
            lo, hi = (int(x) for x in part.split("-"))
            out.extend(range(lo, hi + 1))
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return out


def _angle_list(text: str) -> list:
    return [parse_angle(p) for p in text.split(",") if p.strip()]


def _float_list(text: str) -> list:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def resolve_seed(flag):
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return None


def write_outputs(out_dir, command: str, files: dict, argv: list, seed, config: dict):
    """Write CSV files plus a manifest; ``files`` maps name -> CSV text."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    lines = [
        "# einsdrop run manifest",
        f"command = {command}",
        f"version = {__version__}",
        f"timestamp = {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        f"seed = {'' if seed is None else seed}",
        f"args = {shlex.join(argv)}",
    ]
    lines += [f"config.{k} = {v}" for k, v in config.items()]
    lines += [f"output = {name}" for name in files]
    (out / f"{command}_manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _emit(args, command, files, argv, seed=None, config=None):
    if args.out:
        write_outputs(args.out, command, files, argv, seed, config or {})


# ---------------------------------------------------------------- toy


def cmd_toy(args) -> int:
    theta, n_env = args.theta, args.n
    if n_env < 1:
        raise UsageError("--n must be at least 1")
    if any(n < 1 or n > n_env for n in args.intercept):
        raise UsageError(f"intercept counts must lie in [1, {n_env}]")
    model = qe.ImperfectCnotModel(theta, n_env)
    gamma, p = model.gamma, model.helstrom_p
    print(f"theta = {theta:.17g} rad, N = {n_env}")
    print(f"Gamma = |sin theta|^N = {gamma:.6g}  (log10 {qe.log_gamma_closed_form(theta, n_env) / math.log(10):.6f})")
    print(f"Helstrom single-qubit success p = {p:.6f}")
    print(f"{'n':>6}  {'Pguess':>10}")
    rows = []
    for n in args.intercept:
        pg = model.pguess(n)
        print(f"{n:>6}  {pg:>10.6f}")
        rows.append((theta, n_env, gamma, p, n, pg))
    argv = ["toy", "--theta", fmt(theta), "--n", str(n_env),
            "--intercept", ",".join(map(str, args.intercept))]
    _emit(args, "toy", {"toy.csv": _csv_text(
        ["theta", "n_env", "gamma", "helstrom_p", "n_intercepted", "pguess"], rows)}, argv)
    return EXIT_OK


# ---------------------------------------------------------------- bound


def cmd_bound(args) -> int:
    if args.gamma is not None:
        if not 0.0 < args.gamma < 1.0:
            raise UsageError("--gamma must lie in (0, 1)")
        neg_ln = -math.log(args.gamma)
    else:
        if args.log10_gamma >= 0:
            raise UsageError("--log10-gamma must be negative")
        neg_ln = -args.log10_gamma * math.log(10)
    for f in args.fraction:
        if not 0.0 <= f <= 1.0:
            raise UsageError(f"mu fraction {f} must lie in [0, 1]")
    log10_gamma = -neg_ln / math.log(10)
    print(f"log10 Gamma = {log10_gamma:.6f}")
    print(f"{'fraction':>10}  {'mu(-ln G)':>12}  {'Pguess >=':>10}")
    rows = []
    for f in args.fraction:
        mu_at = f * neg_ln
        lb = qe.pguess_lower_bound(math.exp(-neg_ln), mu_at)
        print(f"{f:>10.4g}  {mu_at:>12.6g}  {lb:>10.6f}")
        rows.append((log10_gamma, f, mu_at, lb))
    argv = ["bound", "--log10-gamma", fmt(log10_gamma),
            "--fraction", ",".join(fmt(f) for f in args.fraction)]
    _emit(args, "bound", {"bound.csv": _csv_text(
        ["log10_gamma", "fraction", "mu_at", "pguess_lower_bound"], rows)}, argv)
    return EXIT_OK


# ---------------------------------------------------------------- tradeoff


def tradeoff_rows(thetas, ns):
    for t in thetas:
        for n in ns:
            pt = qe.tradeoff_check(t, n)
            yield (t, n, pt.gamma, pt.pguess, pt.slack)


def cmd_tradeoff(args) -> int:
    rows = list(tradeoff_rows(args.theta_grid, args.n_grid))
    text = _csv_text(["theta", "n_env", "gamma", "pguess", "slack"], rows)
    if not args.quiet:
        sys.stdout.write(text)
    worst = min(r[4] for r in rows)
    print(f"# min slack {worst:.3e} over {len(rows)} points", file=sys.stderr)
    argv = ["tradeoff", "--theta-grid", ",".join(fmt(t) for t in args.theta_grid),
            "--n-grid", ",".join(map(str, args.n_grid))]
    _emit(args, "tradeoff", {"tradeoff.csv": text}, argv)
    return EXIT_OK if worst >= -SLACK_TOL else EXIT_VERIFY


# ---------------------------------------------------------------- sweep

CONFIG_KEYS = {"env_dims", "instances", "k_points", "restarts", "max_iters", "step_size", "seed"}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` sweep config.

    Keys: ``env_dims`` (comma list), ``instances`` (one value or one per
    D), ``k_points``, ``k_grid.<D>`` (comma list), ``restarts``,
    ``max_iters``, ``step_size``, ``seed``.  ``#`` starts a comment.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS and not re.fullmatch(r"k_grid\.\d+", key):
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value
    try:
        cfg = {}
        if "env_dims" in raw:
            cfg["env_dims"] = _int_list(raw["env_dims"])
        if "instances" in raw:
            cfg["instances"] = _int_list(raw["instances"])
        for key in ("k_points", "restarts", "max_iters", "seed"):
            if key in raw:
                cfg[key] = int(raw[key])
        if "step_size" in raw:
            cfg["step_size"] = float(raw["step_size"])
        grids = {int(k.split(".")[1]): _int_list(v) for k, v in raw.items() if k.startswith("k_grid.")}
        if grids:
            cfg["k_grid"] = grids
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    return cfg


def build_sweep_config(args) -> SweepConfig:
    cfg = read_config(args.config) if args.config else {}
    for key in ("env_dims", "instances", "k_points", "restarts", "max_iters", "step_size"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    seed = resolve_seed(args.seed)
    if seed is None:
        seed = cfg.get("seed", 0)
    cfg["seed"] = seed
    for item in args.k_grid or ():
        d, _, ks = item.partition(":")
        try:
            cfg.setdefault("k_grid", {})[int(d)] = _int_list(ks)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"--k-grid expects D:k1,k2,..., got {item!r}") from None
    dims = cfg.get("env_dims", SweepConfig().env_dims)
    inst = cfg.pop("instances", None)
    if inst is not None:
        if len(inst) == 1:
            inst = inst * len(dims)
        if len(inst) != len(dims):
            raise UsageError(f"instances needs 1 or {len(dims)} values, got {len(inst)}")
        cfg["instances"] = dict(zip(dims, inst))
    try:
        return SweepConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep config: {exc}") from None


def sweep_argv(cfg: SweepConfig) -> list:
    argv = ["sweep", "--d", ",".join(map(str, cfg.env_dims)),
            "--instances", ",".join(str(cfg.n_instances(d)) for d in cfg.env_dims),
            "--restarts", str(cfg.restarts), "--max-iters", str(cfg.max_iters),
            "--step-size", fmt(cfg.step_size), "--k-points", str(cfg.k_points),
            "--seed", str(cfg.seed)]
    for d in cfg.env_dims:
        if d in cfg.k_grid:
            argv += ["--k-grid", f"{d}:" + ",".join(map(str, cfg.k_grid[d]))]
    return argv


def cmd_sweep(args) -> int:
    cfg = build_sweep_config(args)
    threads = args.threads or os.cpu_count() or 1
    log.info("sweep over D=%s with %d thread(s)", cfg.env_dims, threads)
    result = run_sweep(cfg, threads=threads)
    rec_rows = [(r.env_dim, r.k, r.k_over_d, r.instance, r.seed, r.pguess, r.ceiling,
                 r.iterations, r.converged) for r in result.records]
    agg_rows = [(a.env_dim, a.k, a.k_over_d, a.mean, a.std, a.mean_ceiling, a.n)
                for a in result.aggregates]
    files = {
        "records.csv": _csv_text(["D", "k", "k_over_D", "instance", "seed", "pguess",
                                  "ceiling", "iterations", "converged"], rec_rows),
        "aggregates.csv": _csv_text(["D", "k", "k_over_D", "mean", "std", "mean_ceiling", "n"],
                                    agg_rows),
    }
    print(f"{'D':>5} {'k':>5} {'k/D':>7} {'mean':>10} {'std':>10} {'ceiling':>10} {'n':>3}")
    for a in result.aggregates:
        print(f"{a.env_dim:>5} {a.k:>5} {a.k_over_d:>7.3f} {a.mean:>10.6f} {a.std:>10.2e} "
              f"{a.mean_ceiling:>10.6f} {a.n:>3}")
    unconverged = sum(not r.converged for r in result.records)
    if unconverged:
        log.warning("%d optimizer run(s) hit max_iters without converging", unconverged)
    config = {
        "env_dims": ",".join(map(str, cfg.env_dims)),
        "instances": ",".join(str(cfg.n_instances(d)) for d in cfg.env_dims),
        "restarts": cfg.restarts, "max_iters": cfg.max_iters,
        "step_size": fmt(cfg.step_size), "k_points": cfg.k_points,
    }
    for d in cfg.env_dims:
        config[f"k_grid.{d}"] = ",".join(map(str, cfg.ks(d)))
    write_outputs(args.out, "sweep", files, sweep_argv(cfg), cfg.seed, config)
    print(f"wrote {Path(args.out) / 'records.csv'} and {Path(args.out) / 'aggregates.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    seed = resolve_seed(args.seed) or 0
    results = run_checks(seed)
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    rows = [(name, ok, detail) for name, ok, detail in results]
    _emit(args, "verify", {"verify.csv": _csv_text(["check", "passed", "detail"], rows)},
          ["verify", "--seed", str(seed)], seed)
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------- rerun


def read_manifest(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    for line in text.splitlines():
        if line.startswith("#") or "=" not in line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        out.setdefault(key, value)
    if "args" not in out:
        raise UsageError(f"{path} has no 'args' line")
    return out


def cmd_rerun(args) -> int:
    manifest = read_manifest(args.manifest)
    argv = shlex.split(manifest["args"])
    if args.out:
        argv += ["--out", args.out]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    return main(argv)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="einsdrop", description="Eavesdropping on decoherence: guessing "
                "probability vs decoherence factor.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--out", help="directory for CSV output and the run manifest")
        if seed:
            sp.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${SEED_ENV})")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (does not change results)")

    sp = sub.add_parser("toy", help="N-qubit environment with majority-vote interception")
    sp.add_argument("--theta", type=parse_angle, required=True, help="radians or e.g. pi/4")
    sp.add_argument("--n", type=int, required=True, help="environment qubits N")
    sp.add_argument("--intercept", type=_int_list, default=[1], help="comma list of n")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_toy)

    sp = sub.add_parser("bound", help="lower bound 1 - exp(-mu(-ln Gamma)) with mu(x) = f x")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=float)
    g.add_argument("--log10-gamma", type=float)
    sp.add_argument("--fraction", type=_float_list, required=True, help="comma list of f")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("tradeoff", help="check Pguess + Gamma >= 1 on a (theta, N) grid")
    sp.add_argument("--theta-grid", type=_angle_list, default=list(THETA_GRID))
    sp.add_argument("--n-grid", type=_int_list, default=list(N_GRID))
    sp.add_argument("--quiet", action="store_true", help="do not echo the CSV")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_tradeoff)

    sp = sub.add_parser("sweep", help="optimize antennas over k/D (figure data)")
    sp.add_argument("--config", help="flat key = value config file")
    sp.add_argument("--d", dest="env_dims", type=_int_list, help="environment dimensions")
    sp.add_argument("--instances", type=_int_list, help="one count, or one per D")
    sp.add_argument("--k-points", type=int)
    sp.add_argument("--k-grid", action="append", help="explicit grid, e.g. 20:2,10,20")
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--step-size", type=float)
    common(sp)
    sp.set_defaults(func=cmd_sweep, out="einsdrop-sweep")

    sp = sub.add_parser("verify", help="run the invariant suite")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("rerun", help="replay a run from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out")
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"einsdrop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
