"""Command-line entry point: ``corrbound <command> ...``.

Exit codes: 0 success, 1 an asserted bound or oracle failed, 2 malformed
input or configuration, 3 size cap exceeded, 4 premise violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import anderson, bounds, cluster, ising, matching, selftest as st
from .geometry import METRICS, EUCLIDEAN, ConfigError, PointConfig, SizeCapError, hausdorff_distance, random_config
from .reports import PremiseError, dumps
from .rng import default_seed, stream_rng, stream_seed

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP, EXIT_PREMISE = 0, 1, 2, 3, 4
MAX_CLI_N = 400

RUN_KEYS = {"command", "params", "seed", "output", "format"}


class UsageError(ValueError):
    pass


# input helpers

def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _json_arg(value: str, source: str):
    """Inline JSON (starting with '[' or '{') or a path to a UTF-8 JSON file."""
    stripped = value.lstrip()
    if stripped[:1] in ("[", "{"):
        return _load_json(value, source)
    path = Path(value)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{source}: cannot read {value}: {exc.strerror}") from None
    return _load_json(text, str(path))


def _config(value, source: str) -> PointConfig:
    data = _json_arg(value, source) if isinstance(value, str) else value
    if not isinstance(data, list):
        raise ConfigError(f"{source}: expected an array of integer arrays")
    return PointConfig(data)


def _pair_config(value: str):
    """{"X": [...], "Y": [...]} from --config."""
    data = _json_arg(value, "--config")
    if not isinstance(data, dict) or not {"X", "Y"} <= set(data) or set(data) - {"X", "Y"}:
        raise ConfigError("--config must be an object with exactly the keys X and Y")
    return _config(data["X"], "X"), _config(data["Y"], "Y")


def _cap(n: int, cap: int = MAX_CLI_N) -> None:
    if n > cap:
        raise SizeCapError(f"n={n} exceeds the command-line cap {cap}")


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --dims {text!r}; expected e.g. 4,4") from None
    return dims


def _seed(text: str) -> int:
    return int(text, 0)


# output helpers

class Output:
    def __init__(self, path: str | None):
        self.path = path
        self.buf = io.StringIO()

    def line(self, text: str) -> None:
        self.buf.write(text + "\n")

    def json(self, obj) -> None:
        self.line(obj.to_json() if hasattr(obj, "to_json") else dumps(obj))

    def csv(self, header, rows) -> None:
        w = csv.writer(self.buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)

    def flush(self) -> None:
        if self.path:
            Path(self.path).write_text(self.buf.getvalue(), encoding="utf-8")
        else:
            sys.stdout.write(self.buf.getvalue())
            sys.stdout.flush()


def _t_grid(args) -> np.ndarray:
    return np.linspace(0.0, args.tmax, args.tpoints)


# geometry commands

def cmd_dist(args, out: Output) -> int:
    X = _config(args.x, "--x")
    _cap(len(X))
    if args.y is None:
        pairs, val = matching.min_weight_perfect_matching(X, args.metric)
        out.json({"D_s_X": val, "pairs": [list(p) for p in pairs], "metric": args.metric})
        return EXIT_OK
    Y = _config(args.y, "--y")
    _cap(len(Y))
    res = {"D_H": hausdorff_distance(X, Y) if args.metric == EUCLIDEAN else None,
           "metric": args.metric}
    if len(X) == len(Y):
        c = matching.CostMatrix.from_configs(X, Y, args.metric)
        res["D_m"] = matching.bottleneck_assignment(c).value_max
        res["D_s"] = matching.min_sum_assignment(c).value_sum
    out.json(res)
    return EXIT_OK


def _assignment(args):
    X, Y = _config(args.x, "--x"), _config(args.y, "--y")
    _cap(len(X))
    c = matching.CostMatrix.from_configs(X, Y, args.metric)
    c.check_square()
    return X, Y, c


def cmd_match(args, out: Output) -> int:
    _, _, c = _assignment(args)
    solver = {"minimal": matching.minimal_permutation, "min-sum": matching.min_sum_assignment,
              "bottleneck": matching.bottleneck_assignment}[args.kind]
    out.json(solver(c).to_dict())
    return EXIT_OK


def cmd_cluster(args, out: Output) -> int:
    X, Y, _ = _assignment(args)
    cp = cluster.cluster_for(X, Y, args.metric)
    res = cp.to_dict()
    res["separation_violations"] = cluster.check_separation(cp, X, Y)
    out.json(res)
    return EXIT_OK if not res["separation_violations"] else EXIT_FAIL


# bound commands

def _trial_configs(args, pairs: bool = True):
    if args.config:
        if pairs:
            yield 0, _pair_config(args.config)
        else:
            yield 0, (_config(args.config, "--config"), None)
        return
    for t in range(args.trials):
        rng = stream_rng(args.seed, t)
        m = args.n if pairs else 2 * args.n
        box = args.box or (max(6, 3 * m) if args.d == 1 else 6)
        X = random_config(rng, m, args.d, box)
        Y = random_config(rng, m, args.d, box) if pairs else None
        yield t, (X, Y)


def _rotating_sampler(X, Y, mu):
    """Time-dependent masked decay kernel: phases rotate at random rates."""
    def sample(rng, t_grid):
        base = cluster.decay_kernel_matrix(rng, X, Y, mu)
        omega = rng.normal(size=base.shape)
        Ms = base[None] * np.exp(1j * omega[None] * np.asarray(t_grid)[:, None, None])
        norms = np.array([max(1.0, np.linalg.norm(M, 2)) for M in Ms])
        return Ms / norms[:, None, None]
    return sample


def _emit_reports(reports, out: Output) -> int:
    ok = True
    for t, rep in reports:
        rep.provenance.setdefault("trial", t)
        out.json(rep)
        ok &= rep.satisfied
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bound(args, out: Output) -> int:
    if args.action == "counting":
        rows = []
        for t, (X, Y) in _trial_configs(args):
            for ell, cnt, b in bounds.counting_table(X, Y):
                rows.append((t, len(X), X.dim, ell, cnt, repr(b), cnt <= b))
        out.csv(["trial", "n", "d", "l", "count", "bound", "ok"], rows)
        return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL
    if args.action == "check-thm12":
        kernel = cluster.DecayKernel(C=1.0, mu=args.mu)
        t_grid = _t_grid(args)
        reports = ((t, cluster.verify_thm12(_rotating_sampler(X, Y, args.mu), X, Y, kernel,
                                            args.samples, t_grid,
                                            seed=stream_seed(args.seed, 10_000 + t)))
                   for t, (X, Y) in _trial_configs(args))
        return _emit_reports(reports, out)
    if args.action == "check-thm13":
        _cap(args.n, 16)
        reports = ((t, bounds.check_thm13(X, Y, args.mu)) for t, (X, Y) in _trial_configs(args))
        return _emit_reports(reports, out)
    if args.action == "check-thm15":
        reports = ((t, bounds.check_thm15(X, args.mu))
                   for t, (X, _) in _trial_configs(args, pairs=False))
        return _emit_reports(reports, out)
    raise UsageError(f"unknown bound action {args.action!r}")


# anderson commands

def _model(args) -> anderson.AndersonModel:
    return anderson.AndersonModel(d=args.d, L=args.L, W=args.W, seed=args.seed)


def cmd_anderson(args, out: Output) -> int:
    model = _model(args)
    ens = anderson.Ensemble(model, args.samples)
    if args.action == "ule":
        ok = True
        pair = _pair_config(args.config) if args.config else None
        for s in range(args.samples):
            eig = ens.eig(s)
            rep = anderson.ule_diagnostic(eig, model.coords())
            out.json({"sample": s, "holds": rep.holds, "C": rep.C, "mu": rep.mu,
                      "worst_residual": rep.worst_residual})
            if pair and rep.holds:
                X, Y = pair
                rows = [model.index(x) for x in X]
                cols = [model.index(y) for y in Y]
                det_rep = anderson.ule_det_check(eig, model.coords(), rep, X, Y, _t_grid(args),
                                                 rows, cols)
                det_rep.provenance = {"seed": args.seed, "sample": s}
                out.json(det_rep)
                ok &= det_rep.satisfied
        return EXIT_OK if ok else EXIT_FAIL
    fit = anderson.dle_fit(model, args.samples, ensemble=ens, boot_seed=args.seed)
    if args.action == "dle":
        summary = [fit.mu, fit.C, fit.ci[0], fit.ci[1], fit.localized]
        if args.format == "json":
            out.json({"mu_hat": fit.mu, "C_hat": fit.C, "ci": list(fit.ci),
                      "localized": fit.localized, "message": fit.message,
                      "rows": fit.rows()})
        else:
            out.csv(["distance", "profile", "log_residual", "mu_hat", "C_hat", "ci_lo", "ci_hi",
                     "localized"], [list(r) + summary for r in fit.rows()])
        return EXIT_OK
    if args.action == "mpdl":
        t_grid = _t_grid(args)
        if args.config:
            draws = [_pair_config(args.config)]
        else:
            rng = stream_rng(args.seed, 1)
            draws = []
            for _ in range(args.draws):
                n = int(rng.integers(1, args.n_max + 1))
                draws.append((random_config(rng, n, model.d, model.L),
                              random_config(rng, n, model.d, model.L)))
        reports = ((i, anderson.mpdl_experiment(model, X, Y, args.samples, t_grid, fit, ens))
                   for i, (X, Y) in enumerate(draws))
        return _emit_reports(reports, out)
    if args.action == "q":
        mu = args.mu if args.mu is not None else fit.mu
        if not mu > 0:
            raise PremiseError(f"Q statistic needs a positive decay rate, got mu={mu}")
        R = args.R if args.R is not None else model.L
        rows = []
        for s in range(args.samples):
            q = anderson.q_statistic(ens.eig(s), model, mu, R, family=args.family,
                                     energy=args.energy)
            rows.append((s, repr(q.Q), q.holds, repr(q.worst_ratio)))
        out.csv(["sample", "Q", "holds", "worst_ratio"], rows)
        return EXIT_OK if all(r[2] for r in rows) else EXIT_FAIL
    raise UsageError(f"unknown anderson action {args.action!r}")


# ising commands

def _sites(args, lat) -> list[tuple[int, ...]]:
    if args.sites is None:
        raise UsageError("--sites is required")
    data = _json_arg(args.sites, "--sites")
    if not isinstance(data, list) or not all(isinstance(s, list) for s in data):
        raise ConfigError("--sites must be an array of integer arrays")
    sites = [tuple(s) for s in data]
    for s in sites:
        lat.index(s)
    return sites


def _estimate(lat, observables, args):
    """(mean, error) per observable, exact or from one Monte Carlo chain."""
    if args.method == "exact":
        return [(lat.exact_expectation(o), 0.0) for o in observables]
    series = ising.sample_observables(lat, observables, args.sweeps, args.burn_in, args.method,
                                      args.seed)
    return [ising.batch_means(series[:, k]) for k in range(len(observables))]


def cmd_ising(args, out: Output) -> int:
    lat = ising.IsingLattice(args.dims, args.beta)
    if args.method == "exact" and lat.n_sites > ising.MAX_EXACT_SITES:
        raise SizeCapError(f"{lat.n_sites} sites exceeds the enumeration cap "
                           f"{ising.MAX_EXACT_SITES}; use --method metropolis or wolff")
    if args.action == "corr":
        A = _sites(args, lat)
        (mean, err), = _estimate(lat, [[lat.index(a) for a in A]], args)
        r = math.dist(*A) if len(A) == 2 else ""
        out.csv(["sites", "distance", "correlation", "error", "method"],
                [(json.dumps([list(a) for a in A]), r, repr(mean), repr(err), args.method)])
        return EXIT_OK
    if args.action == "decay":
        origin = _sites(args, lat)[0] if args.sites else lat.coords[0]
        others = [s for s in lat.coords if s != origin]
        o = lat.index(origin)
        est = _estimate(lat, [[o, lat.index(s)] for s in others], args)
        rows = sorted((math.dist(origin, s), json.dumps(list(s)), repr(m), repr(e))
                      for s, (m, e) in zip(others, est))
        out.csv(["distance", "site", "correlation", "error"], rows)
        return EXIT_OK
    if args.method != "exact":
        raise UsageError(f"ising {args.action} needs --method exact")
    if args.action == "verify":
        rep = ising.verify_thm22(lat, _sites(args, lat))
        rep.provenance = {"method": "exact"}
        out.json(rep)
        return EXIT_OK if rep.satisfied else EXIT_FAIL
    if args.action == "pfaffian":
        res = ising.boundary_pfaffian_check(lat, _sites(args, lat))
        out.json(res)
        return EXIT_FAIL if res["cyclic"] and res["gap"] > 1e-10 else EXIT_OK
    raise UsageError(f"unknown ising action {args.action!r}")


# selftest

def cmd_selftest(args, out: Output) -> int:
    level = "full" if args.full else "quick"
    results = st.selftest(level, args.seed, jobs=args.jobs)
    out.json({"level": level, "seed": args.seed, "passed": all(r.passed for r in results),
              "suites": [r.to_dict() for r in results]})
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} cases={r.cases} time={r.wall_time:.2f}s", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# run-config files

def config_to_argv(cfg) -> list[str]:
    """Translate a RunConfig object into command-line arguments."""
    if not isinstance(cfg, dict):
        raise ConfigError("run config must be a JSON object")
    unknown = set(cfg) - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run-config keys: {sorted(unknown)}")
    if "command" not in cfg:
        raise ConfigError("run config needs a 'command'")
    cmd = cfg["command"]
    argv = cmd.split() if isinstance(cmd, str) else [str(c) for c in cmd]
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")
    for key, val in params.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif isinstance(val, (list, dict)):
            argv += [flag, json.dumps(val)]
        else:
            argv += [flag, str(val)]
    if "seed" in cfg:
        argv += ["--seed", str(cfg["seed"])]
    if "output" in cfg:
        argv += ["--output", str(cfg["output"])]
    if "format" in cfg:
        argv += ["--format", str(cfg["format"])]
    return argv


# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=default_seed(),
                        help="master seed (default: $CORRBOUND_SEED or 0xC0FFEE)")
    common.add_argument("--output", help="write the report here (UTF-8) instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    pair = argparse.ArgumentParser(add_help=False)
    pair.add_argument("--x", required=True, help="configuration X: JSON array or file")
    pair.add_argument("--metric", choices=METRICS, default=EUCLIDEAN)

    p = argparse.ArgumentParser(prog="corrbound", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("dist", parents=[common, pair], help="D_H, D_m, D_s or pairing distance")
    s.add_argument("--y", help="configuration Y; omit for the pairing distance of X")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("match", parents=[common, pair], help="optimal assignment")
    s.add_argument("--y", required=True)
    s.add_argument("--kind", choices=("minimal", "min-sum", "bottleneck"), default="minimal")
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("cluster", parents=[common, pair], help="cluster around the bottleneck pair")
    s.add_argument("--y", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("bound", parents=[common], help="random checks of the determinant, "
                       "permanent and pairing bounds")
    s.add_argument("action", choices=("check-thm12", "check-thm13", "check-thm15", "counting"))
    s.add_argument("--n", type=int, default=4, help="points per configuration (pairs for thm15)")
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--mu", type=float, default=1.0)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--box", type=int, default=None, help="side of the sampling box")
    s.add_argument("--samples", type=int, default=20, help="random matrices per trial (thm12)")
    s.add_argument("--tmax", type=float, default=10.0)
    s.add_argument("--tpoints", type=int, default=11)
    s.add_argument("--config", help='fixed {"X": [...], "Y": [...]} (or an array for thm15)')
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("anderson", parents=[common], help="disordered hopping experiments")
    s.add_argument("action", choices=("dle", "mpdl", "ule", "q"))
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--L", type=int, default=64)
    s.add_argument("--W", type=float, default=8.0)
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--tmax", type=float, default=50.0)
    s.add_argument("--tpoints", type=int, default=26)
    s.add_argument("--config", help='{"X": [...], "Y": [...]} for mpdl/ule')
    s.add_argument("--draws", type=int, default=100, help="random configurations for mpdl")
    s.add_argument("--n-max", type=int, default=10)
    s.add_argument("--mu", type=float, default=None, help="decay rate for q (default: fitted)")
    s.add_argument("--R", type=float, default=None, help="truncation radius for q")
    s.add_argument("--family", choices=("evolution", "fermi"), default="evolution")
    s.add_argument("--energy", type=float, default=0.0)
    s.set_defaults(func=cmd_anderson)

    s = sub.add_parser("ising", parents=[common], help="Ising correlations and bounds")
    s.add_argument("action", choices=("corr", "decay", "verify", "pfaffian"))
    s.add_argument("--dims", type=_dims, default=(4, 4))
    s.add_argument("--beta", type=float, default=0.3)
    s.add_argument("--method", choices=("exact", "metropolis", "wolff"), default="exact")
    s.add_argument("--sweeps", type=int, default=20000)
    s.add_argument("--burn-in", type=int, default=1000)
    s.add_argument("--sites", help="JSON array of sites (file or inline)")
    s.set_defaults(func=cmd_ising)

    s = sub.add_parser("selftest", parents=[common], help="oracle and invariant suites")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--quick", action="store_true")
    g.add_argument("--full", action="store_true")
    s.add_argument("--jobs", type=int, default=1, help="suites run in parallel processes")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("run", help="execute a JSON run-config file")
    s.add_argument("file")
    s.set_defaults(func=None)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv[:1] == ["run"]:
            if len(argv) != 2:
                raise UsageError("usage: corrbound run CONFIG.json")
            argv = config_to_argv(_json_arg(argv[1], argv[1]))
            if argv[:1] == ["run"]:
                raise ConfigError("run configs cannot nest")
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_CONFIG if exc.code else EXIT_OK
        out = Output(args.output)
        start = time.perf_counter()
        code = args.func(args, out)
        out.flush()
        if args.command != "selftest":
            print(f"done in {time.perf_counter() - start:.2f}s", file=sys.stderr)
        return code
    except SizeCapError as exc:
        print(f"error: size cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except PremiseError as exc:
        print(f"error: premise violated: {exc}", file=sys.stderr)
        return EXIT_PREMISE
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
