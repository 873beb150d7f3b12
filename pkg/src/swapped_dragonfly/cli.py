"""Batch front end: ``sdf <command> [flags]``.

Exit status: 0 when every invariant check passed, 2 for configuration
errors, 3 when a check failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Tuple

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3
COMMANDS = ("topo", "verify", "a2a", "matmul", "bcast", "hypercube", "plan")

# parameters each command accepts besides K, M, seed and output paths
ALLOWED = {
    "topo": {"groups"},
    "verify": {"groups"},
    "a2a": {"groups", "s", "pattern", "n"},
    "matmul": {"n"},
    "bcast": {"groups", "X", "root", "drawer"},
    "hypercube": set(),
    "plan": set(),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    K: Optional[int] = None
    M: Optional[int] = None
    groups: Optional[str] = None
    s: Optional[int] = None
    pattern: Optional[str] = None
    n: Optional[int] = None
    X: Optional[int] = None
    seed: Optional[int] = None
    root: Optional[str] = None
    drawer: Optional[str] = None
    trace: Optional[str] = None
    report: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.K is None or self.M is None:
            raise ConfigError("--K and --M are required")
        if self.K < 1 or self.M < 1:
            raise ConfigError("K and M must be positive")
        extra = {"groups", "s", "pattern", "n", "X", "root", "drawer"} - ALLOWED[self.command]
        given = sorted(name for name in extra if getattr(self, name) is not None)
        if given:
            raise ConfigError(f"{self.command} does not take: {', '.join(given)}")
        if self.groups not in (None, "cyclic", "boolean"):
            raise ConfigError("--groups must be cyclic or boolean")
        if self.pattern not in (None, "S1", "S2", "S3"):
            raise ConfigError("--pattern must be S1, S2 or S3")
        if self.root is not None and self.drawer is not None:
            raise ConfigError("give --root or --drawer, not both")
        return self


def _ints(text: str, n: int, what: str) -> Tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"{what} must be {n} comma-separated integers: {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{what} must be {n} comma-separated integers: {text!r}")
    return vals


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        out[key] = val
    return out


_INT_KEYS = {"K", "M", "s", "n", "X", "seed"}


def merge_config(file_values: dict, flags: dict) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    merged = {}
    for key, val in file_values.items():
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _INT_KEYS:
            try:
                val = int(val)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {val!r}") from None
        merged[key] = val
    merged.update({k: v for k, v in flags.items() if v is not None and k in names})
    if merged.get("seed") is None and os.environ.get("SDF_SEED"):
        try:
            merged["seed"] = int(os.environ["SDF_SEED"])
        except ValueError:
            raise ConfigError("SDF_SEED must be an integer") from None
    merged.setdefault("seed", None)
    if merged["seed"] is None:
        merged["seed"] = 0
    if "command" not in merged:
        raise ConfigError("no command given")
    return ExperimentConfig(**merged).validate()


# -- experiments --------------------------------------------------------------


def _topology(cfg: ExperimentConfig):
    from .topology import GroupSpec, build_topology

    kind = cfg.groups or "cyclic"
    try:
        if kind == "boolean":
            for v in (cfg.K, cfg.M):
                if v & (v - 1):
                    raise ConfigError("boolean groups need power-of-2 K and M")
            groups = GroupSpec.boolean(cfg.K.bit_length() - 1), GroupSpec.boolean(cfg.M.bit_length() - 1)
        else:
            groups = GroupSpec.cyclic(cfg.K), GroupSpec.cyclic(cfg.M)
        return build_topology(*groups)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _write_trace(cfg, sched):
    if cfg.trace:
        from .engine import write_trace

        with open(cfg.trace, "w", newline="") as fh:
            write_trace(sched, fh)


def run_topo(cfg):
    t = _topology(cfg)
    summary = t.summary()
    ok = summary["routers"] == cfg.K * cfg.M * cfg.M
    return ok, {"summary": summary}


def run_verify(cfg):
    from .engine import verify_property1
    from .routing import SourceVector

    t = _topology(cfg)
    results = []
    for g in t.cabinets.elements():
        for p in t.drawers.elements():
            for d in t.drawers.elements():
                res = verify_property1(t, SourceVector(g, p, d))
                results.append({"vector": [g, p, d], **res})
    ok = all(r["permutation"] and r["conflicts"] == 0 for r in results)
    return ok, {"vectors": len(results), "all_pass": ok, "failures": [r for r in results if not (r["permutation"] and not r["conflicts"])]}


def run_a2a(cfg):
    from .alltoall import blocked_a2a, delivery_matrix, doubly_parallel_schedule
    from .engine import simulate

    t = _topology(cfg)
    s, pattern = cfg.s or 1, cfg.pattern or "S2"
    try:
        if cfg.n is None:
            sched, reps = doubly_parallel_schedule(t, s, pattern), 1
        else:
            sched = blocked_a2a(t, s, cfg.n, pattern)
            reps = (cfg.n // (t.K * t.M * t.M)) ** 2
    except ValueError as e:
        raise ConfigError(str(e)) from None
    rep = simulate(t, sched)
    counts = delivery_matrix(t, sched, rep.deliveries)
    coverage = len(counts) == len(t) ** 2 and all(v == reps for v in counts.values())
    _write_trace(cfg, sched)
    ok = coverage and rep.conflict_free
    return ok, {"rounds": sched.rounds, "coverage_complete": coverage, "simulation": rep.to_dict()}


def run_matmul(cfg):
    from .engine import simulate
    from .matmul import DistributedMatrix, MatmulMachine, products_equal

    K, M = cfg.K, cfg.M
    if K < 2 or M < 2:
        raise ConfigError("matmul needs K >= 2 and M >= 2 (network D3(K^2, M))")
    n = cfg.n or K * M
    if n % (K * M):
        raise ConfigError(f"n={n} is not a multiple of KM={K * M}")
    rng = np.random.default_rng(cfg.seed or 0)
    A = rng.integers(-9, 10, (n, n))
    B = rng.integers(-9, 10, (n, n))
    mach = MatmulMachine(K, M)
    dC, sched = mach.mat_mat_multiply(DistributedMatrix.from_dense(A, K, M), DistributedMatrix.from_dense(B, K, M))
    rep = simulate(mach.topo, sched)
    exact = products_equal(dC.to_dense(), A @ B)
    _write_trace(cfg, sched)
    ok = exact and rep.conflict_free and sched.rounds == n * n // (K * M)
    return ok, {
        "network": mach.topo.name,
        "n": n,
        "rounds": sched.rounds,
        "slots_per_round": sched.total_slots // sched.rounds,
        "off_and_on_per_round": sched.off_and_on // sched.rounds,
        "exact": exact,
        "result_layout": "transposed" if dC.transposed else "standard",
        "simulation": rep.to_dict(),
    }


def run_bcast(cfg):
    from .broadcast import depth3_tree, depth4_trees, pipeline_depth3, pipeline_depth4_pairs, shared_channels
    from .topology import RouterCoord

    t = _topology(cfg)
    try:
        if cfg.root is not None:
            root = RouterCoord(*_ints(cfg.root, 3, "--root"))
            if root not in t:
                raise ConfigError(f"root {root} is not a router of {t.name}")
            X = cfg.X or 1
            tree = depth3_tree(t, root)
            run = pipeline_depth3(t, root, X)
            extra = {"mode": "depth3", "root": list(root), "tree_ok": tree.is_spanning_tree(t), "level_widths": tree.level_widths}
        else:
            c, d = _ints(cfg.drawer, 2, "--drawer") if cfg.drawer else (0, 0)
            if RouterCoord(c, d, 0) not in t:
                raise ConfigError(f"drawer {(c, d)} is not in {t.name}")
            X = cfg.X or 2 * t.M
            trees = depth4_trees(t, (c, d))
            run = pipeline_depth4_pairs(t, (c, d), X)
            shared = shared_channels(trees)
            extra = {
                "mode": "depth4_pairs",
                "drawer": [c, d],
                "trees_ok": all(tr.is_spanning_tree(t) for tr in trees),
                "shared_channel_pairs": {f"{i}-{j}": len(v) for (i, j), v in sorted(shared.items())},
            }
    except ValueError as e:
        raise ConfigError(str(e)) from None
    complete = run.complete(t, range(X))
    _write_trace(cfg, run.schedule)
    ok = complete and run.report.conflict_free and extra.get("tree_ok", extra.get("trees_ok"))
    return ok, {"X": X, "delivery_complete": complete, "simulation": run.report.to_dict(), **extra}


def run_hypercube(cfg):
    from . import hypercube as hc

    K, M = cfg.K, cfg.M
    if K < 2 or M < 2:
        raise ConfigError("hypercube needs K >= 2 and M >= 2")
    g, emb = hc.emulation_host(K, M)
    if len(g) > hc.MAX_NODES:
        raise ConfigError(f"SBH({g.k},{g.m}) exceeds {hc.MAX_NODES} nodes")
    rng = np.random.default_rng(cfg.seed or 0)
    keys = [int(x) for x in rng.integers(0, 1 << 20, len(g))]
    sort = hc.bitonic_sort(g.k, g.m, keys)
    hops = hc.hypercube_hops(hc.bitonic_steps(g.dims))
    classes = {cl: hc.dilation4_check(g.k, g.m, (cl,))["conflicts"] for cl in "cdp"}
    diam = hc.diameter_check(g.k, g.m)
    sorted_ok = sort.values == sorted(keys)
    _write_trace(cfg, sort.schedule)
    ok = (
        hc.overlay_check(g) and emb.verify() and diam["ok"] and sorted_ok
        and sort.report.conflict_free and sort.channel_slots <= 2 * hops
        and not any(classes.values())
    )
    return ok, {
        "k": g.k, "m": g.m, "embedded": (K, M) != (1 << g.k, 1 << g.m),
        "dilation": hc.dilation_stats(g.k, g.m),
        "diameter": diam,
        "bitonic": {"sorted": sorted_ok, "channel_slots": sort.channel_slots, "hypercube_hops": hops, "conflicts": len(sort.report.conflicts)},
        "dilation4_conflicts_per_class": classes,
        "a2a_cost": hc.a2a_cost_compare(g.k, g.m),
    }


def run_plan(cfg):
    from .alltoall import plan_emulation

    if cfg.K < 2 or cfg.M < 2:
        raise ConfigError("plan needs K >= 2 and M >= 2")
    return True, {"plan": plan_emulation(cfg.K, cfg.M).as_dict()}


RUNNERS = {
    "topo": run_topo, "verify": run_verify, "a2a": run_a2a, "matmul": run_matmul,
    "bcast": run_bcast, "hypercube": run_hypercube, "plan": run_plan,
}


def run(cfg: ExperimentConfig) -> Tuple[int, dict]:
    """Execute one experiment; returns (exit status, report)."""
    cfg.validate()
    ok, body = RUNNERS[cfg.command](cfg)
    report = {"config": asdict(cfg), "ok": bool(ok), "result": body}
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(dump_report(report))
    return (EXIT_OK if ok else EXIT_INVARIANT), report


def dump_report(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (set, frozenset, tuple)):
        return list(x)
    return str(x)


def _run_safe(cfg: ExperimentConfig) -> Tuple[int, dict]:
    try:
        return run(cfg)
    except ConfigError as e:
        return EXIT_CONFIG, {"config": asdict(cfg), "ok": False, "error": str(e)}


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--K", type=int, help="cabinet group order")
    common.add_argument("--M", type=int, help="drawer group order")
    common.add_argument("--groups", choices=("cyclic", "boolean"))
    common.add_argument("--s", type=int, help="all-to-all stride (common divisor of K and M)")
    common.add_argument("--pattern", choices=("S1", "S2", "S3"))
    common.add_argument("--n", type=int, help="problem size")
    common.add_argument("--X", type=int, help="number of broadcasts")
    common.add_argument("--seed", type=int, help="random seed (default: $SDF_SEED or 0)")
    common.add_argument("--root", help="broadcast root c,d,p")
    common.add_argument("--drawer", help="broadcast drawer c,d")
    common.add_argument("--trace", metavar="PATH", help="per-move CSV trace")
    common.add_argument("--report", metavar="PATH", help="JSON report (default: stdout)")
    common.add_argument("--config", metavar="FILE", action="append", default=[],
                        help="key = value config file; repeat to run several experiments")
    common.add_argument("--jobs", type=int, default=1, help="experiments run in parallel")

    parser = argparse.ArgumentParser(prog="sdf", description="Swapped Dragonfly D3(K,M) simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "topo": "build a topology and print its summary",
        "verify": "check that every source vector routes a conflict-free permutation",
        "a2a": "doubly-parallel all-to-all exchange",
        "matmul": "matrix product on D3(K^2, M)",
        "bcast": "spanning-tree broadcasts",
        "hypercube": "hypercube emulation on D3(2^k, 2^m)",
        "plan": "choose a sub-network for the all-to-all",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def configs_from_args(args) -> List[ExperimentConfig]:
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "jobs")}
    if not args.config:
        return [merge_config({}, flags)]
    return [merge_config(read_config_file(path), flags) for path in args.config]


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfgs = configs_from_args(args)
    except (ConfigError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_safe, cfgs))
    else:
        results = [_run_safe(c) for c in cfgs]
    for (status, report), cfg in zip(results, cfgs):
        if status == EXIT_CONFIG:
            print(f"error: {report['error']}", file=sys.stderr)
        elif not cfg.report:
            sys.stdout.write(dump_report(report))
        else:
            print(f"{cfg.command}: {'ok' if report['ok'] else 'FAILED'} -> {cfg.report}")
    return max(status for status, _ in results)


if __name__ == "__main__":
    sys.exit(main())
