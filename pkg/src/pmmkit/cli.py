"""Command-line entry point: ``pmmkit <command> --config FILE --out PATH``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import audit, costs
from .cluster import FaultPlan, StorageServer, run_session, serve_forever
from .errors import ConfigError, PmmError
from .ff import MERSENNE61
from .fpmm import FpmmRequest
from .matrix import mat_mul, random_matrix
from .psmm import PsmmRequest
from .storage import build_store, load_shards, random_library, reconstruct_library, restripe, save_shards
from .strategy import make_baseline_plan, make_fpmm_plan, make_psmm_plan

_INT = {"type": "integer", "minimum": 1}
_SEED = {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "os"}]}

SETUP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["N", "K", "V"],
    "properties": {
        "N": _INT, "K": _INT, "V": _INT,
        "R": {"type": "integer", "minimum": 0},
        "L": _INT, "M": _INT,
        "lambda": _INT, "omega": _INT, "gamma": _INT,
        "modulus": {"type": "integer", "minimum": 2},
        "seed": _SEED,
        "alpha": {"type": "array", "items": {"type": "integer"}},
    },
}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mode"],
    "properties": {
        "mode": {"enum": ["psmm", "fpmm", "baseline"]},
        "shards": {"type": "string"},
        "setup": SETUP_SCHEMA,
        "theta": _INT, "theta_A": _INT, "theta_B": _INT,
        "S": _INT, "T": _INT, "T_A": _INT, "T_B": _INT,
        "L": _INT, "lambda": _INT,
        "family": {"enum": ["Delta1", "Delta2", "Delta3"]},
        "a_seed": _SEED,
        "noise_seed": _SEED,
        "noiseless": {"type": "boolean"},
        "faults": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stragglers": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "malicious": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "E": {"type": "integer", "minimum": 0},
                "corruption": {"enum": ["random", "sparse"]},
            },
        },
        "transport": {"enum": ["in_process", "tcp"]},
        "endpoints": {"type": "array", "items": {"type": "array", "prefixItems": [{"type": "string"}, {"type": "integer"}], "minItems": 2, "maxItems": 2}},
        "timeout": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
    },
}

AUDIT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": ["exhaustive", "algebraic", "sampled"]},
        "protocol": {"enum": ["psmm", "psmm-secrecy", "fpmm", "baseline"]},
        "params": {"type": "object"},
        "modulus": {"type": "integer", "minimum": 2},
        "alpha": {"type": "array", "items": {"type": "integer"}},
        "subset_size": _INT,
        "samples": _INT,
        "noiseless": {"type": "boolean"},
        "include_responses": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
        "plan": {"type": "object"},
    },
}

_SCENARIO = {
    "type": "object",
    "additionalProperties": False,
    "required": ["N", "K", "V", "lambda", "omega", "gamma"],
    "properties": {
        "N": _INT, "K": _INT, "V": _INT, "R": _INT, "S": _INT, "T": _INT, "T_A": _INT, "T_B": _INT,
        "lambda": _INT, "omega": _INT, "gamma": _INT,
        "s1": {"type": "number", "exclusiveMinimum": 0}, "s2": {"type": "number", "exclusiveMinimum": 0},
    },
}

COSTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": _SCENARIO,
        "strategies": {"type": "array", "items": {"enum": ["psmm", "prior", "fpmm"]}},
        "objective": {"enum": ["total_comm", "total_comp"]},
        "kind": {"enum": ["psmm", "fpmm"]},
        "K": _INT, "L": _INT, "M": _INT, "P": _INT,
    },
}


def load_config(path, schema) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg, schema)
    return cfg


def validate_config(cfg, schema) -> None:
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def _seed(value):
    return None if value == "os" else value


# -- commands --------------------------------------------------------------------------

def build_store_from(cfg: dict, seed=None):
    p = cfg.get("modulus", MERSENNE61)
    N, K, V, R = cfg["N"], cfg["K"], cfg["V"], cfg.get("R", 0)
    L, M = cfg.get("L", 1), cfg.get("M", 1)
    lam, om, ga = cfg.get("lambda", 4), cfg.get("omega", 4), cfg.get("gamma", 4)
    if K > N:
        raise ConfigError(f"K={K} exceeds N={N}: an (N, K) MDS code needs K <= N")
    seed = _seed(cfg.get("seed", 0) if seed is None else seed)
    ss_b, ss_a = np.random.SeedSequence(seed).spawn(2)
    lib_B = random_library("B", V, om, ga, np.random.default_rng(ss_b), p)
    lib_A = random_library("A", R, lam, om, np.random.default_rng(ss_a), p) if R else None
    store = build_store(lib_B, N, K, M=M, lib_A=lib_A, L=L, alpha=cfg.get("alpha"), seed=seed)
    store.dims.setdefault("lambda", lam)
    return store


def cmd_setup(args) -> int:
    cfg = load_config(args.config, SETUP_SCHEMA)
    store = build_store_from(cfg, args.seed)
    save_shards(store, args.out)
    print(f"wrote {store.N} servers x {store.V} B-matrices ({store.R} A-matrices) to {args.out}")
    return 0


def _make_request(cfg, store):
    mode, N, K = cfg["mode"], store.N, store.K
    noise_seed = _seed(cfg.get("noise_seed", 0))
    noiseless = cfg.get("noiseless", False)
    if mode == "psmm":
        S, T = cfg.get("S", 1), cfg.get("T", 1)
        plan = make_psmm_plan(N, K, cfg.get("L", 1), store.M, store.V, S, T, family=cfg.get("family"))
        lam = cfg.get("lambda", store.dims.get("lambda", plan.L * 4))
        A = random_matrix(lam, store.dims["omega"], np.random.default_rng(_seed(cfg.get("a_seed", 1))), store.modulus)
        return PsmmRequest(cfg.get("theta", 1), A, S, T, plan, noise_seed, noiseless), A
    T_A, T_B = cfg.get("T_A", 1), cfg.get("T_B", 1)
    if mode == "fpmm":
        plan = make_fpmm_plan(N, K, store.L, store.M, store.R, store.V, T_A, T_B, family=cfg.get("family"))
    else:
        plan = make_baseline_plan(N, K, store.R, store.V, T_A, T_B)
    return FpmmRequest(cfg.get("theta_A", 1), cfg.get("theta_B", 1), T_A, T_B, plan, noise_seed, noiseless), None


def _oracle(store, request, A):
    p = store.modulus
    first_k = range(store.K)
    lib_B = reconstruct_library(store, first_k, "B")
    if A is not None:
        return mat_mul(A, lib_B.matrices[request.theta - 1], p)
    lib_A = reconstruct_library(store, first_k, "A")
    return mat_mul(lib_A.matrices[request.theta_A - 1], lib_B.matrices[request.theta_B - 1], p)


def cmd_run(args) -> int:
    cfg = load_config(args.config, RUN_SCHEMA)
    if args.mode:
        cfg["mode"] = args.mode
    if "shards" in cfg:
        store = load_shards(cfg["shards"])
    elif "setup" in cfg:
        store = build_store_from(cfg["setup"])
    else:
        raise ConfigError("config needs either 'shards' or 'setup'")
    request, A = _make_request(cfg, store)
    f = cfg.get("faults", {})
    faults = FaultPlan(set(f.get("stragglers", [])), set(f.get("malicious", [])), f.get("E", 0), f.get("corruption", "random"))
    transcript = run_session(
        store, request, faults,
        transport=cfg.get("transport", "in_process"),
        seed=args.seed if args.seed is not None else cfg.get("seed", 0),
        endpoints=cfg.get("endpoints"),
        timeout_s=cfg.get("timeout", 30.0),
        raise_on_error=False,
    )
    out = transcript.save(args.out)
    if not transcript.ok:
        print(f"session failed: {transcript.error}", file=sys.stderr)
        return 2
    print(f"decoded {transcript.decoded.shape} from {len(transcript.consumed)} responses -> {out}")
    if args.verify:
        ok = np.array_equal(transcript.decoded, _oracle(store, request, A))
        print("verify: " + ("match" if ok else "MISMATCH"))
        return 0 if ok else 1
    return 0


def cmd_restripe(args) -> int:
    store = load_shards(args.shards)
    new = restripe(store, L=args.L, M=args.M)
    save_shards(new, args.out)
    print(f"restriped to L={new.L}, M={new.M} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    store = load_shards(args.shards)
    server = StorageServer(args.server_id, store, malicious=args.malicious)

    def ready(addr):
        print(f"server {args.server_id} listening on {addr[0]}:{addr[1]}", flush=True)

    serve_forever(server, args.host, args.port, ready=ready)
    return 0


def cmd_audit(args) -> int:
    cfg = load_config(args.config, AUDIT_SCHEMA)
    mode = args.mode or cfg.get("mode", "exhaustive")
    params = cfg.get("params", {})
    if mode == "algebraic":
        pc = dict(cfg.get("plan", {"kind": "psmm", "N": 25, "K": 2, "L": 2, "M": 2, "V": 2, "S": 2, "T": 2}))
        modulus = cfg.get("modulus", MERSENNE61)
        kind = pc.pop("kind", "psmm")
        maker = {"psmm": make_psmm_plan, "fpmm": make_fpmm_plan, "baseline": make_baseline_plan}[kind]
        try:
            plan = maker(**pc)
        except TypeError as exc:
            raise ConfigError(f"config error at plan: {exc}") from None
        alpha = cfg.get("alpha") or list(range(1, plan.N + 1))
        report = audit.audit_plan_masks(plan, alpha, modulus)
    elif mode == "exhaustive":
        report = audit.exhaustive_privacy_test(
            cfg.get("protocol", "psmm"), params, cfg.get("modulus", 5), cfg.get("alpha", [1, 2]),
            cfg.get("subset_size", 1), noiseless=cfg.get("noiseless", False),
            include_responses=cfg.get("include_responses", False),
        )
    else:
        report = audit.sampled_privacy_test(
            cfg.get("protocol", "psmm"), params, cfg.get("modulus", 97), cfg.get("alpha"),
            cfg.get("subset_size", 1), cfg.get("samples", 100_000), noiseless=cfg.get("noiseless", False),
            seed=args.seed if args.seed is not None else cfg.get("seed", 0),
        )
    text = json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(f"audit {mode}: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def _scenario(cfg) -> costs.CostScenario:
    sc = dict(cfg.get("scenario", {"N": 50, "K": 6, "V": 50, "lambda": 10**4, "omega": 10**4, "gamma": 10**4}))
    sc["lam"] = sc.pop("lambda")
    return costs.CostScenario(**sc)


def cmd_costs(args) -> int:
    cfg = load_config(args.config, COSTS_SCHEMA)
    if args.action == "sweep":
        sc = _scenario(cfg)
        rows = []
        for strategy in cfg.get("strategies", ["psmm", "prior"]):
            rows.extend(costs.pareto_sweep(sc, strategy, cfg.get("objective", "total_comm")))
        text = costs.write_csv(rows, args.out)
    elif args.action == "frontier":
        kind = cfg.get("kind", "psmm")
        pairs = costs.tradeoff_frontier(kind, cfg.get("K", 6), cfg.get("L", 3), cfg.get("M", 3), cfg.get("P", 100))
        text = costs.write_frontier_csv(pairs, kind, args.out)
    else:
        L, M, t = costs.optimize_runtime(_scenario(cfg), cfg.get("kind", "psmm"))
        text = json.dumps({"L": L, "M": M, "predicted_time": t}, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text)
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    """Wall-clock timings of the reference PSMM session (N=25, K=L=M=S=T=2) (informational)."""
    results = []
    for size in (8, 16, 40):
        store = build_store_from({"N": 25, "K": 2, "V": 2, "M": 2, "omega": size, "gamma": size, "seed": 0})
        plan = make_psmm_plan(25, 2, 2, 2, 2, 2, 2, family="Delta1")
        A = random_matrix(size, size, 1, store.modulus)
        start = time.perf_counter()
        tr = run_session(store, PsmmRequest(1, A, 2, 2, plan, 0), seed=0)
        results.append({"size": size, "seconds": time.perf_counter() - start, "timing": tr.timing})
    text = json.dumps(results, indent=1, default=str) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--verify", action="store_true", help="check the result against a naive product")
    common.add_argument("--seed", type=int, help="override the config seed")

    parser = argparse.ArgumentParser(prog="pmmkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("setup", parents=[common], help="generate and shard libraries").set_defaults(func=cmd_setup)
    run = sub.add_parser("run", parents=[common], help="run one protocol session")
    run.add_argument("--mode", choices=["psmm", "fpmm", "baseline"])
    run.set_defaults(func=cmd_run)
    rs = sub.add_parser("restripe", parents=[common], help="re-encode shards with a new (L, M)")
    rs.add_argument("--shards", required=True)
    rs.add_argument("--L", type=int)
    rs.add_argument("--M", type=int)
    rs.set_defaults(func=cmd_restripe)
    sv = sub.add_parser("serve", parents=[common], help="serve one storage node over TCP")
    sv.add_argument("--shards", required=True)
    sv.add_argument("--port", type=int, default=0)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--server-id", type=int, default=0)
    sv.add_argument("--malicious", choices=["random", "sparse"])
    sv.set_defaults(func=cmd_serve)
    au = sub.add_parser("audit", parents=[common], help="privacy and secrecy audits")
    au.add_argument("--mode", choices=["exhaustive", "algebraic", "sampled"])
    au.set_defaults(func=cmd_audit)
    co = sub.add_parser("costs", parents=[common], help="analytic cost model")
    co.add_argument("action", choices=["sweep", "frontier", "optimize"])
    co.set_defaults(func=cmd_costs)
    sub.add_parser("bench", parents=[common], help="informational timings").set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "setup" and not args.out:
        args.out = "shards"
    if args.command == "run" and not args.out:
        args.out = "session"
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (PmmError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
