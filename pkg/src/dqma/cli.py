"""Command-line runner: ``dqma <subcommand> [--config FILE] [options]``.

Exit codes: 0 success, 1 verification failure, 2 usage, config or cap error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .acceptance import CRITERIA, run_criterion
from .classical import BUNDLED, AttackPreconditionError, eq_fooling_set, fooling_attack
from .fingerprint import make_family
from .linalg import (DensityMatrix, DimensionCapError, PureState, RegisterLayout,
                     set_dimension_cap, swap_test_accept_probability, tensor)
from .path import (OutOfScopeError, PathInstance, build_registers, exact_acceptance,
                   register_locations, repeat_protocol, resolve_tests, sampled_acceptance,
                   soundness_bound, soundness_repetitions)
from .protocols import eq_protocol, noisy_protocol, toy_eq_protocol
from .serialize import (ConfigError, dumps_report, field, loads, network_from_json,
                        state_from_json, strategy_from_json)
from .tree import label_tree, verify_labels
from .tree_protocol import TreeInstance, run_tree_protocol

SWEEP_COLUMNS = [
    ("n", "input length in bits"),
    ("r", "path length (edges)"),
    ("k", "number of parallel repetitions"),
    ("strategy", "prover strategy"),
    ("accept", "acceptance probability after k repetitions"),
    ("single_round_accept", "acceptance probability of one round"),
    ("rejection", "single-round rejection probability"),
    ("bound_42r2", "guaranteed single-round rejection 1/(42 r^2)"),
    ("rejection_ok", "1 if rejection >= bound_42r2 (illegal inputs only)"),
    ("sum_alpha", "sum over nodes of conditional rejection probabilities"),
    ("bound_21r", "guaranteed lower bound 1/(21 r) on sum_alpha"),
    ("sum_ok", "1 if sum_alpha >= bound_21r (illegal inputs only)"),
    ("certificate_qubits", "qubits held by each intermediate node over k repetitions"),
]


def _g(v):
    return f"{v:.12g}"


def _settings(args, keys: dict) -> dict:
    """Merge ``--config`` JSON with command-line flags (flags win)."""
    doc = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"config: cannot read {args.config}: {e.strerror}") from None
        doc = loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a JSON object")
        unknown = set(doc) - set(keys) - {"schemaVersion"}
        if unknown:
            raise ConfigError(f"config: unknown field '{sorted(unknown)[0]}'")
    out = {}
    for key, (kind, default) in keys.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        else:
            out[key] = field(doc, key, kind, "config", default)
    return out


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _protocol(cfg: dict):
    kind = cfg["protocol"]
    if kind == "eq":
        n = cfg["n"]
        if n < 1:
            raise ConfigError("config: field 'n' must be at least 1")
        return eq_protocol(make_family(n))
    if kind == "toy":
        return toy_eq_protocol()
    if kind == "noisy":
        return noisy_protocol(eq_protocol(make_family(cfg["n"])), cfg["flip"])
    raise ConfigError("config: field 'protocol' must be eq, toy or noisy")


def _inputs(cfg: dict, pi) -> tuple[str, str]:
    bits = pi.input_bits
    x = cfg["x"] if cfg["x"] is not None else "0" * bits
    y = cfg["y"] if cfg["y"] is not None else x
    return x, y


# -- subcommands -------------------------------------------------------------

def cmd_swap_test(args) -> int:
    cfg = _settings(args, {"states": (list, None), "state": (dict, None), "localDim": (int, None)})
    if cfg["states"] is not None:
        if len(cfg["states"]) != 2:
            raise ConfigError("config: field 'states' must hold exactly two states")
        a, b = (state_from_json(s, f"states[{i}]") for i, s in enumerate(cfg["states"]))
        if a.dim != b.dim:
            raise ConfigError("config: field 'states' must have equal dimensions")
        da = a.density() if isinstance(a, PureState) else a
        db = b.density() if isinstance(b, PureState) else b
        joint = DensityMatrix(tensor(da, db).matrix)
        layout = RegisterLayout.of(a.dim, a.dim)
        report = {"acceptProbability": swap_test_accept_probability(joint, layout),
                  "overlap": float(np.sum(da.matrix * db.matrix.T).real)}
    elif cfg["state"] is not None:
        st = state_from_json(cfg["state"], "state")
        rho = st.density() if isinstance(st, PureState) else st
        d = cfg["localDim"]
        if d is None or d * d != rho.dim:
            raise ConfigError("config: field 'localDim' must satisfy localDim^2 = state dimension")
        report = {"acceptProbability": swap_test_accept_probability(rho, RegisterLayout.of(d, d))}
    else:
        raise ConfigError("config: give either 'states' (two registers) or 'state' with 'localDim'")
    _emit(args, dumps_report("swap-test", report))
    return 0


PATH_KEYS = {
    "protocol": (str, "eq"), "n": (int, 4), "flip": (float, 0.05), "r": (int, 3),
    "x": (str, None), "y": (str, None), "strategy": (object, "honest"), "mode": (str, "exact"),
    "trials": (int, None), "seed": (int, None), "backend": (str, "auto"), "k": (int, 1),
    "workers": (int, 1), "coins": (str, None), "dimensionCap": (int, None),
}


def _strategy(value, where="strategy"):
    if isinstance(value, str):
        try:
            value = json.loads(value) if value.lstrip().startswith("{") else value
        except json.JSONDecodeError as e:
            raise ConfigError(f"{where}: invalid JSON at column {e.colno}: {e.msg}") from None
    return strategy_from_json(value, where)


def cmd_path_run(args) -> int:
    cfg = _settings(args, PATH_KEYS)
    if cfg["dimensionCap"] is None:
        return _path_run(args, cfg)
    previous = set_dimension_cap(cfg["dimensionCap"])
    try:
        return _path_run(args, cfg)
    finally:
        set_dimension_cap(previous)


def _path_run(args, cfg: dict) -> int:
    pi = _protocol(cfg)
    x, y = _inputs(cfg, pi)
    inst = PathInstance(cfg["r"], pi, x, y)
    strategy = _strategy(cfg["strategy"])
    if cfg["mode"] == "exact":
        rep = repeat_protocol(inst, strategy, cfg["k"], cfg["backend"]) if cfg["k"] > 1 else \
            exact_acceptance(inst, strategy, cfg["backend"])
    elif cfg["mode"] == "sampled":
        if cfg["seed"] is None or cfg["trials"] is None:
            raise ConfigError("config: sampled runs need fields 'seed' and 'trials'")
        if cfg["k"] != 1:
            raise ConfigError("config: field 'k' must be 1 in sampled mode")
        rep = sampled_acceptance(inst, strategy, cfg["trials"], cfg["seed"], cfg["backend"], cfg["workers"])
    else:
        raise ConfigError("config: field 'mode' must be exact or sampled")
    out = rep.to_dict()
    out["n"] = pi.input_bits
    out["protocol"] = pi.name
    out["x"], out["y"] = x, y
    if cfg["coins"] is not None:
        coins = cfg["coins"]
        if len(coins) != inst.r or set(coins) - {"0", "1"}:
            raise ConfigError(f"config: field 'coins' must be {inst.r} bits")
        bits = [int(c) for c in coins]
        regs = build_registers(inst, strategy, cfg["backend"])
        tests = resolve_tests(inst, bits)
        out["trace"] = {
            "coins": coins,
            "registerLocations": register_locations(bits),
            "tests": [{"kind": t.kind, "node": t.node, "registers": list(t.registers),
                       "acceptProbability": regs.accept_probability(t)} for t in tests],
            "acceptProbability": regs.joint_accept_probability(tests),
        }
    _emit(args, dumps_report("path-report", out))
    return 0


def _int_list(text: str, name: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"config: field '{name}' must be a comma-separated list of integers") from None


def cmd_path_sweep(args) -> int:
    if args.describe:
        sys.stdout.write("".join(f"{name}: {text}\n" for name, text in SWEEP_COLUMNS))
        return 0
    cfg = _settings(args, {"rs": (list, None), "ns": (list, None), "r": (str, "2,3,4,5,6"),
                           "n": (str, "4"), "k": (str, "1"), "strategy": (object, "rotation"),
                           "protocol": (str, "eq")})
    rs = cfg["rs"] or _int_list(cfg["r"], "r")
    ns = cfg["ns"] or _int_list(cfg["n"], "n")
    ks = _int_list(str(cfg["k"]), "k")
    strategy = _strategy(cfg["strategy"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c for c, _ in SWEEP_COLUMNS])
    violations = 0
    for n in ns:
        pi = eq_protocol(make_family(n)) if cfg["protocol"] == "eq" else toy_eq_protocol()
        bits = pi.input_bits
        for r in rs:
            inst = PathInstance(r, pi, "0" * bits, "1" * bits)
            single = exact_acceptance(inst, strategy)
            for k in ks:
                k_eff = soundness_repetitions(r) if k == 0 else k
                rep = repeat_protocol(inst, strategy, k_eff)
                rej = single.rejection_probability
                rej_ok = rej >= soundness_bound(r) - 1e-12
                sum_ok = single.soundness_sum >= 1 / (21 * r) - 1e-9
                violations += not (rej_ok and sum_ok)
                writer.writerow([n, r, k_eff, single.strategy, _g(rep.accept_probability),
                                 _g(single.accept_probability), _g(rej), _g(soundness_bound(r)),
                                 int(rej_ok), _g(single.soundness_sum), _g(1 / (21 * r)), int(sum_ok),
                                 rep.certificate_qubits])
    _emit(args, buf.getvalue())
    return 1 if violations else 0


def cmd_tree_run(args) -> int:
    cfg = _settings(args, {"network": (dict, None), "networkFile": (str, None),
                           "strategy": (object, "honest"), "k": (int, 1), "mode": (str, "exact"),
                           "trials": (int, None), "seed": (int, None), "backend": (str, "auto"),
                           "corrupt": (dict, None)})
    if args.network:
        cfg["networkFile"] = args.network
    if cfg["networkFile"]:
        try:
            with open(cfg["networkFile"], encoding="utf-8") as fh:
                netdoc = loads(fh.read(), "network")
        except OSError as e:
            raise ConfigError(f"network: cannot read {cfg['networkFile']}: {e.strerror}") from None
    elif cfg["network"] is not None:
        netdoc = cfg["network"]
    else:
        raise ConfigError("config: give 'network' inline or 'networkFile' / --network")
    net = network_from_json(netdoc)
    if not net.inputs:
        raise ConfigError("network: field 'inputs' is required for tree-run")
    inst = TreeInstance.from_network(net)
    labels = label_tree(net, inst.tree)
    if cfg["corrupt"] is not None:
        c = cfg["corrupt"]
        node = field(c, "node", int, "corrupt")
        fname = field(c, "field", str, "corrupt")
        if node not in labels or fname not in labels[node].__dict__:
            raise ConfigError("corrupt: unknown node or field")
        labels[node] = type(labels[node])(**{**labels[node].__dict__, fname: c.get("value")})
    if cfg["mode"] == "sampled" and cfg["seed"] is None:
        raise ConfigError("config: sampled runs need field 'seed'")
    rep = run_tree_protocol(inst, _strategy(cfg["strategy"]), cfg["k"], labels, cfg["mode"],
                            cfg["trials"], cfg["seed"], cfg["backend"])
    out = rep.to_dict()
    out["root"] = inst.tree.root
    out["tree"] = {str(v): str(p) for v, p in sorted(inst.tree.parent.items(), key=lambda kv: str(kv[0]))}
    out["labelDecisions"] = {str(v): ok for v, ok in verify_labels(net, labels).items()}
    _emit(args, dumps_report("tree-report", out))
    return 0


def cmd_classical_attack(args) -> int:
    cfg = _settings(args, {"protocol": (str, "parity-hash"), "n": (int, 5), "r": (int, 3),
                           "p": (float, 0.25)})
    name = cfg["protocol"]
    if name not in BUNDLED:
        raise ConfigError(f"config: field 'protocol' must be one of {', '.join(sorted(BUNDLED))}")
    kwargs = {"n": cfg["n"], "r": cfg["r"]}
    if name == "parity-hash":
        kwargs["p"] = cfg["p"]
    proto = BUNDLED[name](**kwargs)
    rep = fooling_attack(proto, eq_fooling_set(cfg["n"]))
    _emit(args, dumps_report("classical-attack", rep.to_dict()))
    return 0 if rep.bound_met else 1


def cmd_verify_all(args) -> int:
    numbers = _int_list(args.only, "only") if args.only else sorted(CRITERIA)
    failed = 0
    for k in numbers:
        if k not in CRITERIA:
            raise ConfigError(f"--only: no criterion {k}")
        res = run_criterion(k)
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"{len(numbers) - failed}/{len(numbers)} criteria passed")
    return 1 if failed else 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqma", description="Distributed quantum equality certification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON config file; command-line flags override it")
        p.add_argument("--output", help="write the result here instead of stdout")

    p = sub.add_parser("swap-test", help="SWAP test on two registers described in the config")
    common(p)
    p.set_defaults(func=cmd_swap_test)

    p = sub.add_parser("path-run", help="path protocol analysis, JSON report")
    common(p)
    p.add_argument("--protocol", choices=["eq", "toy", "noisy"])
    p.add_argument("--n", type=int)
    p.add_argument("--flip", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--strategy", help="honest, rotation, or a strategy JSON object")
    p.add_argument("--mode", choices=["exact", "sampled"])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["auto", "product", "global"])
    p.add_argument("--k", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--coins", help="coin string b_0..b_{r-1}; adds a register-location trace")
    p.add_argument("--dimension-cap", dest="dimensionCap", type=int)
    p.set_defaults(func=cmd_path_run)

    p = sub.add_parser("path-sweep", help="sweep r and n, CSV against the soundness bounds")
    common(p)
    p.add_argument("--r", help="comma-separated path lengths (default 2,3,4,5,6)")
    p.add_argument("--n", help="comma-separated input lengths (default 4)")
    p.add_argument("--k", help="comma-separated repetition counts; 0 means 84 r^2")
    p.add_argument("--strategy")
    p.add_argument("--protocol", choices=["eq", "toy"])
    p.add_argument("--describe", action="store_true", help="document the CSV columns and exit")
    p.set_defaults(func=cmd_path_sweep)

    p = sub.add_parser("tree-run", help="labels plus quantum protocol on a network")
    common(p)
    p.add_argument("--network", help="network JSON file")
    p.add_argument("--strategy")
    p.add_argument("--k", type=int)
    p.add_argument("--mode", choices=["exact", "sampled"])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["auto", "product", "global"])
    p.set_defaults(func=cmd_tree_run)

    p = sub.add_parser("classical-attack", help="fooling-set attack on a bundled classical protocol")
    common(p)
    p.add_argument("--protocol", choices=sorted(BUNDLED))
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--p", type=float)
    p.set_defaults(func=cmd_classical_attack)

    p = sub.add_parser("verify-all", help="run every acceptance criterion")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_verify_all)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DimensionCapError, OutOfScopeError, AttackPreconditionError) as e:
        print(f"dqma: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as e:
        print(f"dqma: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
