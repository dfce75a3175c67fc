"""Command-line front end.

Five commands share one config format: ``train`` runs the genetic
architecture search, ``conditional`` rebuilds a trained circuit as a
conditional circuit, ``verify`` spot-checks the expectation equality on
random distributions, ``price`` evaluates an option through the chosen
backends, and ``benchmark`` emits the resource-scaling CSVs.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .circuit import Circuit, CircuitParseError, deserialize, serialize
from .conditional import (
    ControlLayout,
    ProductDistribution,
    loader_gates,
    make_conditional,
    serialize_conditional,
    verify_proposition,
)
from .config import ConfigError, RunConfig, load_config
from .finance import (
    ArithmeticBackend,
    CpqcBackend,
    ExactBackend,
    MarketModel,
    PayoffSpec,
    PriceGrid,
    build_arithmetic_circuit,
    build_training_problem,
    discretize,
    price,
)
from .fixtures import load_fixture
from .search import default_pool, genetic_learn, layered_circuit, lineage_csv
from .transpile import report

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpqc",
        description="Train, transform, verify, price and benchmark "
        "conditional parameterized quantum circuits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "train": "genetic architecture search on a payoff regression task",
        "conditional": "turn a trained circuit file into a conditional circuit",
        "verify": "check the distribution-weighted expectation equality",
        "price": "price an option on the configured backends",
        "benchmark": "emit CNOT/depth scaling CSVs for both constructions",
    }
    for name, text in commands.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
        p.add_argument("--out", default=None, help="override [run] output directory")
        if name == "train":
            p.add_argument(
                "--paper-scale",
                action="store_true",
                help="full-scale search defaults: 20 generations, "
                "48 members, 20 iterations",
            )
    return parser


def _read_config_text(path: str | None) -> str:
    if path is None:
        return ""
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None


def _load_circuit(ref: str):
    """Resolve a circuit reference: a file path first, then a fixture id."""
    if os.path.exists(ref):
        with open(ref) as fh:
            obj, theta = deserialize(fh.read())
        if not isinstance(obj, Circuit):
            raise CircuitParseError(f"{ref} does not hold a plain circuit")
        return obj, theta
    try:
        return load_fixture(ref)
    except ValueError:
        raise ConfigError(f"circuit {ref!r}: no such file or fixture") from None


def _write(path: str, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_train(cfg: RunConfig) -> int:
    try:
        setup = build_training_problem(cfg.payoff, cfg.grid)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    num_features = setup.problem.features.shape[1]
    width = cfg.model_qubits or sum(cfg.grid.register_sizes())
    circuit0 = layered_circuit(width, num_features)
    pool = default_pool(num_features)
    try:
        result = genetic_learn([circuit0], setup.problem, pool, cfg.search)
    except ValueError as exc:
        # non-finite costs poison the selection weights
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    if not math.isfinite(result.cost):
        print(f"training diverged: cost {result.cost}", file=sys.stderr)
        return EXIT_DIVERGED
    os.makedirs(cfg.out, exist_ok=True)
    model_path = os.path.join(cfg.out, "model.cpqc")
    _write(model_path, serialize(result.circuit, result.theta))
    _write(os.path.join(cfg.out, "lineage.csv"), lineage_csv(result))
    summary = {
        "cost": result.cost,
        "features": num_features,
        "model_qubits": width,
        "num_params": int(result.circuit.num_params),
        "scale_offset": float(setup.scale.offset),
        "scale_slope": float(setup.scale.slope),
        "seed": cfg.seed,
    }
    _write(
        os.path.join(cfg.out, "train.json"),
        json.dumps(summary, sort_keys=True) + "\n",
    )
    print(f"final cost {result.cost!r}")
    print(f"wrote {model_path}")
    return EXIT_OK


def cmd_conditional(cfg: RunConfig) -> int:
    circuit, theta = _load_circuit(cfg.options["circuit"])
    try:
        cc = make_conditional(circuit, cfg.grid.layout(circuit.num_qubits))
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.out, exist_ok=True)
    out_path = os.path.join(cfg.out, "conditional.cpqc")
    _write(out_path, serialize_conditional(cc, theta))
    regs = "x".join(str(n) for n in cc.layout.register_sizes)
    print(f"conditional circuit on {regs} control qubits, "
          f"{cc.controlled_gate_count()} controlled encodings")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    try:
        circuit, _ = _load_circuit(cfg.options["circuit"])
    except CircuitParseError as exc:
        print(f"verify failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    try:
        cc = make_conditional(circuit, cfg.grid.layout(circuit.num_qubits))
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    trials = cfg.options["trials"]
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    passed = True
    for _ in range(trials):
        theta = rng.uniform(-np.pi, np.pi, circuit.num_params)
        vectors = []
        for n in cc.layout.register_sizes:
            p = rng.random(1 << n)
            vectors.append(p / p.sum())
        rep = verify_proposition(circuit, cc, ProductDistribution(tuple(vectors)), theta)
        worst = max(worst, rep.delta)
        passed = passed and rep.passed
    status = "ok" if passed else "FAILED"
    print(f"{trials} trials, worst |delta| = {worst:.3e}: {status}")
    return EXIT_OK if passed else EXIT_VERIFY


def _price_label(spec: PayoffSpec) -> str:
    label = f"{spec.kind}-K{spec.strike:g}"
    if spec.weights is not None:
        label += "-w" + ",".join(f"{w:g}" for w in spec.weights)
    return label


def cmd_price(cfg: RunConfig) -> int:
    backends = []
    for name in cfg.options["backends"]:
        if name == "exact":
            backends.append(ExactBackend())
        elif name == "arithmetic":
            backends.append(ArithmeticBackend(cfg.options["c_tilde"]))
        else:
            circuit, theta = _load_circuit(cfg.options["circuit"])
            if theta is None:
                raise ConfigError("[price] circuit file carries no parameters")
            setup = build_training_problem(cfg.payoff, cfg.grid)
            backends.append(CpqcBackend(circuit, theta, setup.scale))
    records = []
    for backend in backends:
        try:
            res = price(cfg.payoff, cfg.grid, cfg.market, backend)
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except RuntimeError as exc:
            print(f"price check failed: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        reference = res.trace.get("reference_expectation", res.expectation)
        reference_price = res.trace["discount"] * reference
        records.append(
            json.dumps(
                {
                    "spec": _price_label(cfg.payoff),
                    "n": sum(cfg.grid.register_sizes()),
                    "backend": res.backend,
                    "price": res.price,
                    "reference_price": reference_price,
                    "abs_error": abs(res.price - reference_price),
                },
                sort_keys=True,
            )
        )
    os.makedirs(cfg.out, exist_ok=True)
    out_path = os.path.join(cfg.out, "price.jsonl")
    _write(out_path, "\n".join(records) + "\n")
    for line in records:
        print(line)
    return EXIT_OK


def _cpqc_row(fixture: str, sizes, market: MarketModel, include_loader: bool):
    circuit, theta = load_fixture(fixture)
    layout = ControlLayout.dyadic(tuple(sizes), circuit.num_qubits)
    cc = make_conditional(circuit, layout)
    gates = list(cc.to_gate_sequence(theta))
    if include_loader:
        spots = market.spot * len(sizes) if len(market.spot) == 1 else market.spot
        model = MarketModel(spots, market.volatility, market.rate,
                            market.maturity, market.family)
        grid = PriceGrid.for_model(model, tuple(sizes))
        gates = loader_gates(discretize(model, grid), layout) + gates
    rep = report(gates, include_loader=include_loader)
    return rep.cnot_count, rep.depth


def _vanilla_arith_row(n: int, strike: float, market: MarketModel, c_tilde: float):
    grid = PriceGrid.for_model(
        MarketModel(market.spot[:1], market.volatility[:1], market.rate,
                    market.maturity, market.family),
        (n,),
    )
    circ = build_arithmetic_circuit(PayoffSpec("call", strike), grid, c_tilde)
    rep = report(circ.gates)
    return rep.cnot_count, rep.depth


def _basket_arith_row(n: int, strike: float, market: MarketModel, c_tilde: float):
    n0, n1 = (n + 1) // 2, n // 2
    top = 2.0 * market.spot[0] * math.exp(market.rate * market.maturity)
    step = top / ((1 << n0) - 1)  # equal grid step keeps the weighted sum integral
    grid = PriceGrid(((0.0, top), (0.0, step * ((1 << n1) - 1))), (n0, n1))
    spec = PayoffSpec("basket_fixed", strike, (2 / 3, 1 / 3))
    circ = build_arithmetic_circuit(spec, grid, c_tilde)
    rep = report(circ.gates)
    return rep.cnot_count, rep.depth


def cmd_benchmark(cfg: RunConfig) -> int:
    n_values = range(cfg.options["n_min"], cfg.options["n_max"] + 1)
    strike = cfg.payoff.strike if cfg.payoff is not None else 100.0
    c_tilde = cfg.options["c_tilde"]
    include_loader = cfg.options["include_loader"]
    os.makedirs(cfg.out, exist_ok=True)
    tasks = {
        "benchmark_vanilla.csv": (
            lambda n: _cpqc_row("call_fig3", (n,), cfg.market, include_loader),
            lambda n: _vanilla_arith_row(n, strike, cfg.market, c_tilde),
        ),
        "benchmark_basket.csv": (
            lambda n: _cpqc_row(
                "basket_figA2", ((n + 1) // 2, n // 2), cfg.market, include_loader
            ),
            lambda n: _basket_arith_row(n, strike, cfg.market, c_tilde),
        ),
    }
    for filename, (cpqc_fn, arith_fn) in tasks.items():
        lines = ["n,backend,cnot,depth"]
        for n in n_values:
            cnot, depth = cpqc_fn(n)
            lines.append(f"{n},cpqc,{cnot},{depth}")
            cnot, depth = arith_fn(n)
            lines.append(f"{n},arithmetic,{cnot},{depth}")
        path = os.path.join(cfg.out, filename)
        _write(path, "\n".join(lines) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "conditional": cmd_conditional,
    "verify": cmd_verify,
    "price": cmd_price,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(
            _read_config_text(args.config),
            task=args.command,
            seed=args.seed,
            out=args.out,
            paper_scale=getattr(args, "paper_scale", False),
        )
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
