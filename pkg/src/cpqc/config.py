"""Run configuration: one flat, sectioned ``key = value`` file per job.

The same file format drives every command; each command reads the
sections it needs.  Section and key names are validated so a typo fails
loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .finance import MarketModel, PayoffSpec, PriceGrid
from .search import GeneticConfig, SearchConfig
from .training import TrainConfig

TASKS = ("train", "conditional", "verify", "price", "benchmark")

# generations, population size, structure iterations
DESK_SCALE = (5, 8, 10)
PAPER_SCALE = (20, 48, 20)

_SECTION_KEYS = {
    "run": {"task", "seed", "out"},
    "payoff": {"kind", "strike", "weights"},
    "market": {"spot", "volatility", "rate", "maturity", "family"},
    "grid": {"qubits", "weight_qubits", "ranges"},
    "search": {
        "n_g",
        "n_p",
        "n_i",
        "beta",
        "rho_max",
        "optimizer",
        "learning_rate",
        "decay",
        "epsilon",
        "max_steps",
        "depth_penalty",
        "cnot_penalty",
        "model_qubits",
    },
    "conditional": {"circuit"},
    "verify": {"circuit", "trials"},
    "price": {"circuit", "backends", "c_tilde"},
    "benchmark": {"n_min", "n_max", "include_loader", "c_tilde"},
}


class ConfigError(Exception):
    """Malformed run configuration; the command line maps this to exit 2."""


def _parse_with(parse, section: str, key: str, text: str):
    try:
        return parse(text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _uint64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return value


def _floats(text: str) -> tuple:
    return tuple(float(part) for part in text.split(","))


def _ints(text: str) -> tuple:
    return tuple(int(part) for part in text.split(","))


def _ranges(text: str) -> tuple:
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ValueError(f"range {part.strip()!r} is not lo:hi")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


class _Section:
    """One config section with typed, validated access."""

    def __init__(self, name: str, mapping):
        self.name = name
        self.raw = dict(mapping)

    def get(self, key: str, parse=str, default=None, required: bool = False):
        if key not in self.raw:
            if required:
                raise ConfigError(f"[{self.name}] missing required key {key!r}")
            return default
        return _parse_with(parse, self.name, key, self.raw[key])


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, parsed and validated."""

    task: str
    seed: int
    out: str
    market: MarketModel
    payoff: PayoffSpec | None
    grid: PriceGrid | None
    search: GeneticConfig
    model_qubits: int | None
    options: dict = field(default_factory=dict)


def _read_sections(text: str) -> dict:
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), strict=True
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    sections = {}
    for name in parser.sections():
        if name not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{name}]")
        allowed = _SECTION_KEYS[name]
        for key in parser[name]:
            if key not in allowed:
                raise ConfigError(f"[{name}] unknown key {key!r}")
        sections[name] = _Section(name, parser[name])
    return sections


def _market_from(sec: _Section) -> MarketModel:
    kwargs = {}
    spot = sec.get("spot", _floats)
    if spot is not None:
        kwargs["spot"] = spot
    vol = sec.get("volatility", _floats)
    if vol is not None:
        kwargs["volatility"] = vol
    rate = sec.get("rate", float)
    if rate is not None:
        kwargs["rate"] = rate
    maturity = sec.get("maturity", float)
    if maturity is not None:
        kwargs["maturity"] = maturity
    family = sec.get("family")
    if family is not None:
        kwargs["family"] = family
    try:
        return MarketModel(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[market] {exc}") from None


def _payoff_from(sec: _Section) -> PayoffSpec:
    kind = sec.get("kind", required=True)
    strike = sec.get("strike", float, required=True)
    weights = sec.get("weights", _floats)
    try:
        return PayoffSpec(kind, strike, weights)
    except ValueError as exc:
        raise ConfigError(f"[payoff] {exc}") from None


def _grid_from(sec: _Section, market: MarketModel) -> PriceGrid:
    qubits = sec.get("qubits", _ints, required=True)
    weight_qubits = sec.get("weight_qubits", int, default=0)
    ranges = sec.get("ranges", _ranges)
    try:
        if ranges is None:
            if len(qubits) != len(market.spot):
                raise ValueError("one register size per underlying")
            return PriceGrid.for_model(market, qubits, weight_qubits)
        return PriceGrid(ranges, qubits, weight_qubits)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None


def _search_from(sec: _Section, seed: int, paper_scale: bool) -> GeneticConfig:
    scale = PAPER_SCALE if paper_scale else DESK_SCALE
    n_g = sec.get("n_g", int, default=scale[0])
    n_p = sec.get("n_p", int, default=scale[1])
    n_i = sec.get("n_i", int, default=scale[2])
    optimizer = sec.get("optimizer", default="shift")
    try:
        train = TrainConfig(
            learning_rate=sec.get("learning_rate", float, default=0.01),
            decay=sec.get("decay", float, default=0.9),
            epsilon=sec.get("epsilon", float, default=1e-8),
            max_steps=sec.get("max_steps", int, default=200),
            gradient=optimizer,
        )
        inner = SearchConfig(
            n_iterations=n_i,
            beta=sec.get("beta", float, default=5.0),
            removal_threshold=sec.get("rho_max", float, default=0.01),
            optimizer=train,
            depth_penalty=sec.get("depth_penalty", float, default=0.0),
            cnot_penalty=sec.get("cnot_penalty", float, default=0.0),
        )
        return GeneticConfig(
            n_generations=n_g, population_size=n_p, search=inner, seed=seed
        )
    except ValueError as exc:
        raise ConfigError(f"[search] {exc}") from None


def load_config(
    text: str,
    task: str,
    seed: int | None = None,
    out: str | None = None,
    paper_scale: bool = False,
) -> RunConfig:
    """Parse a config file body for one command.

    ``seed`` and ``out`` given here (the command-line flags) override the
    [run] section.  ``paper_scale`` swaps the desk-scale search defaults
    for the full-scale ones; explicit [search] keys still win.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    sections = _read_sections(text)
    empty = _Section("run", {})
    run = sections.get("run", empty)
    declared = run.get("task")
    if declared is not None and declared != task:
        raise ConfigError(f"[run] task = {declared} does not match command {task!r}")
    if seed is None:
        seed = run.get("seed", _uint64, default=0)
    else:
        seed = _parse_with(_uint64, "run", "seed", str(seed))
    if out is None:
        out = run.get("out", default=".")

    market = _market_from(sections.get("market", _Section("market", {})))
    payoff = None
    if "payoff" in sections:
        payoff = _payoff_from(sections["payoff"])
    grid = None
    if "grid" in sections:
        grid = _grid_from(sections["grid"], market)
    search = _search_from(sections.get("search", _Section("search", {})), seed, paper_scale)
    model_qubits = sections.get("search", _Section("search", {})).get("model_qubits", int)

    if task in ("train", "price") and payoff is None:
        raise ConfigError(f"task {task!r} needs a [payoff] section")
    if task in ("train", "conditional", "verify", "price") and grid is None:
        raise ConfigError(f"task {task!r} needs a [grid] section")

    options = {}
    if task in sections:
        sec = sections[task]
        if task == "conditional":
            options["circuit"] = sec.get("circuit", required=True)
        elif task == "verify":
            options["circuit"] = sec.get("circuit", required=True)
            options["trials"] = sec.get("trials", int, default=100)
            if options["trials"] < 1:
                raise ConfigError("[verify] trials must be positive")
        elif task == "price":
            options["circuit"] = sec.get("circuit")
            options["backends"] = tuple(
                part.strip() for part in sec.get("backends", default="exact").split(",")
            )
            for name in options["backends"]:
                if name not in ("exact", "cpqc", "arithmetic"):
                    raise ConfigError(f"[price] unknown backend {name!r}")
            if "cpqc" in options["backends"] and options["circuit"] is None:
                raise ConfigError("[price] the cpqc backend needs a circuit file")
            options["c_tilde"] = sec.get("c_tilde", float, default=0.05)
        elif task == "benchmark":
            options["n_min"] = sec.get("n_min", int, default=3)
            options["n_max"] = sec.get("n_max", int, default=14)
            options["include_loader"] = sec.get("include_loader", _bool, default=False)
            options["c_tilde"] = sec.get("c_tilde", float, default=0.05)
            if options["n_min"] < 2 or options["n_max"] < options["n_min"]:
                raise ConfigError("[benchmark] need 2 <= n_min <= n_max")
    elif task == "conditional":
        raise ConfigError("task 'conditional' needs a [conditional] section")
    elif task == "verify":
        raise ConfigError("task 'verify' needs a [verify] section")
    elif task == "price":
        options = {"circuit": None, "backends": ("exact",), "c_tilde": 0.05}
    elif task == "benchmark":
        options = {"n_min": 3, "n_max": 14, "include_loader": False, "c_tilde": 0.05}

    return RunConfig(
        task=task,
        seed=seed,
        out=out,
        market=market,
        payoff=payoff,
        grid=grid,
        search=search,
        model_qubits=model_qubits,
        options=options,
    )
