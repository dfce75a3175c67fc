"""Structure search: variable-ansatz mutation loop and its genetic wrapper.

One search iteration samples a block from the pool, inserts it at a random
position, re-trains the parameters, and keeps the change with probability

    g(c_old, c_new) = 1                                if c_new <= c_old
                      exp(-beta (c_new - c_old)/c_old) otherwise,

followed by a greedy gate-removal pass and one re-optimization.  Trainable
insertions start at theta* = 0, where every pool template except plain CNOT
and the encodings acts as the identity, so those insertions cannot raise the
cost before training.

The genetic wrapper runs the loop on a population and resamples members
between generations with weights proportional to 1/cost^2.  Every member
draws its randomness from a seed keyed by (master seed, generation, member),
so serial and thread-parallel runs produce identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backend import thread_count
from .circuit import Block, Circuit, renumber_slots
from .training import Problem, TrainConfig, make_shift_evaluator, optimize

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class BlockPool:
    """Insertable block templates.

    Template forms: ``("rot", axis)``, ``("cnot",)``, ``("pair",)`` (the
    CNOT-conjugated rotation pair, identity at theta* = 0), and
    ``("enc", axis, feature)``.  ``connectivity`` is an optional set of
    unordered qubit pairs restricting two-qubit placements; ``native_only``
    records a hardware restriction for reporting (the default templates are
    already rotation/CNOT native).
    """

    candidates: tuple
    connectivity: frozenset | None = None
    native_only: bool = False

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("empty block pool")
        for t in self.candidates:
            if t[0] not in ("rot", "cnot", "pair", "enc"):
                raise ValueError(f"unknown template {t!r}")
            if t[0] == "rot" and t[1] not in AXES:
                raise ValueError(f"bad rotation axis in {t!r}")
            if t[0] == "enc" and (t[1] not in AXES or t[2] < 0):
                raise ValueError(f"bad encoding template {t!r}")
        if self.connectivity is not None:
            object.__setattr__(
                self,
                "connectivity",
                frozenset(frozenset(p) for p in self.connectivity),
            )

    def allows_pair(self, a: int, b: int) -> bool:
        return self.connectivity is None or frozenset((a, b)) in self.connectivity


def default_pool(num_features: int, connectivity=None, native_only: bool = False) -> BlockPool:
    """Rotations on each axis, CNOT, the rotation pair, and one encoding
    template per feature per axis."""
    cands = [("rot", a) for a in AXES]
    cands += [("cnot",), ("pair",)]
    cands += [("enc", a, k) for k in range(num_features) for a in AXES]
    conn = None if connectivity is None else frozenset(frozenset(p) for p in connectivity)
    return BlockPool(tuple(cands), conn, native_only)


@dataclass(frozen=True)
class SearchConfig:
    n_iterations: int = 10
    beta: float = 5.0
    removal_threshold: float = 0.01  # rho_max
    protect: bool = True
    seed: int | None = None
    optimizer: TrainConfig = TrainConfig()
    depth_penalty: float = 0.0  # lambda_d
    cnot_penalty: float = 0.0  # lambda_c

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.removal_threshold < 0:
            raise ValueError("removal threshold must be nonnegative")
        if self.n_iterations < 0:
            raise ValueError("iteration count must be nonnegative")


@dataclass(frozen=True)
class GeneticConfig:
    n_generations: int = 5
    population_size: int = 8
    search: SearchConfig = SearchConfig()
    seed: int | None = None

    def __post_init__(self):
        if self.n_generations < 1 or self.population_size < 1:
            raise ValueError("need at least one generation and one member")


def accept_probability(c_old: float, c_new: float, beta: float = 5.0) -> float:
    if c_old < 0 or c_new < 0:
        raise ValueError("costs must be nonnegative")
    if c_new <= c_old:
        return 1.0
    if c_old == 0.0:
        return 0.0
    return math.exp(-beta * (c_new - c_old) / c_old)


def selection_weights(costs) -> np.ndarray:
    costs = np.asarray(costs, dtype=np.float64)
    if np.any(costs < 0):
        raise ValueError("costs must be nonnegative")
    zero = costs == 0.0
    if np.any(zero):
        return zero / zero.sum()
    inv = 1.0 / costs**2
    return inv / inv.sum()


def block_depth(blocks) -> int:
    """Unit-duration depth over the block list (penalty bookkeeping)."""
    busy: dict[int, int] = {}
    depth = 0
    for b in blocks:
        t = max((busy.get(q, 0) for q in b.qubits()), default=0) + 1
        for q in b.qubits():
            busy[q] = t
        depth = max(depth, t)
    return depth


def sample_mutation(circuit: Circuit, theta, pool: BlockPool, rng) -> tuple[Circuit, np.ndarray]:
    """Insert one sampled template at a uniform position.

    New trainable angles start at 0.  Parameter slots are renumbered into
    block order afterwards, with theta remapped to match.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    n = circuit.num_qubits
    pairs = [
        (a, b)
        for a in range(n)
        for b in range(n)
        if a != b and pool.allows_pair(a, b)
    ]
    eligible = [
        t for t in pool.candidates if pairs or t[0] not in ("cnot", "pair")
    ]
    if not eligible:
        raise ValueError("no pool template fits this circuit's connectivity")
    t = eligible[rng.integers(len(eligible))]
    Q = circuit.num_params
    added = []
    if t[0] == "rot":
        q = int(rng.integers(n))
        inserted = [Block.rot(t[1], q, Q)]
        added = [0.0]
    elif t[0] == "enc":
        q = int(rng.integers(n))
        if t[2] >= circuit.num_features:
            raise ValueError(f"encoding template references feature {t[2]}")
        inserted = [Block.enc(t[1], q, t[2])]
    else:
        a, b = pairs[rng.integers(len(pairs))]
        if t[0] == "cnot":
            inserted = [Block.cnot(a, b)]
        else:
            ax_a = AXES[rng.integers(3)]
            ax_b = AXES[rng.integers(3)]
            inserted = [
                Block.cnot(a, b),
                Block.rot(ax_a, a, Q),
                Block.rot(ax_b, b, Q + 1),
                Block.cnot(a, b),
            ]
            added = [0.0, 0.0]
    pos = int(rng.integers(len(circuit.blocks) + 1))
    blocks = list(circuit.blocks[:pos]) + inserted + list(circuit.blocks[pos:])
    ext = np.concatenate([theta, added]) if added else theta
    blocks, new_theta, num_params = renumber_slots(blocks, ext)
    new_circ = Circuit(n, circuit.num_features, num_params, tuple(blocks), circuit.measured)
    return new_circ, (new_theta if new_theta is not None else np.zeros(0))


def _relevant_qubits(blocks, measured) -> set[int]:
    """Qubits joined to a measured qubit through entangling gates."""
    parent = {}

    def find(q):
        parent.setdefault(q, q)
        while parent[q] != q:
            parent[q] = parent[parent[q]]
            q = parent[q]
        return q

    for b in blocks:
        if b.is_entangling:
            ra, rb = find(b.control), find(b.qubit)
            if ra != rb:
                parent[ra] = rb
    roots = {find(q) for q in measured}
    touched = {q for b in blocks for q in b.qubits()} | set(measured)
    return {q for q in touched if find(q) in roots}


def _protected(blocks, index, measured) -> bool:
    """Removal guards: keep a relevant qubit's last entangling gate and its
    last trainable rotation."""
    b = blocks[index]
    relevant = _relevant_qubits(blocks, measured)
    if b.is_entangling:
        for q in (b.control, b.qubit):
            if q not in relevant:
                continue
            others = sum(
                1
                for i, o in enumerate(blocks)
                if i != index and o.is_entangling and q in o.qubits()
            )
            if others == 0:
                return True
        return False
    if b.is_trainable and b.qubit in relevant:
        others = sum(
            1
            for i, o in enumerate(blocks)
            if i != index and o.is_trainable and o.qubit == b.qubit
        )
        return others == 0
    return False


def _penalty(blocks, config: SearchConfig) -> float:
    if config.depth_penalty == 0.0 and config.cnot_penalty == 0.0:
        return 0.0
    cnots = sum(1 for b in blocks if b.is_entangling)
    return config.depth_penalty * block_depth(blocks) + config.cnot_penalty * cnots


def _fixed_cost(circuit: Circuit, theta, problem: Problem, config: SearchConfig) -> float:
    c, _ = make_shift_evaluator(circuit, problem.features, problem.targets)(theta)
    return c + _penalty(circuit.blocks, config)


def reduce(
    circuit: Circuit, theta, problem: Problem, config: SearchConfig
) -> tuple[Circuit, np.ndarray]:
    """Greedy removal scan, later gates first, at fixed parameters.

    A gate goes when the relative cost increase stays below the removal
    threshold and no protection rule (if enabled) claims it.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    blocks = list(circuit.blocks)
    current = _fixed_cost(circuit, theta, problem, config)
    i = len(blocks) - 1
    while i >= 0:
        if config.protect and _protected(blocks, i, circuit.measured):
            i -= 1
            continue
        trial_blocks = blocks[:i] + blocks[i + 1 :]
        tb, ttheta, tq = renumber_slots(trial_blocks, theta)
        trial = Circuit(
            circuit.num_qubits, circuit.num_features, tq, tuple(tb), circuit.measured
        )
        c_try = _fixed_cost(trial, ttheta, problem, config)
        if (c_try - current) / max(current, 1e-15) < config.removal_threshold:
            # adopt the renumbered list so theta indices stay aligned;
            # renumbering keeps order, so the scan index stays valid
            blocks = list(tb)
            circuit = trial
            theta = ttheta if ttheta is not None else np.zeros(0)
            current = c_try
        i -= 1
    return circuit, theta


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    accepted: bool
    cost: float


@dataclass
class SearchResult:
    circuit: Circuit
    theta: np.ndarray
    cost: float
    trace: tuple = field(repr=False)

    @property
    def accepted_mutations(self) -> int:
        return sum(1 for e in self.trace if e.iteration > 0 and e.accepted)


def _train(circuit, theta, problem, config: SearchConfig):
    res = optimize(circuit, theta, problem.features, problem.targets, config.optimizer)
    return res.cost + _penalty(circuit.blocks, config), res.theta


def structure_learn(
    circuit0: Circuit,
    problem: Problem,
    pool: BlockPool,
    config: SearchConfig = SearchConfig(),
    theta0=None,
    rng=None,
) -> SearchResult:
    """Mutate/train/accept/reduce loop; returns the best state seen.

    Trace entry 0 holds the optimized starting cost; entries 1..n record
    each iteration's outcome.  Parameters warm-start from the carried vector
    at every re-training.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    theta = (
        np.zeros(circuit0.num_params)
        if theta0 is None
        else np.atleast_1d(np.asarray(theta0, dtype=np.float64)).copy()
    )
    circuit = circuit0
    cost, theta = _train(circuit, theta, problem, config)
    best = (circuit, theta, cost)
    trace = [TraceEntry(0, True, cost)]
    for i in range(1, config.n_iterations + 1):
        mut_circ, mut_theta = sample_mutation(circuit, theta, pool, rng)
        cand_cost, cand_theta = _train(mut_circ, mut_theta, problem, config)
        z = rng.random()
        accepted = z <= accept_probability(cost, cand_cost, config.beta)
        if accepted:
            red_circ, red_theta = reduce(mut_circ, cand_theta, problem, config)
            cost, theta = _train(red_circ, red_theta, problem, config)
            circuit = red_circ
            if cost < best[2]:
                best = (circuit, theta, cost)
        trace.append(TraceEntry(i, accepted, cost))
    if cost < best[2]:
        best = (circuit, theta, cost)
    return SearchResult(best[0], best[1], best[2], tuple(trace))


@dataclass(frozen=True)
class LineageEntry:
    generation: int
    member: int
    cost: float
    parent: int
    accepted_mutations: int


@dataclass
class GeneticResult:
    circuit: Circuit
    theta: np.ndarray
    cost: float
    lineage: tuple = field(repr=False)


def _member_rng(seed, generation: int, member: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(generation, member)))


def genetic_learn(
    circuits0,
    problem: Problem,
    pool: BlockPool,
    gconfig: GeneticConfig = GeneticConfig(),
) -> GeneticResult:
    """Population search: mutate all members, then resample by 1/cost^2.

    Output is the best member of the final generation.  Member evaluations
    run on a thread pool when CPQC_THREADS asks for more than one worker;
    per-member seeding keeps the outcome identical either way.
    """
    circuits0 = list(circuits0)
    if not circuits0:
        raise ValueError("empty initial population")
    n_p = gconfig.population_size
    if len(circuits0) == 1:
        circuits0 = circuits0 * n_p
    if len(circuits0) != n_p:
        raise ValueError(f"expected 1 or {n_p} initial circuits")
    members = [(c, np.zeros(c.num_params)) for c in circuits0]
    parents = list(range(n_p))
    lineage = []
    results = None
    for gen in range(1, gconfig.n_generations + 1):
        def run_member(j):
            circ, th = members[j]
            return structure_learn(
                circ, problem, pool, gconfig.search, theta0=th,
                rng=_member_rng(gconfig.seed, gen, j),
            )

        workers = thread_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool_exec:
                results = list(pool_exec.map(run_member, range(n_p)))
        else:
            results = [run_member(j) for j in range(n_p)]
        for j, r in enumerate(results):
            lineage.append(
                LineageEntry(gen, j, r.cost, parents[j], r.accepted_mutations)
            )
        weights = selection_weights([r.cost for r in results])
        sel_rng = np.random.default_rng(
            np.random.SeedSequence(gconfig.seed, spawn_key=(gen, n_p))
        )
        parents = [int(q) for q in sel_rng.choice(n_p, size=n_p, p=weights)]
        members = [(results[p].circuit, results[p].theta.copy()) for p in parents]
    final = [results[p] for p in parents]
    best = min(range(n_p), key=lambda j: final[j].cost)
    winner = final[best]
    return GeneticResult(winner.circuit, winner.theta.copy(), winner.cost, tuple(lineage))


def lineage_csv(result: GeneticResult) -> str:
    lines = ["generation,member,cost,parent,accepted_mutations"]
    for e in result.lineage:
        lines.append(
            f"{e.generation},{e.member},{e.cost!r},{e.parent},{e.accepted_mutations}"
        )
    return "\n".join(lines) + "\n"


def initial_circuit(num_qubits: int, num_features: int, measured=(0,)) -> Circuit:
    """Minimal search seed: one RY encoding per feature, round-robin qubits."""
    blocks = tuple(
        Block.enc("y", k % num_qubits, k) for k in range(num_features)
    )
    return Circuit(num_qubits, num_features, 0, blocks, measured)


def layered_circuit(
    num_qubits: int, num_features: int, layers: int = 3, measured=(0,)
) -> Circuit:
    """Data-reuploading search seed.

    Each layer is a trainable RY wall, one encoding per feature (walking
    across the qubits so repeated uploads land on different wires), and a
    CNOT chain; a final RY wall closes the circuit.  Re-encoding a feature
    ``layers`` times raises the reachable Fourier degree, which the
    minimal seed leaves at one.
    """
    if layers < 1:
        raise ValueError("need at least one layer")
    blocks = []
    slot = 0
    for layer in range(layers):
        for q in range(num_qubits):
            blocks.append(Block.rot("y", q, slot))
            slot += 1
        for f in range(num_features):
            blocks.append(Block.enc("y", (f + layer) % num_qubits, f))
        for q in range(num_qubits - 1):
            blocks.append(Block.cnot(q, q + 1))
    for q in range(num_qubits):
        blocks.append(Block.rot("y", q, slot))
        slot += 1
    return Circuit(num_qubits, num_features, slot, tuple(blocks), measured)
