"""Monte Carlo size/power experiments for the conditional tests.

The study design draws each agent's (sender effect, receiver effect, group)
independently and uniformly from eight support points
{-1.1, 1.1} x {-1.1, 1.1} x {0, 1}, with group mixing penalties
lambda = [[0, -2.2], [-2.2, 0]].  That calibration produces networks with
marked degree heterogeneity and homophily: expected density about 0.34 at any
n, and a cross-node in-degree standard deviation around 4.1 at n = 24 (about
8.0 at n = 48, since the type-driven spread of expected degrees grows with n).

A replication simulates an observed network at a given interaction strength
gamma (the null simulator when gamma = 0, otherwise the least-equilibrium
simulator), fits the null MLE, draws one batch of reference networks, and
evaluates every requested statistic on the same draws.  Replications whose
MLE separates (or whose sampler freezes) are recorded as failures and
excluded from the rejection rates, with counts reported.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._rng import seed_sequence, substream_generator
from .graphs import AdjacencyMatrix, GroupAssignment
from .model import (
    NuisanceParams,
    SeparationError,
    logistic_cdf,
    mle_null,
    simulate_alternative,
    simulate_null,
    strategic_spec,
)
from .sampler import FrozenChainError
from .testing import _reference_values

__all__ = [
    "CalibrationRow",
    "ExperimentConfig",
    "PowerRow",
    "PowerTable",
    "run_experiment",
    "study_population",
    "table1_calibration",
    "STUDY_MIXING",
]

#: Group-pair utility penalties of the study design (diagonal 0, off -2.2).
STUDY_MIXING = np.array([[0.0, -2.2], [-2.2, 0.0]])

_EFFECT_LEVELS = (-1.1, 1.1)

# Substream namespaces (sibling keys under the experiment's root seed).
_NS_POPULATION = 10
_NS_SHOCKS = 11
_NS_CHAIN = 12


def study_population(
    n: int, rng: np.random.Generator
) -> tuple[NuisanceParams, GroupAssignment]:
    """Draw agent types for one replication of the study design.

    Each agent independently gets one of the eight equally likely
    (sender, receiver, group) support points.  Redraws in the zero-probability
    limit where one group comes out empty, so the returned assignment always
    has two non-empty groups.
    """
    while True:
        idx = rng.integers(0, 8, size=n)
        groups = idx & 1
        if 0 < groups.sum() < n:
            break
    sender = np.array([_EFFECT_LEVELS[(k >> 2) & 1] for k in idx])
    receiver = np.array([_EFFECT_LEVELS[(k >> 1) & 1] for k in idx])
    delta = NuisanceParams(sender, receiver, STUDY_MIXING)
    return delta, GroupAssignment(tuple(int(x) for x in groups), 2)


@dataclass(frozen=True)
class CalibrationRow:
    """One cell of the study design's link-probability calibration."""

    sender_level: float
    receiver_level: float
    same_group: bool
    utility: float
    link_prob: float


def table1_calibration() -> list[CalibrationRow]:
    """The six distinct link probabilities implied by the study parameters.

    Rows pair high/low sender and receiver effects within and across groups;
    the (low, high) combination is omitted as it duplicates (high, low).
    """
    rows = []
    for same in (True, False):
        for a, b in ((1.1, 1.1), (1.1, -1.1), (-1.1, -1.1)):
            mu = a + b + (0.0 if same else -2.2)
            rows.append(CalibrationRow(a, b, same, mu, float(logistic_cdf(mu))))
    return rows


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale defaults; raise n_reps/n_draws for study-scale runs.

    ``mixing_r`` is the average number of times each arc should be modified
    between reference draws (the power-study protocol uses 1; data analyses
    use 10).  ``statistics`` may contain "locally_best_fitted"
    (nuisance parameters re-estimated per replication),
    "locally_best_true" (the infeasible variant using the generating
    parameters), "transitivity_index", and "reciprocity_index".
    """

    n_nodes: int = 24
    n_reps: int = 200
    n_draws: int = 200
    alpha: float = 0.05
    gammas: tuple[float, ...] = (0.0, 0.13, 0.26)
    strategic: str = "transitivity"
    statistics: tuple[str, ...] = (
        "locally_best_fitted",
        "locally_best_true",
        "transitivity_index",
    )
    reference: str = "degree_and_crosslink"
    mixing_r: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ValueError("experiments need at least 3 nodes")
        if self.n_reps < 1 or self.n_draws < 1:
            raise ValueError("n_reps and n_draws must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if any(gamma < 0 for gamma in self.gammas):
            raise ValueError("gammas must be non-negative")
        known = {
            "locally_best_fitted",
            "locally_best_true",
            "transitivity_index",
            "reciprocity_index",
        }
        unknown = set(self.statistics) - known
        if unknown:
            raise ValueError(f"unknown statistics: {sorted(unknown)}")


@dataclass(frozen=True)
class PowerRow:
    gamma: float
    statistic: str
    n_used: int
    n_failures: int
    rejections: int
    reject_rate: float
    std_error: float


@dataclass
class PowerTable:
    """Rejection rates by (gamma, statistic), with failure accounting."""

    alpha: float
    n_reps: int
    n_draws: int
    rows: list[PowerRow] = field(default_factory=list)

    def rate(self, gamma: float, statistic: str) -> PowerRow:
        for row in self.rows:
            if row.gamma == gamma and row.statistic == statistic:
                return row
        raise KeyError((gamma, statistic))


def _delta_desc(kind: str, strategic: str, delta: NuisanceParams) -> dict:
    return {
        "kind": "locally_best",
        "strategic": strategic,
        "sender": np.asarray(delta.sender, dtype=float),
        "receiver": np.asarray(delta.receiver, dtype=float),
        "mixing": np.asarray(delta.mixing, dtype=float),
    }


def _replication(task):
    """One (gamma, replication) cell; returns per-statistic rejections.

    Returns (gamma_index, rep, outcome) where outcome is None for a failed
    replication, else a dict statistic -> bool (rejected at level alpha).
    """
    cfg, seed, gamma_index, rep = task
    gamma = cfg.gammas[gamma_index]
    rng_pop = substream_generator(seed, _NS_POPULATION, gamma_index, rep)
    delta_true, g = study_population(cfg.n_nodes, rng_pop)
    rng_shocks = substream_generator(seed, _NS_SHOCKS, gamma_index, rep)
    spec = strategic_spec(cfg.strategic, cfg.n_nodes)
    if gamma == 0.0:
        observed = simulate_null(delta_true, g, rng_shocks)
    else:
        observed = simulate_alternative(delta_true, gamma, spec, g, rng_shocks)

    descs = []
    try:
        for name in cfg.statistics:
            if name == "locally_best_fitted":
                delta_hat = mle_null(observed, g)
                descs.append(_delta_desc(name, cfg.strategic, delta_hat))
            elif name == "locally_best_true":
                descs.append(_delta_desc(name, cfg.strategic, delta_true))
            elif name == "transitivity_index":
                descs.append({"kind": "transitivity_index"})
            else:
                descs.append({"kind": "reciprocity_index"})
    except SeparationError:
        return gamma_index, rep, None

    chain_seed = int.from_bytes(
        seed_sequence(seed, _NS_CHAIN, gamma_index, rep).generate_state(4).tobytes(),
        "little",
    )
    try:
        values, _tau, _q, _stats = _reference_values(
            observed,
            g,
            descs,
            cfg.reference,
            cfg.n_draws,
            None,
            chain_seed,
            jobs=1,
            mixing_r=cfg.mixing_r,
            q=cfg.q,
        )
    except FrozenChainError:
        return gamma_index, rep, None

    from .testing import _build_evaluators  # local import keeps pickling light

    evaluators = _build_evaluators(descs, g)
    outcome = {}
    arr = np.asarray(values, dtype=float)
    for s, name in enumerate(cfg.statistics):
        observed_value = evaluators[s](observed)
        col = arr[:, s]
        defined = col[~np.isnan(col)]
        if math.isnan(observed_value) or defined.size == 0:
            outcome[name] = False
            continue
        p = (1 + int((defined >= observed_value).sum())) / (defined.size + 1)
        outcome[name] = p <= cfg.alpha
    return gamma_index, rep, outcome


def run_experiment(cfg: ExperimentConfig, seed: int, jobs: int = 1) -> PowerTable:
    """Run the full grid of (gamma, replication) cells and tabulate power.

    Every cell derives its own substreams from (seed, namespace, gamma index,
    replication index), so the table is reproducible and independent of
    ``jobs``.
    """
    tasks = [
        (cfg, seed, gamma_index, rep)
        for gamma_index in range(len(cfg.gammas))
        for rep in range(cfg.n_reps)
    ]
    if jobs <= 1:
        outcomes = [_replication(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_replication, tasks, chunksize=8))

    table = PowerTable(alpha=cfg.alpha, n_reps=cfg.n_reps, n_draws=cfg.n_draws)
    for gamma_index, gamma in enumerate(cfg.gammas):
        cell = [o for gi, _, o in outcomes if gi == gamma_index]
        failures = sum(1 for o in cell if o is None)
        used = len(cell) - failures
        for name in cfg.statistics:
            rejections = sum(1 for o in cell if o is not None and o[name])
            rate = rejections / used if used else float("nan")
            se = math.sqrt(rate * (1 - rate) / used) if used else float("nan")
            table.rows.append(
                PowerRow(gamma, name, used, failures, rejections, rate, se)
            )
    return table
