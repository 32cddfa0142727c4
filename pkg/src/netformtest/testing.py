"""Conditional tests for strategic interaction in network formation.

Conditioning on every node's out-degree, in-degree, and the cross-group arc
counts makes all networks in the induced reference set equally likely under
the dyad-independent null, whatever the nuisance parameters.  The tests here
compare an observed statistic against its distribution over that reference
set — enumerated exactly for tiny networks, sampled by the switching chain
otherwise — with the add-one Monte Carlo p-value
p = (1 + #{draws >= observed}) / (#draws + 1).

The locally best statistic against interaction strength gamma > 0 is
sum over i != j of (d_ij - F(mu_ij)) * s_ij(d).  ``theorem2_derivative``
computes the same quantity along the longer route — the derivative of the
equilibrium likelihood at gamma = 0, split into the boundary-bucket and
single-interior-bucket shock configurations with explicit range bounds — and
exists so the two derivations can be checked against each other numerically.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._rng import substream_random
from .graphs import (
    AdjacencyMatrix,
    GroupAssignment,
    cross_link_matrix,
    degree_sequence,
    reciprocity_index,
    transitivity_index,
)
from .model import (
    NuisanceParams,
    StrategicSpec,
    logistic_cdf,
    mle_null,
    strategic_spec,
    systematic_utility,
)
from .sampler import (
    ChainConfig,
    ChainStats,
    enumerate_reference_set,
    markov_draw,
    mixing_time_heuristic,
)

__all__ = [
    "CriticalValues",
    "TestResult",
    "TestStatisticSpec",
    "conditional_p_value",
    "exact_conditional_critical_values",
    "exact_reciprocity_likelihood",
    "locally_best_statistic",
    "theorem2_derivative",
]

REFERENCES = ("density_only", "degree_only", "degree_and_crosslink", "enumerated")

TI_NOTE = "closed two-path ratio over directed two-paths (i,k,j distinct)"

# Substream namespaces under the root seed.
_NS_DRAW = 0
_NS_PILOT = 1


def locally_best_statistic(
    d: AdjacencyMatrix,
    delta: NuisanceParams,
    spec: StrategicSpec,
    g: GroupAssignment,
) -> float:
    """Score-type statistic: sum over i != j of (d_ij - F(mu_ij)) s_ij(d).

    Large values indicate more arcs than the null predicts exactly where the
    interaction term s makes arcs more attractive.
    """
    mu = systematic_utility(delta, g)
    off = ~np.eye(d.n, dtype=bool)
    P = logistic_cdf(np.where(off, mu, 0.0))
    dense = d.to_array()
    S = spec.matrix_fn(dense)
    return float(((dense - P) * S)[off].sum())


def theorem2_derivative(
    d: AdjacencyMatrix,
    delta: NuisanceParams,
    spec: StrategicSpec,
    g: GroupAssignment,
) -> float:
    """Likelihood derivative in gamma at zero, by the two-case decomposition.

    Write F = F(mu_ij), f = F(1-F) for the logistic CDF/density and let
    [s_lo, s_hi] bound the interaction term's range.  Shock configurations
    with two or more interior buckets contribute at order gamma^2 and drop
    out.  The all-boundary configurations contribute

        sum_{i != j}  d_ij s_lo f/F  -  (1 - d_ij) s_hi f/(1-F)

    and the single-interior-bucket configurations contribute

        sum_{i != j}  d_ij (s_ij - s_lo) f/F  +  (1 - d_ij) (s_hi - s_ij) f/(1-F).

    The range bounds cancel only in the total, which equals the one-line
    form of :func:`locally_best_statistic`; keeping both routes separate is
    deliberate so they can be cross-checked.
    """
    mu = systematic_utility(delta, g)
    off = ~np.eye(d.n, dtype=bool)
    F = logistic_cdf(np.where(off, mu, 0.0))
    f = F * (1.0 - F)
    dense = d.to_array().astype(float)
    S = spec.matrix_fn(dense).astype(float)
    s_lo = float(spec.s_min)
    s_hi = float(spec.s_max)
    ratio_present = f / F
    ratio_absent = f / (1.0 - F)
    boundary = dense * s_lo * ratio_present - (1.0 - dense) * s_hi * ratio_absent
    one_interior = dense * (S - s_lo) * ratio_present + (1.0 - dense) * (
        s_hi - S
    ) * ratio_absent
    return float(boundary[off].sum() + one_interior[off].sum())


def exact_reciprocity_likelihood(
    d: AdjacencyMatrix,
    g: GroupAssignment,
    delta: NuisanceParams,
    gamma: float,
    selection: str = "uniform_over_NE",
) -> float:
    """Exact network probability under reciprocity interaction, gamma >= 0.

    With s_ij = d_ji the network factorizes over unordered dyads.  Each
    shock u_ij falls into one of three buckets: below mu_ij (i links
    regardless), in (mu_ij, mu_ij + gamma] (i links iff j does), or above
    (never links).  When both shocks of a dyad land in the middle bucket the
    empty and the mutual dyad are both equilibria; the ``uniform_over_NE``
    selection rule picks each with probability 1/2.

    gamma < 0 flips the middle bucket into an anti-coordination region and is
    not supported here.
    """
    if gamma < 0:
        raise ValueError(
            "gamma < 0 makes reciprocity anti-coordinating; "
            "this likelihood only covers gamma >= 0"
        )
    if selection != "uniform_over_NE":
        raise ValueError(f"unknown selection rule {selection!r}")
    mu = systematic_utility(delta, g)
    F0 = logistic_cdf(np.where(np.isnan(mu), 0.0, mu))
    Fg = logistic_cdf(np.where(np.isnan(mu), 0.0, mu + gamma))
    prob = 1.0
    n = d.n
    for i in range(n):
        for j in range(i + 1, n):
            p1, pm, p0 = F0[i, j], Fg[i, j] - F0[i, j], 1.0 - Fg[i, j]
            q1, qm, q0 = F0[j, i], Fg[j, i] - F0[j, i], 1.0 - Fg[j, i]
            dij = d.has_arc(i, j)
            dji = d.has_arc(j, i)
            if dij and dji:
                prob *= p1 * q1 + p1 * qm + pm * q1 + 0.5 * pm * qm
            elif dij:
                prob *= p1 * q0
            elif dji:
                prob *= p0 * q1
            else:
                prob *= pm * q0 + p0 * qm + p0 * q0 + 0.5 * pm * qm
    return float(prob)


# -- test statistics as picklable descriptions --------------------------------


@dataclass(frozen=True)
class TestStatisticSpec:
    """Which statistic to compute on observed and reference networks.

    kind: "locally_best", "reciprocity_index", or "transitivity_index".
    ``strategic`` names the interaction term for "locally_best"
    ("reciprocity", "transitivity", "customer_product").  ``delta_source``
    says where its nuisance parameters come from: "fitted" fits the null MLE
    on the observed network once (reference draws reuse it), "provided"
    uses ``delta``.
    """

    kind: str
    strategic: Optional[str] = None
    delta_source: str = "fitted"
    delta: Optional[NuisanceParams] = None

    def __post_init__(self):
        if self.kind not in ("locally_best", "reciprocity_index", "transitivity_index"):
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if self.kind == "locally_best":
            if self.strategic is None:
                raise ValueError("locally_best needs a strategic term name")
            if self.delta_source not in ("fitted", "provided"):
                raise ValueError("delta_source must be 'fitted' or 'provided'")
            if self.delta_source == "provided" and self.delta is None:
                raise ValueError("delta_source='provided' requires delta")


def _describe(stat: TestStatisticSpec, observed: AdjacencyMatrix, g: GroupAssignment):
    """Resolve a statistic to a picklable descriptor (fits the MLE if asked)."""
    if stat.kind != "locally_best":
        return {"kind": stat.kind}
    delta = stat.delta if stat.delta_source == "provided" else mle_null(observed, g)
    return {
        "kind": "locally_best",
        "strategic": stat.strategic,
        "sender": np.asarray(delta.sender, dtype=float),
        "receiver": np.asarray(delta.receiver, dtype=float),
        "mixing": np.asarray(delta.mixing, dtype=float),
    }


def _build_evaluators(descs, g: GroupAssignment):
    n = g.n_nodes
    off = ~np.eye(n, dtype=bool)
    evaluators = []
    for desc in descs:
        kind = desc["kind"]
        if kind == "locally_best":
            delta = NuisanceParams(desc["sender"], desc["receiver"], desc["mixing"])
            mu = systematic_utility(delta, g)
            P = logistic_cdf(np.where(off, mu, 0.0))
            spec = strategic_spec(desc["strategic"], n)

            def ev(d, P=P, spec=spec):
                dense = d.to_array()
                S = spec.matrix_fn(dense)
                return float(((dense - P) * S)[off].sum())

        elif kind == "reciprocity_index":
            ev = reciprocity_index
        else:
            ev = transitivity_index
        evaluators.append(ev)
    return evaluators


def statistic_note(kind: str) -> Optional[str]:
    """Formula disambiguation attached to the output for ambiguous names."""
    if kind == "transitivity_index":
        return TI_NOTE
    return None


# -- reference draws -----------------------------------------------------------


def _density_only_draw(n: int, n_arcs: int, rng) -> AdjacencyMatrix:
    positions = rng.sample(range(n * (n - 1)), n_arcs)
    d = AdjacencyMatrix(n)
    for pos in positions:
        i, rem = divmod(pos, n - 1)
        j = rem if rem < i else rem + 1
        d.add_arc(i, j)
    return d


def _draw_chunk(task):
    """Evaluate statistics on reference draws b_start..b_stop-1 (worker)."""
    (rows, n, codes, K, reference, tau, q, seed, b_start, b_stop, descs) = task
    observed = AdjacencyMatrix(n, list(rows))
    g = GroupAssignment(tuple(codes), K)
    evaluators = _build_evaluators(descs, g)
    values = []
    stats = ChainStats()
    if reference == "density_only":
        n_arcs = observed.arc_count()
        for b in range(b_start, b_stop):
            rng = substream_random(seed, _NS_DRAW, b)
            draw = _density_only_draw(n, n_arcs, rng)
            values.append([ev(draw) for ev in evaluators])
    else:
        chain_g = GroupAssignment.single_group(n) if reference == "degree_only" else g
        cfg = ChainConfig(tau=tau, q=q)
        for b in range(b_start, b_stop):
            rng = substream_random(seed, _NS_DRAW, b)
            draw = markov_draw(observed, chain_g, cfg, rng, stats)
            values.append([ev(draw) for ev in evaluators])
    return values, (stats.steps, stats.lazy, stats.accepted, stats.abandoned, stats.flips)


def _reference_values(
    observed: AdjacencyMatrix,
    g: GroupAssignment,
    descs,
    reference: str,
    n_draws: int,
    cfg: Optional[ChainConfig],
    seed: Optional[int],
    jobs: int = 1,
    mixing_r: float = 10.0,
    q: float = 0.5,
):
    """Statistic values over reference draws, plus (tau, q, ChainStats|None).

    For "enumerated" the draws are the full reference set minus the observed
    network and ``n_draws``/``cfg``/``seed`` are ignored.  ``mixing_r`` and
    ``q`` configure the automatic walk-length pilot used when ``cfg`` is
    None.
    """
    if reference not in REFERENCES:
        raise ValueError(f"unknown reference {reference!r}; choose from {REFERENCES}")
    if reference == "enumerated":
        members = enumerate_reference_set(
            degree_sequence(observed), cross_link_matrix(observed, g), g
        )
        obs_key = observed.key()
        others = [d for d in members if d.key() != obs_key]
        if len(others) == len(members):
            raise ValueError("observed network missing from its own reference set")
        evaluators = _build_evaluators(descs, g)
        values = [[ev(d) for ev in evaluators] for d in others]
        return values, None, None, None

    if seed is None:
        raise ValueError(f"reference {reference!r} needs a seed")
    if n_draws < 1:
        raise ValueError("need at least one reference draw")
    if reference == "density_only":
        tau = q_used = None
    elif cfg is None:
        pilot_rng = substream_random(seed, _NS_PILOT)
        chain_g = (
            GroupAssignment.single_group(observed.n)
            if reference == "degree_only"
            else g
        )
        tau = mixing_time_heuristic(observed, chain_g, r=mixing_r, q=q, rng=pilot_rng)
        q_used = q
    else:
        tau, q_used = cfg.tau, cfg.q
    task_common = (
        tuple(observed.rows),
        observed.n,
        tuple(g.codes),
        g.n_groups,
        reference,
        tau,
        q_used,
        seed,
    )
    if jobs <= 1:
        chunks = [(0, n_draws)]
    else:
        per = math.ceil(n_draws / jobs)
        chunks = [(lo, min(lo + per, n_draws)) for lo in range(0, n_draws, per)]
    results = []
    if len(chunks) == 1:
        results.append(_draw_chunk(task_common + chunks[0] + (descs,)))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_draw_chunk, task_common + chunk + (descs,))
                for chunk in chunks
            ]
            results = [f.result() for f in futures]
    values = []
    stats = ChainStats()
    for vals, tallies in results:
        values.extend(vals)
        stats.steps += tallies[0]
        stats.lazy += tallies[1]
        stats.accepted += tallies[2]
        stats.abandoned += tallies[3]
        stats.flips += tallies[4]
    chain_stats = stats if reference != "density_only" else None
    return values, tau, q_used, chain_stats


# -- conditional p-values -------------------------------------------------------


@dataclass(eq=False)
class TestResult:
    """Outcome of one conditional test.

    ``null_draws`` holds the defined statistic values on the reference draws
    (undefined ones are dropped and counted in
    ``diagnostics['missing_draws']``), and the add-one p-value always equals
    (1 + #{null_draws >= observed}) / (len(null_draws) + 1).
    """

    statistic: str
    observed: float
    p_value: float
    quantile: float
    reference: str
    n_draws: int
    tau: Optional[int]
    q: Optional[float]
    seed: Optional[int]
    null_draws: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _result_from_values(
    kind, observed_value, raw_values, reference, tau, q, seed, chain_stats, arc_count
) -> TestResult:
    values = np.asarray(raw_values, dtype=float)
    defined = values[~np.isnan(values)]
    missing = int(values.size - defined.size)
    if missing:
        warnings.warn(
            f"{missing} reference draw(s) had an undefined {kind}; "
            "they are excluded from the null distribution",
            stacklevel=3,
        )
    diagnostics = {"missing_draws": missing}
    if chain_stats is not None:
        diagnostics["acceptance_rate"] = chain_stats.acceptance_rate
        n_chain_draws = max(1, values.size)
        diagnostics["per_arc_modifications"] = (
            chain_stats.per_arc_modifications(arc_count) / n_chain_draws
            if arc_count
            else float("nan")
        )
    else:
        diagnostics["acceptance_rate"] = None
        diagnostics["per_arc_modifications"] = None
    note = statistic_note(kind)
    if note:
        diagnostics["statistic_note"] = note
    if math.isnan(observed_value):
        warnings.warn(
            f"the observed {kind} is undefined; p-value is undefined too",
            stacklevel=3,
        )
        p = quant = float("nan")
    else:
        p = (1 + int((defined >= observed_value).sum())) / (defined.size + 1)
        quant = (
            float((defined <= observed_value).mean()) if defined.size else float("nan")
        )
    return TestResult(
        statistic=kind,
        observed=float(observed_value),
        p_value=p,
        quantile=quant,
        reference=reference,
        n_draws=int(defined.size),
        tau=tau,
        q=q,
        seed=seed,
        null_draws=defined,
        diagnostics=diagnostics,
    )


def conditional_p_value(
    d: AdjacencyMatrix,
    g: GroupAssignment,
    stat: TestStatisticSpec,
    reference: str = "degree_and_crosslink",
    n_draws: int = 200,
    cfg: Optional[ChainConfig] = None,
    seed: Optional[int] = None,
    jobs: int = 1,
    mixing_r: float = 10.0,
) -> TestResult:
    """Monte Carlo conditional test of the no-interaction null.

    ``reference`` picks the conditioning: "density_only" redraws the arcs
    uniformly at fixed arc count, "degree_only" fixes both degree sequences,
    "degree_and_crosslink" additionally fixes the cross-group arc counts, and
    "enumerated" replaces sampling with the full reference set (minus the
    observed network), making the add-one p-value the exact conditional tail
    probability.  When ``cfg`` is None the walk length comes from
    :func:`mixing_time_heuristic` on a pilot run tuned to modify each arc
    ``mixing_r`` times per draw.  Draw b uses the substream
    (seed, draw-namespace, b), so results are independent of ``jobs``.
    """
    descs = [_describe(stat, d, g)]
    values, tau, q, chain_stats = _reference_values(
        d, g, descs, reference, n_draws, cfg, seed, jobs, mixing_r=mixing_r
    )
    evaluators = _build_evaluators(descs, g)
    observed_value = evaluators[0](d)
    return _result_from_values(
        stat.kind,
        observed_value,
        [v[0] for v in values],
        reference,
        tau,
        q,
        seed,
        chain_stats,
        d.arc_count(),
    )


# -- exact randomized critical values ------------------------------------------


@dataclass(frozen=True)
class CriticalValues:
    """Randomized rejection rule: reject above ``cutoff``, with probability
    ``randomization`` at it, never below.  Built so the conditional rejection
    probability over the enumerated reference set is exactly alpha."""

    cutoff: float
    randomization: float

    def rejection_prob(self, value: float) -> float:
        if value > self.cutoff:
            return 1.0
        if value == self.cutoff:
            return self.randomization
        return 0.0


def exact_conditional_critical_values(
    d: AdjacencyMatrix,
    g: GroupAssignment,
    stat: TestStatisticSpec,
    alpha: float,
) -> CriticalValues:
    """Cutoff and boundary randomization achieving exact conditional size alpha.

    The statistic is evaluated on the full enumerated reference set (uniform
    under the null).  The cutoff is the smallest support value whose strict
    upper tail has probability <= alpha; the boundary randomization then tops
    the rejection probability up to exactly alpha.  alpha = 1 short-circuits
    to (-inf, 0): reject always.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return CriticalValues(float("-inf"), 0.0)
    members = enumerate_reference_set(
        degree_sequence(d), cross_link_matrix(d, g), g
    )
    descs = [_describe(stat, d, g)]
    ev = _build_evaluators(descs, g)[0]
    values = np.array([ev(member) for member in members], dtype=float)
    if np.isnan(values).any():
        raise ValueError(
            "statistic is undefined on part of the reference set; "
            "an exact randomized test cannot be built from it"
        )
    total = values.size
    support = np.unique(values)[::-1]  # descending
    tail = 0  # count strictly above the current candidate
    for v in support:
        count_v = int((values == v).sum())
        if tail + count_v > alpha * total:
            # strict tail above v is fine, adding the atom at v overshoots
            randomization = (alpha - tail / total) / (count_v / total)
            return CriticalValues(float(v), float(randomization))
        tail += count_v
    # alpha >= 1 handled above; reaching here means alpha * total >= total
    return CriticalValues(float(support[-1]), 1.0)
