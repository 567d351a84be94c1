"""Seeded Monte Carlo simulation of the two Poisson deployments.

L-nodes are drawn in a square of half-width ``R + margin`` around the disk of
radius ``R`` holding the NL-nodes, so nodes near the disk border still see
anchors beyond it. Every (NL, L) pair within the cutoff distance gets one
independent link draw.

Each trial owns two generators derived from ``(master_seed, trial_index)``:
one for geometry and one for link draws. Aggregates are sums over trials, so
results do not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.stats import binomtest

from . import analytic
from .analytic import Deployment, ParameterError
from .channel import ChannelModel, cutoff_distance, link_probability
from .roots import find_root

TRUNCATION_TOL = 1e-3
CUTOFF_PROBABILITY = 1e-9
TABLE_BINS = 1 << 16


class DegenerateSampleError(RuntimeError):
    """No NL-node was generated in any trial."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``margin`` is the width (meters) of the band around the disk where L-nodes
    are generated; ``None`` picks the smallest margin whose truncated share of
    the mean anchor count is below ``TRUNCATION_TOL``.
    """

    deployment: Deployment
    channel: ChannelModel
    trials: int
    master_seed: int = 0
    margin: float | None = None
    anchor_requirement: int = analytic.ANCHORS_REQUIRED

    def __post_init__(self) -> None:
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ParameterError("master_seed must fit in 64 bits")
        if self.anchor_requirement < 0:
            raise ParameterError("anchor_requirement must be >= 0")
        needed = required_margin(self.channel)
        if self.margin is None:
            object.__setattr__(self, "margin", needed)
        elif not self.margin >= needed * (1 - 1e-12):
            raise ParameterError(
                f"margin {self.margin!r} m truncates more than {TRUNCATION_TOL:g} of the "
                f"mean anchor count; need at least {needed:.6g} m"
            )

    @property
    def half_width(self) -> float:
        return self.deployment.radius + self.margin

    @property
    def margin_factor(self) -> float:
        """Half-width of the generation square relative to ``R``."""
        return self.half_width / self.deployment.radius


def required_margin(channel: ChannelModel, tol: float = TRUNCATION_TOL) -> float:
    """Smallest ``m >= d_max`` with ``lambda_{NL,m} >= (1 - tol) lambda_NL``."""
    d_max = channel.d_max
    if channel.hard_disk:
        return d_max
    full = analytic.expected_neighbors_unbounded(channel, 1.0)

    def shortfall(log_m: float) -> float:
        return analytic.expected_neighbors_bounded(channel, 1.0, math.exp(log_m)) / full - (1 - tol)

    lo = math.log(d_max)
    if shortfall(lo) >= 0:
        return d_max
    hi = lo + 1.0
    while shortfall(hi) < 0:
        hi += 1.0
    return math.exp(find_root(shortfall, lo, hi).root)


@dataclass
class PointProcessRealization:
    l_points: np.ndarray
    nl_points: np.ndarray
    trial_index: int
    trial_seed: int


@dataclass
class MonteCarloEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    events: int
    samples: int
    master_seed: int
    diagnostics: dict = field(default_factory=dict)


def _streams(master_seed: int, trial_index: int) -> tuple[np.random.Generator, np.random.Generator, int]:
    root = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))
    geometry, links = root.spawn(2)
    trial_seed = int(root.generate_state(1, np.uint64)[0])
    return np.random.Generator(np.random.PCG64(geometry)), np.random.Generator(np.random.PCG64(links)), trial_seed


def sample_realization(config: SimConfig, trial_index: int) -> PointProcessRealization:
    rng, _, trial_seed = _streams(config.master_seed, trial_index)
    h = config.half_width
    radius = config.deployment.radius
    n_l = rng.poisson(config.deployment.rho_l * (2 * h) ** 2)
    l_points = rng.uniform(-h, h, size=(n_l, 2))
    n_nl = rng.poisson(config.deployment.n_nl)
    r = radius * np.sqrt(rng.random(n_nl))
    theta = 2 * np.pi * rng.random(n_nl)
    nl_points = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return PointProcessRealization(l_points, nl_points, int(trial_index), trial_seed)


@dataclass(frozen=True)
class _LinkTable:
    """Link probability tabulated on a uniform grid of ``d / d_max``.

    Since the probability is non-increasing, the table brackets it on each bin;
    the exact value is only computed when a uniform falls inside the bracket.
    """

    values: np.ndarray
    scale: float
    t_cut: float
    d_max: float
    inv_width: float
    hard: bool


def _link_table(channel: ChannelModel) -> _LinkTable:
    t_cut = cutoff_distance(channel, CUTOFF_PROBABILITY) / channel.d_max
    t = np.linspace(0.0, t_cut, TABLE_BINS + 1)
    values = np.asarray(link_probability(channel, t * channel.d_max), dtype=float)
    values = np.append(values, [0.0, 0.0])
    if channel.hard_disk:
        inv_width = 0.0
    else:
        inv_width = channel.alpha / channel.eta
    return _LinkTable(values, TABLE_BINS / t_cut, t_cut, channel.d_max, inv_width, channel.hard_disk)


@numba.njit(cache=True)
def _count_kernel(nl, lx, ly, table, scale, t_cut, d_max, inv_width, hard, rng):
    n = nl.shape[0]
    m = lx.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    cut = t_cut * d_max
    cut2 = cut * cut
    nbins = table.shape[0] - 3
    for i in range(n):
        x0 = nl[i, 0]
        y0 = nl[i, 1]
        j0 = np.searchsorted(lx, x0 - cut, side="left")
        j1 = np.searchsorted(lx, x0 + cut, side="right")
        c = 0
        for j in range(j0, j1):
            dx = lx[j] - x0
            dy = ly[j] - y0
            d2 = dx * dx + dy * dy
            if d2 > cut2:
                continue
            u = rng.random()
            t = math.sqrt(d2) / d_max
            k = min(int(t * scale), nbins)
            # neighbouring bins make the bounds robust to rounding at bin edges
            if u < table[k + 2]:
                c += 1
            elif u < table[max(k - 1, 0)]:
                if hard:
                    p = 1.0 if t < 1.0 else (0.5 if t == 1.0 else 0.0)
                elif t == 0.0:
                    p = 1.0
                else:
                    p = 0.5 * math.erfc(inv_width * math.log(t))
                if u < p:
                    c += 1
        counts[i] = c
    return counts


def count_anchors(
    realization: PointProcessRealization, config: SimConfig, table: _LinkTable | None = None
) -> np.ndarray:
    """Number of linked L-nodes for each NL-node of ``realization``."""
    if table is None:
        table = _link_table(config.channel)
    _, links, _ = _streams(config.master_seed, realization.trial_index)
    l_points = realization.l_points
    order = np.argsort(l_points[:, 0], kind="stable")
    lx = np.ascontiguousarray(l_points[order, 0])
    ly = np.ascontiguousarray(l_points[order, 1])
    nl = np.ascontiguousarray(realization.nl_points, dtype=float)
    return _count_kernel(
        nl, lx, ly, table.values, table.scale, table.t_cut, table.d_max,
        table.inv_width, table.hard, links,
    )


def _trial_counts(config: SimConfig, table: _LinkTable, index: int) -> np.ndarray:
    return count_anchors(sample_realization(config, index), config, table)


def _chunk(args) -> list[np.ndarray]:
    config, table, indices = args
    return [_trial_counts(config, table, i) for i in indices]


def run_trials(config: SimConfig, workers: int = 1) -> list[np.ndarray]:
    """Per-trial anchor counts, in trial order."""
    table = _link_table(config.channel)
    indices = list(range(config.trials))
    if workers <= 1:
        return [_trial_counts(config, table, i) for i in indices]
    chunks = [indices[w::workers] for w in range(workers)]
    out: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * config.trials
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for idx, result in zip(chunks, pool.map(_chunk, [(config, table, c) for c in chunks])):
            for i, counts in zip(idx, result):
                out[i] = counts
    return out


def _wilson(events: int, n: int) -> tuple[float, float]:
    ci = binomtest(events, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def estimate_node_localization(config: SimConfig, workers: int = 1) -> MonteCarloEstimate:
    """Fraction of NL-nodes, pooled over all trials, with enough anchors."""
    per_trial = run_trials(config, workers)
    k = config.anchor_requirement
    samples = sum(len(c) for c in per_trial)
    if samples == 0:
        raise DegenerateSampleError("no NL-node was generated in any trial")
    events = sum(int(np.count_nonzero(c >= k)) for c in per_trial)
    lo, hi = _wilson(events, samples)
    pooled = np.concatenate(per_trial)
    return MonteCarloEstimate(
        events / samples, lo, hi, config.trials, events, samples, config.master_seed,
        {"mean_anchor_count": float(pooled.mean()), "anchor_count_var": float(pooled.var())},
    )


def estimate_network_localization(config: SimConfig, workers: int = 1) -> MonteCarloEstimate:
    """Fraction of trials in which every NL-node has enough anchors.

    A trial without NL-nodes counts as a success and is tallied in
    ``diagnostics["empty_trials"]``.
    """
    per_trial = run_trials(config, workers)
    k = config.anchor_requirement
    events = sum(bool(np.all(c >= k)) for c in per_trial)
    empty = sum(len(c) == 0 for c in per_trial)
    lo, hi = _wilson(events, config.trials)
    return MonteCarloEstimate(
        events / config.trials, lo, hi, config.trials, events, config.trials,
        config.master_seed,
        {"empty_trials": empty, "mean_nl_per_trial": sum(len(c) for c in per_trial) / config.trials},
    )
