"""Scenarios, multi-round runs, baselines and scheme comparison."""
from __future__ import annotations

import dataclasses
import math
import statistics
from dataclasses import dataclass
from typing import FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .airlink import GOLDEN_GAMMA, MASK64, mix64
from .errors import InvalidGainError, ValidationError
from .model import (
    GainMatrix,
    Node,
    NodeKind,
    SystemParams,
    compute_gains,
    db_to_linear,
    validate_topology,
)
from .protocol import (
    FmsMetrics,
    RoundMetrics,
    RoundOutcome,
    Scheme,
    allocate_resources,
    make_round_metrics,
    run_coordination_round,
)

__all__ = [
    "Scenario", "Scheme", "RoundMetrics", "SplitMix64", "SchemeSummary",
    "run_scenario", "iter_rounds", "baseline_orthogonal", "generate_random_scenario",
    "compare_schemes",
]


@dataclass(frozen=True)
class Scenario:
    """A complete, validated simulation input.

    ``retransmissions`` holds ``(round_index, fms_id)`` pairs: that fMS sends
    the retransmission sentinel in that round.
    """

    params: SystemParams
    nodes: Tuple[Node, ...]
    gain_override: Optional[GainMatrix] = None
    resource_count: int = 1
    rounds: int = 1
    scheme: Scheme = Scheme.THROUGHPUT_APPROX
    seed: int = 0
    retransmissions: FrozenSet[Tuple[int, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "retransmissions", frozenset(self.retransmissions))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        self.validate()

    def validate(self) -> None:
        validate_topology(self.nodes)
        if not any(n.is_fbs for n in self.nodes):
            raise ValidationError("nodes", "at least one fBS is required")
        if not any(n.is_fms for n in self.nodes):
            raise ValidationError("nodes", "at least one fMS is required")
        for name in ("resource_count", "rounds"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValidationError(name, "must be a positive integer")
        if not 0 <= self.seed <= MASK64:
            raise ValidationError("seed", "must be an unsigned 64-bit integer")
        fms_ids = {n.id for n in self.nodes if n.is_fms}
        for r, f in sorted(self.retransmissions):
            if f not in fms_ids:
                raise ValidationError("retransmit", f"{f} is not an fMS id")
            if not 0 <= r < self.rounds:
                raise ValidationError("retransmit", f"round {r} outside 0..{self.rounds - 1}")
        allocate_resources(self.nodes, self.resource_count)
        try:
            self.gains()
        except InvalidGainError as exc:
            raise ValidationError("gain_override", str(exc)) from exc

    def gains(self) -> GainMatrix:
        return compute_gains(self.nodes, self.params, self.gain_override)

    @property
    def fbs_nodes(self) -> List[Node]:
        return [n for n in self.nodes if n.is_fbs]

    @property
    def fms_nodes(self) -> List[Node]:
        return [n for n in self.nodes if n.is_fms]


def iter_rounds(scenario: Scenario, scheme: Optional[Scheme] = None) -> Iterator[RoundOutcome]:
    """Run the coordination rounds of ``scenario`` one by one."""
    scheme = Scheme(scheme or scenario.scheme)
    gains = scenario.gains()
    prev_power_map, last_target = {}, {}
    for r in range(scenario.rounds):
        retransmitting = frozenset(f for rr, f in scenario.retransmissions if rr == r)
        outcome = run_coordination_round(
            scenario, scheme, r, scenario.seed,
            prev_power_map=prev_power_map,
            last_target_sinr=last_target,
            retransmitting=retransmitting,
            gains=gains,
        )
        prev_power_map, last_target = outcome.power_map, outcome.last_target_sinr
        yield outcome


def run_scenario(scenario: Scenario, scheme: Optional[Scheme] = None) -> List[RoundMetrics]:
    scheme = Scheme(scheme or scenario.scheme)
    if scheme is Scheme.ORTHOGONAL:
        return baseline_orthogonal(scenario)
    return [outcome.metrics for outcome in iter_rounds(scenario, scheme)]


def baseline_orthogonal(scenario: Scenario) -> List[RoundMetrics]:
    """Each fBS gets a disjoint 1/K slice of spectrum at full power.

    No co-channel interference, and no spectral-density boost for the
    narrower slice.
    """
    gains = scenario.gains()
    P = scenario.params.max_power
    share = 1.0 / len(scenario.fbs_nodes)
    allocation = allocate_resources(scenario.nodes, scenario.resource_count)
    per_fms = []
    for fms in sorted(scenario.fms_nodes, key=lambda n: n.id):
        sinr = P * gains.gain(fms.serving_fbs, fms.id) / fms.noise_variance
        per_fms.append(FmsMetrics(
            fms=fms.id,
            resource=allocation[fms.id],
            power=P,
            sinr=sinr,
            throughput=share * math.log2(1.0 + sinr),
            priority=fms.priority,
            bandwidth_share=share,
        ))
    return [make_round_metrics(r, per_fms) for r in range(scenario.rounds)]


class SplitMix64:
    """Pinned 64-bit generator so random scenarios replay on any platform."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        out = mix64(self.state)
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return out

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0 ** -53)

    def choice(self, seq: Sequence):
        return seq[self.next_u64() % len(seq)]


def generate_random_scenario(
    n_cells: int,
    area: float,
    seed: int,
    *,
    params: Optional[SystemParams] = None,
    fms_radius: float = 6.0,
    priorities: Sequence[float] = (1.0, 2.0, 3.0, 4.0),
    target_sinr_db: Tuple[float, float] = (0.0, 20.0),
    noise_variance_dbm: float = -90.0,
    resource_count: int = 1,
    rounds: int = 1,
    scheme: Scheme = Scheme.THROUGHPUT_APPROX,
) -> Scenario:
    """One fBS per cell placed uniformly in an ``area`` x ``area`` square.

    Each fBS serves one fMS dropped uniformly in the disc of radius
    ``fms_radius`` around it. fBS ids are ``0..n-1``; fMS ``n + k`` belongs to
    fBS ``k``. Draw order per cell: fBS x, fBS y, fMS radius, fMS angle,
    priority, target SINR.
    """
    if n_cells < 1:
        raise ValidationError("generator.n_cells", "must be >= 1")
    if not area > 0:
        raise ValidationError("generator.area", "must be > 0")
    params = params or SystemParams()
    rng = SplitMix64(seed)
    noise = db_to_linear(noise_variance_dbm)
    fbs, fms = [], []
    for k in range(n_cells):
        x, y = rng.uniform(0.0, area), rng.uniform(0.0, area)
        r = fms_radius * math.sqrt(rng.uniform())
        theta = rng.uniform(0.0, 2.0 * math.pi)
        eta = float(rng.choice(priorities))
        sinr_db = rng.uniform(*target_sinr_db)
        fbs.append(Node(k, NodeKind.FBS, (x, y)))
        fms.append(Node(
            n_cells + k, NodeKind.FMS,
            (x + r * math.cos(theta), y + r * math.sin(theta)),
            serving_fbs=k,
            priority=eta,
            target_sinr=db_to_linear(sinr_db),
            noise_variance=noise,
        ))
    return Scenario(
        params=params,
        nodes=tuple(fbs + fms),
        resource_count=resource_count,
        rounds=rounds,
        scheme=scheme,
        seed=seed & MASK64,
    )


@dataclass(frozen=True)
class SchemeSummary:
    """One row of a comparison table.

    SINRs are linear. ``silenced_fbs`` counts zero-power decisions summed
    over all rounds.
    """

    scheme: Scheme
    mean_weighted_throughput: float
    sinr_min: float
    sinr_median: float
    sinr_max: float
    silenced_fbs: int


def summarize(scheme: Scheme, metrics: Sequence[RoundMetrics]) -> SchemeSummary:
    sinrs = [m.sinr for rm in metrics for m in rm.per_fms]
    return SchemeSummary(
        scheme=Scheme(scheme),
        mean_weighted_throughput=statistics.fmean(rm.system_weighted_throughput for rm in metrics),
        sinr_min=min(sinrs),
        sinr_median=statistics.median(sinrs),
        sinr_max=max(sinrs),
        silenced_fbs=sum(1 for rm in metrics for m in rm.per_fms if m.power == 0.0),
    )


DEFAULT_COMPARISON = (Scheme.NONE, Scheme.ORTHOGONAL, Scheme.PRIORITY, Scheme.THROUGHPUT_APPROX)


def compare_schemes(scenario: Scenario, schemes: Sequence[Scheme] = DEFAULT_COMPARISON) -> List[SchemeSummary]:
    """Run every scheme on the same scenario and seed; one row per scheme."""
    rows = []
    for scheme in schemes:
        rows.append(summarize(scheme, run_scenario(dataclasses.replace(scenario, scheme=scheme))))
    return rows
