"""One coordination round as a strict phase pipeline.

REQUEST -> RRM_BROADCAST -> POWER_CONTROL -> PILOT -> CQI_FEEDBACK -> DATA

A retransmitting fMS sends its RRM with target SINR 0. Its serving fBS then
keeps last round's power for that resource instead of recomputing.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .airlink import (
    CoordinationContext,
    ReceivedRrm,
    build_rrm,
    collect_context,
    rrm_received_power,
    rrm_transmit_power,
)
from .errors import IncompleteRoundError, ValidationError
from .model import GainMatrix, Node, compute_gains
from .powerctrl import Mode, PowerDecision, optimize_power, priority_control

PowerMap = Dict[Tuple[int, int], float]


class Scheme(enum.Enum):
    NONE = "none"
    ORTHOGONAL = "orthogonal"
    PRIORITY = "priority"
    THROUGHPUT_APPROX = "throughput-approx"
    THROUGHPUT_EXACT = "throughput-exact"


class Phase(enum.IntEnum):
    REQUEST = 0
    RRM_BROADCAST = 1
    POWER_CONTROL = 2
    PILOT = 3
    CQI_FEEDBACK = 4
    DATA = 5


@dataclass
class RoundState:
    round_index: int
    prev_power_map: Mapping[Tuple[int, int], float] = field(default_factory=dict)
    phase: Phase = Phase.REQUEST
    power_map: PowerMap = field(default_factory=dict)

    def advance(self, phase: Phase) -> None:
        if phase != self.phase + 1:
            raise RuntimeError(f"cannot go from {self.phase.name} to {phase.name}")
        self.phase = phase

    def read_power_map(self) -> PowerMap:
        if self.phase <= Phase.POWER_CONTROL:
            raise RuntimeError("power map is not final before power control completes")
        return self.power_map


@dataclass(frozen=True)
class CqiReport:
    fms: int
    resource: int
    measured_sinr: float


@dataclass(frozen=True)
class FmsMetrics:
    fms: int
    resource: int
    power: float
    sinr: float
    throughput: float
    priority: float
    bandwidth_share: float = 1.0


@dataclass(frozen=True)
class RoundMetrics:
    round_index: int
    per_fms: Tuple[FmsMetrics, ...]
    system_weighted_throughput: float
    warnings: Tuple[str, ...] = ()


@dataclass
class RoundOutcome:
    round_index: int
    power_map: PowerMap
    cqi_reports: List[CqiReport]
    metrics: RoundMetrics
    last_target_sinr: Dict[int, float]


def allocate_resources(nodes: Iterable[Node], resource_count: int) -> Dict[int, int]:
    """Round-robin resource per fMS, by ascending fMS id."""
    fms_list = sorted((n for n in nodes if n.is_fms), key=lambda n: n.id)
    alloc = {fms.id: k % resource_count for k, fms in enumerate(fms_list)}
    taken = {}
    for fms in fms_list:
        key = (fms.serving_fbs, alloc[fms.id])
        if key in taken:
            raise ValidationError(
                "resource_count",
                f"fBS {fms.serving_fbs} would serve fMSs {taken[key]} and {fms.id} "
                f"on resource {alloc[fms.id]}",
            )
        taken[key] = fms.id
    return alloc


def measure_sinr(fms_c: int, resource: int, power_map: Mapping[Tuple[int, int], float],
                 gains: GainMatrix, nodes: Mapping[int, Node]) -> float:
    """Linear downlink SINR of ``fms_c`` from the pilots on ``resource``."""
    fms = nodes[fms_c]
    serving = fms.serving_fbs
    if (serving, resource) not in power_map:
        raise IncompleteRoundError(f"no power decision for fBS {serving} on resource {resource}")
    interference = fms.noise_variance
    for (fbs, w), p in sorted(power_map.items()):
        if w != resource or fbs == serving or p == 0.0:
            continue
        interference += p * gains.gain(fbs, fms_c)
    return power_map[(serving, resource)] * gains.gain(serving, fms_c) / interference


def resolve_sentinel_neighbors(ctx: CoordinationContext,
                               last_target_sinr: Mapping[int, float]) -> CoordinationContext:
    """Give sentinel neighbors their last real target SINR, or drop them."""
    kept = []
    for nb in ctx.neighbors:
        if nb.target_sinr == 0.0:
            prev = last_target_sinr.get(nb.sender_fms)
            if not prev:
                continue
            nb = type(nb)(nb.sender_fms, nb.priority, prev, nb.p_rec, nb.hashed_bs_id, nb.exact)
        kept.append(nb)
    return ctx.replace_neighbors(kept)


def handle_retransmission(ctx: CoordinationContext, prev_power_map, fresh,
                          warnings: Optional[List[str]] = None) -> PowerDecision:
    """Keep last round's power for a resource whose own RRM is a sentinel.

    Without a previous decision the request is treated as new: ``fresh()``
    is called and a warning is appended to ``warnings``.
    """
    key = (ctx.fbs, ctx.resource)
    if key in prev_power_map:
        return PowerDecision(ctx.fbs, ctx.resource, prev_power_map[key])
    if warnings is not None:
        warnings.append(
            f"fBS {ctx.fbs} resource {ctx.resource}: retransmission without a previous "
            "decision, recomputed"
        )
    return fresh()


def decide_power(ctx: CoordinationContext, scheme: Scheme, round_index: int, seed: int,
                 grid_points: int, last_target_sinr: Mapping[int, float]) -> PowerDecision:
    if scheme is Scheme.PRIORITY:
        return priority_control(ctx, round_index, seed)
    if scheme is Scheme.THROUGHPUT_APPROX:
        return optimize_power(resolve_sentinel_neighbors(ctx, last_target_sinr),
                              Mode.APPROX, grid_points)
    if scheme is Scheme.THROUGHPUT_EXACT:
        return optimize_power(ctx, Mode.EXACT, grid_points)
    raise ValueError(f"scheme {scheme} does not coordinate")


def broadcast_rrms(nodes: Mapping[int, Node], gains: GainMatrix, params, allocation,
                   retransmitting=frozenset()) -> Dict[int, List[ReceivedRrm]]:
    """Every fMS's RRM as received at every fBS, keyed by fBS id."""
    fbs_ids = sorted(n.id for n in nodes.values() if n.is_fbs)
    received = {b: [] for b in fbs_ids}
    for fms_id in sorted(allocation):
        fms = nodes[fms_id]
        sentinel = fms_id in retransmitting or fms.target_sinr == 0.0
        msg = build_rrm(fms, allocation[fms_id], retransmission=sentinel)
        p_tran = rrm_transmit_power(gains.gain(fms.serving_fbs, fms_id), params)
        for b in fbs_ids:
            p_rec = rrm_received_power(gains.gain(fms_id, b), p_tran)
            received[b].append(ReceivedRrm(msg, p_rec))
    return received


def coordination_contexts(scenario, gains: Optional[GainMatrix] = None, retransmitting=frozenset(),
                          with_exact: bool = True) -> List[CoordinationContext]:
    """All (fBS, resource) contexts a round of ``scenario`` would build."""
    nodes = {n.id: n for n in scenario.nodes}
    if gains is None:
        gains = compute_gains(scenario.nodes, scenario.params, scenario.gain_override)
    allocation = allocate_resources(scenario.nodes, scenario.resource_count)
    received = broadcast_rrms(nodes, gains, scenario.params, allocation, retransmitting)
    out = []
    for fbs, resource in _active_pairs(nodes, allocation):
        out.append(collect_context(fbs, resource, received[fbs], scenario.params, nodes, gains,
                                   with_exact))
    return out


def _active_pairs(nodes, allocation):
    return sorted({(nodes[f].serving_fbs, w) for f, w in allocation.items()})


def run_coordination_round(scenario, scheme: Scheme, round_index: int, seed: int,
                           prev_power_map: Optional[Mapping] = None,
                           last_target_sinr: Optional[Mapping[int, float]] = None,
                           retransmitting=frozenset(),
                           gains: Optional[GainMatrix] = None) -> RoundOutcome:
    """Run one round and return powers, CQI reports and metrics.

    ``retransmitting`` names fMSs that send the sentinel RRM this round.
    ``last_target_sinr`` carries each fMS's most recent real target SINR
    from earlier rounds (used for sentinel neighbors).
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.ORTHOGONAL:
        raise ValueError("orthogonal assignment is a baseline, not a coordination round")
    prev_power_map = dict(prev_power_map or {})
    last_target_sinr = dict(last_target_sinr or {})
    params = scenario.params
    nodes = {n.id: n for n in scenario.nodes}
    if gains is None:
        gains = compute_gains(scenario.nodes, params, scenario.gain_override)
    warnings: List[str] = []
    state = RoundState(round_index, prev_power_map)

    allocation = allocate_resources(scenario.nodes, scenario.resource_count)
    pairs = _active_pairs(nodes, allocation)

    state.advance(Phase.RRM_BROADCAST)
    received = {}
    if scheme is not Scheme.NONE:
        received = broadcast_rrms(nodes, gains, params, allocation, retransmitting)

    state.advance(Phase.POWER_CONTROL)
    for fbs, resource in pairs:
        if scheme is Scheme.NONE:
            state.power_map[(fbs, resource)] = params.max_power
            continue
        ctx = collect_context(fbs, resource, received[fbs], params, nodes, gains,
                              with_exact=scheme is Scheme.THROUGHPUT_EXACT)

        def fresh(ctx=ctx):
            return decide_power(ctx, scheme, round_index, seed, params.grid_points,
                                last_target_sinr)

        if ctx.own.target_sinr == 0.0:
            decision = handle_retransmission(ctx, prev_power_map, fresh, warnings)
        else:
            decision = fresh()
        state.power_map[(fbs, resource)] = decision.power
    missing = [pair for pair in pairs if pair not in state.power_map]
    if missing:
        raise IncompleteRoundError(f"no decision for {missing}")

    state.advance(Phase.PILOT)
    power_map = state.read_power_map()

    state.advance(Phase.CQI_FEEDBACK)
    reports = [
        CqiReport(f, allocation[f], measure_sinr(f, allocation[f], power_map, gains, nodes))
        for f in sorted(allocation)
    ]

    state.advance(Phase.DATA)
    per_fms = []
    for rep in reports:
        fms = nodes[rep.fms]
        per_fms.append(FmsMetrics(
            fms=rep.fms,
            resource=rep.resource,
            power=power_map[(fms.serving_fbs, rep.resource)],
            sinr=rep.measured_sinr,
            throughput=math.log2(1.0 + rep.measured_sinr),
            priority=fms.priority,
        ))
    metrics = make_round_metrics(round_index, per_fms, warnings)

    for f in allocation:
        if f not in retransmitting and nodes[f].target_sinr != 0.0:
            last_target_sinr[f] = nodes[f].target_sinr
    return RoundOutcome(round_index, dict(power_map), reports, metrics, last_target_sinr)


def make_round_metrics(round_index, per_fms, warnings=()) -> RoundMetrics:
    per_fms = tuple(sorted(per_fms, key=lambda m: m.fms))
    total = math.fsum(m.priority * m.throughput for m in per_fms)
    return RoundMetrics(round_index, per_fms, total, tuple(warnings))
