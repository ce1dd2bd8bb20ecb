"""Over-the-air RRM handling: payload, power rules, decoding and hashing.

An fMS broadcasts its RRM at ``min(P_RRM / h_i, P)`` so that any fBS
reached through a link as strong as the fMS's own serving link receives
exactly ``P_RRM``. Receiving fBSs decode RRMs at or above the detection
threshold and group them per resource into a :class:`CoordinationContext`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Tuple

from .errors import InvalidGainError, OwnRrmMissingError
from .model import GainMatrix, Node, SystemParams

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """SplitMix64 output function (increment included); a bijection on u64."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RrmMessage:
    sender_fms: int
    target_sinr: float
    resource_id: int
    hashed_bs_id: int
    priority: float

    @property
    def is_sentinel(self) -> bool:
        return self.target_sinr == 0.0


@dataclass(frozen=True)
class ReceivedRrm:
    message: RrmMessage
    received_power: float


def build_rrm(fms: Node, resource_id: int, retransmission: bool = False) -> RrmMessage:
    return RrmMessage(
        sender_fms=fms.id,
        target_sinr=0.0 if retransmission else fms.target_sinr,
        resource_id=resource_id,
        hashed_bs_id=mix64(fms.serving_fbs),
        priority=fms.priority,
    )


def rrm_transmit_power(h_i: float, params: SystemParams) -> float:
    """Power an fMS spends on its RRM given its serving-link gain ``h_i``."""
    if not h_i > 0:
        raise InvalidGainError(f"serving gain must be positive, got {h_i!r}")
    return min(params.nominal_rrm_power / h_i, params.max_power)


def rrm_received_power(h_ic: float, p_tran: float) -> float:
    if not h_ic > 0:
        raise InvalidGainError(f"cross gain must be positive, got {h_ic!r}")
    if not p_tran > 0:
        raise ValueError(f"transmit power must be positive, got {p_tran!r}")
    return h_ic * p_tran


@dataclass(frozen=True)
class ExactLink:
    """True gains behind one neighbor entry (exact-objective mode only).

    ``h_i``: neighbor fBS to its own fMS. ``h_ic``: neighbor fMS to the
    coordinating fBS. ``h_ci``: neighbor fBS to the coordinating fBS's fMS.
    """

    h_i: float
    h_ic: float
    h_ci: float
    noise_variance: float


@dataclass(frozen=True)
class NeighborEntry:
    sender_fms: int
    priority: float
    target_sinr: float
    p_rec: float
    hashed_bs_id: int
    exact: Optional[ExactLink] = None


@dataclass(frozen=True)
class OwnLink:
    fms: int
    priority: float
    h_c: float
    noise_variance: float
    target_sinr: float
    hashed_bs_id: int


@dataclass(frozen=True)
class CoordinationContext:
    """Everything one fBS knows when setting its power on one resource.

    ``neighbors`` never contains the fBS's own fMS; that one is ``own``.
    """

    fbs: int
    resource: int
    own: OwnLink
    neighbors: Tuple[NeighborEntry, ...]
    max_power: float
    nominal_rrm_power: float

    @property
    def has_exact(self) -> bool:
        return all(nb.exact is not None for nb in self.neighbors)

    def replace_neighbors(self, neighbors) -> "CoordinationContext":
        return CoordinationContext(
            self.fbs, self.resource, self.own, tuple(neighbors),
            self.max_power, self.nominal_rrm_power,
        )


def collect_context(
    fbs_c: int,
    resource: int,
    received: Iterable[ReceivedRrm],
    params: SystemParams,
    nodes: Mapping[int, Node],
    gains: GainMatrix,
    with_exact: bool = True,
) -> CoordinationContext:
    """Build fBS ``fbs_c``'s decoded RRM set for ``resource``.

    ``received`` holds every RRM with its power as measured at ``fbs_c``.
    An RRM joins the set iff it asks for ``resource`` and its received
    power reaches the detection threshold.
    """
    decoded = [
        rx for rx in received
        if rx.message.resource_id == resource
        and rx.received_power >= params.detection_threshold
    ]
    own_rx = [rx for rx in decoded if nodes[rx.message.sender_fms].serving_fbs == fbs_c]
    if not own_rx:
        raise OwnRrmMissingError(
            f"fBS {fbs_c} did not decode its own fMS's RRM on resource {resource}"
        )
    if len(own_rx) > 1:
        raise OwnRrmMissingError(f"fBS {fbs_c} has several own RRMs on resource {resource}")
    own_msg = own_rx[0].message
    own_fms = nodes[own_msg.sender_fms]
    own = OwnLink(
        fms=own_fms.id,
        priority=own_msg.priority,
        h_c=gains.gain(fbs_c, own_fms.id),
        noise_variance=own_fms.noise_variance,
        target_sinr=own_msg.target_sinr,
        hashed_bs_id=own_msg.hashed_bs_id,
    )

    neighbors = []
    for rx in decoded:
        msg = rx.message
        if msg.sender_fms == own.fms:
            continue
        sender = nodes[msg.sender_fms]
        exact = None
        if with_exact:
            exact = ExactLink(
                h_i=gains.gain(sender.serving_fbs, sender.id),
                h_ic=gains.gain(sender.id, fbs_c),
                h_ci=gains.gain(sender.serving_fbs, own.fms),
                noise_variance=sender.noise_variance,
            )
        neighbors.append(
            NeighborEntry(
                sender_fms=sender.id,
                priority=msg.priority,
                target_sinr=msg.target_sinr,
                p_rec=rx.received_power,
                hashed_bs_id=msg.hashed_bs_id,
                exact=exact,
            )
        )
    neighbors.sort(key=lambda nb: nb.sender_fms)
    return CoordinationContext(
        fbs=fbs_c,
        resource=resource,
        own=own,
        neighbors=tuple(neighbors),
        max_power=params.max_power,
        nominal_rrm_power=params.nominal_rrm_power,
    )
