"""Network topology, system parameters and the reciprocal channel-gain model.

Everything in here is immutable once built and works in linear units
(mW and plain ratios). Conversions to and from dB live at the edges.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Tuple

from .errors import InvalidGainError, ValidationError

SYMMETRY_RTOL = 1e-12


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0.0:
        return -math.inf
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemParams:
    """System-wide constants.

    Powers are linear mW. ``nominal_rrm_power`` must sit strictly below
    ``max_power``; ``detection_threshold`` is the minimum received RRM power
    an fBS can decode (0 decodes everything).
    """

    max_power: float = 100.0
    nominal_rrm_power: float = 1e-4
    detection_threshold: float = 0.0
    grid_points: int = 4097
    pathloss_ref_loss: float = 37.0
    pathloss_exponent: float = 3.0
    ref_distance: float = 1.0

    def __post_init__(self):
        if not self.max_power > 0:
            raise ValidationError("params.max_power", "must be > 0")
        if not 0 < self.nominal_rrm_power < self.max_power:
            raise ValidationError(
                "params.nominal_rrm_power", "must satisfy 0 < P_RRM < max_power"
            )
        if not self.detection_threshold >= 0:
            raise ValidationError("params.detection_threshold", "must be >= 0")
        if isinstance(self.grid_points, bool) or int(self.grid_points) != self.grid_points:
            raise ValidationError("params.grid_points", "must be an integer")
        if self.grid_points < 2:
            raise ValidationError("params.grid_points", "must be >= 2")
        if not self.ref_distance > 0:
            raise ValidationError("params.ref_distance", "must be > 0")
        if not self.pathloss_exponent >= 0:
            raise ValidationError("params.pathloss_exponent", "must be >= 0")
        if not math.isfinite(self.pathloss_ref_loss):
            raise ValidationError("params.pathloss_ref_loss", "must be finite")


class NodeKind(enum.Enum):
    FBS = "fbs"
    FMS = "fms"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    position: Tuple[float, float]
    serving_fbs: Optional[int] = None
    priority: float = 1.0
    target_sinr: float = 1.0
    noise_variance: float = 1e-9

    @property
    def is_fbs(self) -> bool:
        return self.kind is NodeKind.FBS

    @property
    def is_fms(self) -> bool:
        return self.kind is NodeKind.FMS


def validate_topology(nodes: Iterable[Node]) -> None:
    """Check ids, association and per-node ranges; raise ValidationError."""
    nodes = list(nodes)
    seen = {}
    for k, node in enumerate(nodes):
        path = f"nodes[{k}]"
        if node.id in seen:
            raise ValidationError(f"{path}.id", f"duplicate node id {node.id}")
        seen[node.id] = node
        x, y = node.position
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValidationError(f"{path}.position", "must be finite")
        if not node.priority >= 0:
            raise ValidationError(f"{path}.priority", "must be >= 0")
    for k, node in enumerate(nodes):
        if not node.is_fms:
            continue
        path = f"nodes[{k}]"
        serving = seen.get(node.serving_fbs)
        if serving is None or not serving.is_fbs:
            raise ValidationError(
                f"{path}.serving_fbs", f"{node.serving_fbs!r} is not an fBS id"
            )
        if not node.target_sinr >= 0:
            raise ValidationError(f"{path}.target_sinr", "must be >= 0")
        if not node.noise_variance > 0:
            raise ValidationError(f"{path}.noise_variance", "must be > 0")


def pathloss_gain(distance: float, params: SystemParams) -> float:
    """Log-distance path gain, clamped to the reference distance."""
    d = max(distance, params.ref_distance)
    loss_db = params.pathloss_ref_loss + 10.0 * params.pathloss_exponent * math.log10(
        d / params.ref_distance
    )
    return 10.0 ** (-loss_db / 10.0)


def _key(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a <= b else (b, a)


class GainMatrix:
    """Reciprocal link gains between node pairs.

    Only one value is stored per unordered pair, so ``gain(a, b)`` and
    ``gain(b, a)`` are the same float.
    """

    def __init__(self, gains: Mapping[Tuple[int, int], float]):
        self._gains = {}
        for (a, b), g in gains.items():
            if a == b:
                raise InvalidGainError(f"self-gain ({a}, {b}) is not a link")
            if not g > 0 or not math.isfinite(g):
                raise InvalidGainError(f"gain({a}, {b}) = {g!r} must be positive and finite")
            self._gains[_key(a, b)] = float(g)

    @classmethod
    def from_directed(cls, entries: Mapping[Tuple[int, int], float]) -> "GainMatrix":
        """Build from possibly both-direction entries, enforcing symmetry.

        A pair given in one direction only is mirrored. A pair given in both
        directions must agree to 1e-12 relative.
        """
        merged = {}
        for (a, b), g in entries.items():
            if not g > 0:
                raise InvalidGainError(f"gain({a}, {b}) = {g!r} must be positive")
            k = _key(a, b)
            if k in merged:
                other = merged[k]
                if abs(other - g) > SYMMETRY_RTOL * max(abs(other), abs(g)):
                    raise InvalidGainError(
                        f"asymmetric gain: gain({a}, {b}) = {g!r} vs gain({b}, {a}) = {other!r}"
                    )
            else:
                merged[k] = g
        return cls(merged)

    def gain(self, a: int, b: int) -> float:
        return self._gains[_key(a, b)]

    def items(self):
        return sorted(self._gains.items())

    def __contains__(self, pair) -> bool:
        return _key(*pair) in self._gains

    def __len__(self) -> int:
        return len(self._gains)

    def __eq__(self, other):
        if not isinstance(other, GainMatrix):
            return NotImplemented
        return self._gains == other._gains

    def __repr__(self):
        return f"GainMatrix({len(self._gains)} pairs)"


def compute_gains(
    nodes: Iterable[Node],
    params: SystemParams,
    override: Optional[GainMatrix] = None,
) -> GainMatrix:
    """Path-loss gains for every node pair; ``override`` entries win."""
    nodes = list(nodes)
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError("nodes", "duplicate node ids")
    gains = {}
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            d = math.dist(a.position, b.position)
            gains[_key(a.id, b.id)] = pathloss_gain(d, params)
    if override is not None:
        known = set(ids)
        for (a, b), g in override.items():
            if a not in known or b not in known:
                raise ValidationError("gain_override", f"pair ({a}, {b}) names an unknown node")
            gains[(a, b)] = g
    return GainMatrix(gains)
