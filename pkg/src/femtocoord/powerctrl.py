"""Per-fBS power control on one resource.

Two schemes are provided:

* :func:`priority_control` -- the highest-priority requester gets full power,
  everyone else is silenced; ties are settled by a hash lottery that every
  fBS holding the same decoded set resolves identically.
* :func:`optimize_power` -- picks the data power maximizing a
  priority-weighted sum rate over ``[0, P]``. The objective comes in an
  exact form (true gains, neighbors at full power) and an approximate form
  that only needs what an RRM carries (target SINR, received RRM power).

The approximate objective is the sum of a convex decreasing part and a
concave increasing part and can have an interior minimum, so the optimizer
scans a dense grid before refining with golden-section search.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .airlink import MASK64, CoordinationContext, mix64
from .errors import ModeError, SentinelLeakError

LN2 = math.log(2.0)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class Mode(enum.Enum):
    APPROX = "approx"
    EXACT = "exact"


@dataclass(frozen=True)
class PowerDecision:
    fbs: int
    resource: int
    power: float


def _log2_1p(x):
    return np.log1p(x) / LN2


def _unwrap(p_c, out):
    return float(out) if np.ndim(p_c) == 0 else out


# -- priority scheme --------------------------------------------------------

def lottery_score(hashed_bs_id: int, resource: int, round_index: int, seed: int) -> int:
    salt = mix64((round_index ^ seed) & MASK64)
    return mix64(hashed_bs_id ^ mix64((resource ^ salt) & MASK64))


def priority_control(ctx: CoordinationContext, round_index: int, seed: int) -> PowerDecision:
    """Full power iff the own fMS holds the highest decoded priority.

    Among ``M`` entries tied at the top, the one with the largest
    :func:`lottery_score` wins, which gives each a 1/M chance over draws.
    """
    own = ctx.own
    candidates = [(own.priority, own.hashed_bs_id, own.fms)]
    candidates += [(nb.priority, nb.hashed_bs_id, nb.sender_fms) for nb in ctx.neighbors]
    top = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] == top]
    if own.priority < top:
        power = 0.0
    elif len(tied) == 1:
        power = ctx.max_power
    else:
        winner = max(
            tied,
            key=lambda c: (lottery_score(c[1], ctx.resource, round_index, seed), -c[2]),
        )
        power = ctx.max_power if winner[2] == own.fms else 0.0
    return PowerDecision(ctx.fbs, ctx.resource, power)


# -- throughput objectives --------------------------------------------------

def objective_exact(p_c, ctx: CoordinationContext):
    """Weighted sum rate with true gains and every neighbor at full power."""
    if not ctx.has_exact:
        raise ModeError(f"context for fBS {ctx.fbs} carries no exact gains")
    p_c = np.asarray(p_c, dtype=float)
    P = ctx.max_power
    total = np.zeros_like(p_c)
    interference = ctx.own.noise_variance
    for nb in ctx.neighbors:
        ex = nb.exact
        total = total + nb.priority * _log2_1p(P * ex.h_i / (p_c * ex.h_ic + ex.noise_variance))
        interference += P * ex.h_ci
    own = ctx.own
    total = total + own.priority * _log2_1p(p_c * own.h_c / interference)
    return _unwrap(p_c, total)


def _neighbor_sinrs(p_c, ctx):
    """Per-neighbor SINR estimates built from RRM contents only."""
    scale = ctx.nominal_rrm_power * ctx.max_power
    out = []
    for nb in ctx.neighbors:
        if nb.target_sinr == 0.0:
            raise SentinelLeakError(
                f"neighbor fMS {nb.sender_fms} carries the retransmission sentinel"
            )
        out.append(1.0 / (p_c * nb.p_rec / scale + 1.0 / nb.target_sinr))
    return out


def objective_approx(p_c, ctx: CoordinationContext):
    """Weighted sum rate estimated from decoded RRMs.

    Neighbor i's SINR becomes ``1 / (p_c * p_rec_i / (P_RRM * P) + 1/SINR_i)``;
    the own link is taken as interference-free.
    """
    p_c = np.asarray(p_c, dtype=float)
    total = np.zeros_like(p_c)
    for nb, sinr in zip(ctx.neighbors, _neighbor_sinrs(p_c, ctx)):
        total = total + nb.priority * _log2_1p(sinr)
    own = ctx.own
    total = total + own.priority * _log2_1p(p_c * own.h_c / own.noise_variance)
    return _unwrap(p_c, total)


def objective_product(p_c, ctx: CoordinationContext):
    """``2 ** objective_approx`` written as a product of powered factors."""
    p_c = np.asarray(p_c, dtype=float)
    total = np.ones_like(p_c)
    for nb, sinr in zip(ctx.neighbors, _neighbor_sinrs(p_c, ctx)):
        total = total * (1.0 + sinr) ** nb.priority
    own = ctx.own
    total = total * (1.0 + p_c * own.h_c / own.noise_variance) ** own.priority
    return _unwrap(p_c, total)


def objective_literal_sum(p_c, ctx: CoordinationContext):
    """Neighbor product *plus* own factor.

    Not a monotone transform of the approximate objective; kept only so
    reports can show how far its argmax lands from the product form's.
    """
    p_c = np.asarray(p_c, dtype=float)
    prod = np.ones_like(p_c)
    for nb, sinr in zip(ctx.neighbors, _neighbor_sinrs(p_c, ctx)):
        prod = prod * (1.0 + sinr) ** nb.priority
    own = ctx.own
    out = prod + (1.0 + p_c * own.h_c / own.noise_variance) ** own.priority
    return _unwrap(p_c, out)


_OBJECTIVES = {Mode.APPROX: objective_approx, Mode.EXACT: objective_exact}


def objective_for(mode: Mode):
    return _OBJECTIVES[Mode(mode)]


# -- maximizers -------------------------------------------------------------

def golden_section_max(f, a, b, tol=1e-12, max_iter=200):
    """Maximize a function assumed unimodal on [a, b]; returns (x, f(x))."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a), abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_power(ctx: CoordinationContext, mode=Mode.APPROX, grid_points: int = 4097) -> PowerDecision:
    """Global maximizer of the chosen objective over the closed range [0, P].

    The best point of a uniform grid (both endpoints included) is refined by
    golden-section search between its two grid neighbors. The refined point
    is kept only if it scores at least as well as the grid point.
    """
    f = objective_for(mode)
    P = ctx.max_power
    grid = np.linspace(0.0, P, int(grid_points))
    values = f(grid, ctx)
    k = int(np.argmax(values))
    best_x, best_f = float(grid[k]), float(values[k])

    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    x, fx = golden_section_max(lambda p: f(p, ctx), float(lo), float(hi))
    if fx > best_f:
        best_x = x
    return PowerDecision(ctx.fbs, ctx.resource, min(max(best_x, 0.0), P))


def brute_force_optimize(ctx: CoordinationContext, mode=Mode.APPROX, n: int = 10**6,
                         chunk: int = 1 << 15) -> PowerDecision:
    """Exhaustive search over ``n`` evenly spaced powers on [0, P].

    Ties go to the smaller power.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    f = objective_for(mode)
    grid = np.linspace(0.0, ctx.max_power, int(n))
    best_x, best_f = 0.0, -math.inf
    for start in range(0, len(grid), chunk):
        part = grid[start:start + chunk]
        values = f(part, ctx)
        k = int(np.argmax(values))
        if values[k] > best_f:
            best_x, best_f = float(part[k]), float(values[k])
    return PowerDecision(ctx.fbs, ctx.resource, best_x)
