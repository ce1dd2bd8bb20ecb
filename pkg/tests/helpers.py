import math

from femtocoord.airlink import (
    CoordinationContext,
    ExactLink,
    NeighborEntry,
    OwnLink,
    mix64,
)
from femtocoord.model import Node, NodeKind, SystemParams


def make_context(own=None, neighbors=(), P=1.0, P_RRM=0.01, fbs=0, resource=0):
    """Hand-built context. ``neighbors`` are dicts with eta/sinr/p_rec and
    optional exact gains h_i/h_ic/h_ci/sigma2."""
    own = dict(own or {})
    own_link = OwnLink(
        fms=own.get("fms", 100),
        priority=own.get("eta", 1.0),
        h_c=own.get("h_c", 1.0),
        noise_variance=own.get("sigma2", 1.0),
        target_sinr=own.get("sinr", 1.0),
        hashed_bs_id=own.get("hashed", mix64(fbs)),
    )
    entries = []
    for k, nb in enumerate(neighbors):
        exact = None
        if "h_i" in nb:
            exact = ExactLink(nb["h_i"], nb["h_ic"], nb["h_ci"], nb["sigma2"])
        entries.append(NeighborEntry(
            sender_fms=nb.get("fms", 200 + k),
            priority=nb.get("eta", 1.0),
            target_sinr=nb.get("sinr", 1.0),
            p_rec=nb.get("p_rec", P_RRM),
            hashed_bs_id=nb.get("hashed", mix64(fbs + 1 + k)),
            exact=exact,
        ))
    return CoordinationContext(fbs, resource, own_link, tuple(entries), P, P_RRM)


def two_cell_nodes(d_cross=10.0, d_own=1.0, eta=(1.0, 1.0), sinr=(3.0, 3.0), sigma2=1e-9):
    """Two fBSs 2*d_cross apart, each with an fMS at distance d_own."""
    nodes = [
        Node(0, NodeKind.FBS, (0.0, 0.0)),
        Node(1, NodeKind.FBS, (2 * d_cross, 0.0)),
        Node(2, NodeKind.FMS, (d_own, 0.0), serving_fbs=0, priority=eta[0],
             target_sinr=sinr[0], noise_variance=sigma2),
        Node(3, NodeKind.FMS, (2 * d_cross - d_own, 0.0), serving_fbs=1, priority=eta[1],
             target_sinr=sinr[1], noise_variance=sigma2),
    ]
    return nodes


def log2_1p(x):
    return math.log(1.0 + x, 2)


UNIT_PARAMS = SystemParams(max_power=1.0, nominal_rrm_power=0.01)
