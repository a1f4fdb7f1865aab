"""Contours: dual-lattice separation lines of a configuration.

The edge set of a configuration consists of the dual edges crossing
unequal-spin nearest-neighbor bonds that meet the box.  At every dual
vertex where four such edges meet, the north edge is joined to the east
edge and the south edge to the west one; the two resulting corners bend
around the NE and SW sites, so same-sign NW-SE diagonal pairs are never
separated.  Tracing the joined edges decomposes the edge set into
edge-disjoint self-avoiding lines: closed loops and open contours ending
on the dual boundary of the box.

Dual sites are stored with doubled coordinates (odd integers); a dual
edge is the ordered pair of its endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NotSingleInterface
from .lattice import Rect, boundary_layer, in_dual_box

# ports at a dual vertex, with doubled-coordinate steps
_N, _E, _S, _W = 0, 1, 2, 3
_STEP = {_N: (0, 2), _E: (2, 0), _S: (0, -2), _W: (-2, 0)}
_OPP = {_N: _S, _S: _N, _E: _W, _W: _E}

# s-path connectivity as a 3x3 stencil indexed [dy+1][dx+1]:
# nearest neighbors plus the NW and SE diagonals
SPATH_STRUCTURE = np.array([[0, 1, 1],
                            [1, 1, 1],
                            [1, 1, 0]], dtype=bool)
COSPATH_STRUCTURE = np.array([[1, 1, 0],
                              [1, 1, 1],
                              [0, 1, 1]], dtype=bool)


@dataclass(frozen=True)
class Contour:
    """One traced line; vertices may repeat at deformed crossings, edges not."""

    vertices: tuple
    closed: bool

    @property
    def endpoints(self):
        if self.closed:
            raise ValueError("closed contour has no endpoints")
        return (self.vertices[0], self.vertices[-1])

    def edge_keys(self):
        out = []
        vs = self.vertices + ((self.vertices[0],) if self.closed else ())
        for a, b in zip(vs, vs[1:]):
            out.append((a, b) if a <= b else (b, a))
        return out

    def __len__(self):
        return len(self.vertices) + (1 if self.closed else 0) - 1


@dataclass(frozen=True)
class ContourFamily:
    open_contours: tuple
    closed_contours: tuple

    @property
    def matching(self):
        return tuple(c.endpoints for c in self.open_contours)

    def all_edges(self):
        out = set()
        for c in self.open_contours + self.closed_contours:
            out.update(c.edge_keys())
        return out

    def open_key(self):
        """Syntactic identity of the open part, for grouping weights."""
        return tuple(c.vertices for c in self.open_contours)

    def to_json_dict(self):
        def poly(c):
            return {"vertices": [list(v) for v in c.vertices],
                    "closed": c.closed,
                    "endpoints": None if c.closed else
                    [list(c.vertices[0]), list(c.vertices[-1])]}
        return {"open": [poly(c) for c in self.open_contours],
                "closed": [poly(c) for c in self.closed_contours]}


# ---------------------------------------------------------------------------
# edge extraction
# ---------------------------------------------------------------------------

def edge_set(config) -> set:
    """Dual edges separating unequal spins across bonds meeting the box."""
    box = config.box
    g = config.grid
    edges = set()
    # horizontal bonds (x,y)-(x+1,y): x in [x0-1, x1], y in [y0, y1]
    uneq = (g[1:-1, :-1].astype(np.int16) * g[1:-1, 1:]) < 0
    for iy, ix in zip(*np.nonzero(uneq)):
        x = box.x0 - 1 + int(ix)
        y = box.y0 + int(iy)
        a = (2 * x + 1, 2 * y - 1)
        b = (2 * x + 1, 2 * y + 1)
        edges.add((a, b))
    # vertical bonds (x,y)-(x,y+1): x in [x0, x1], y in [y0-1, y1]
    uneq = (g[:-1, 1:-1].astype(np.int16) * g[1:, 1:-1]) < 0
    for iy, ix in zip(*np.nonzero(uneq)):
        x = box.x0 + int(ix)
        y = box.y0 - 1 + int(iy)
        a = (2 * x - 1, 2 * y + 1)
        b = (2 * x + 1, 2 * y + 1)
        edges.add((a, b))
    return edges


def _ports(edges):
    """Map dual vertex -> 4-bit mask of incident edge directions."""
    ports = {}
    for a, b in edges:
        if b == (a[0], a[1] + 2):
            da, db = _N, _S
        else:
            da, db = _E, _W
        ports[a] = ports.get(a, 0) | (1 << da)
        ports[b] = ports.get(b, 0) | (1 << db)
    return ports


def _partner(mask: int, port: int):
    """Continuation port when arriving at a vertex through ``port``.

    Degree <= 2: the other incident edge if any.  Degree >= 3: the (N,E)
    and (S,W) corners are joined where complete; unpaired ports terminate
    a contour.  This is the full-lattice deformation rule restricted to
    the edges that exist near the boundary.
    """
    deg = bin(mask).count("1")
    if deg <= 2:
        rest = mask & ~(1 << port)
        if rest == 0:
            return None
        return rest.bit_length() - 1
    if port == _N:
        return _E if mask & (1 << _E) else None
    if port == _E:
        return _N if mask & (1 << _N) else None
    if port == _S:
        return _W if mask & (1 << _W) else None
    return _S if mask & (1 << _S) else None


def _canonical_open(path):
    if path[0] > path[-1]:
        path = path[::-1]
    return tuple(path)


def _canonical_closed(path):
    """Lex-smallest rotation/direction of a cyclic vertex sequence."""
    best = None
    m = min(path)
    k = len(path)
    doubled = path + path
    for i, v in enumerate(path):
        if v != m:
            continue
        fwd = tuple(doubled[i:i + k])
        rev = tuple(reversed(doubled[i + 1:i + 1 + k]))
        for cand in (fwd, rev):
            if best is None or cand < best:
                best = cand
    return best


def extract_contours(config, open_only: bool = False) -> ContourFamily:
    """Decompose the configuration's edge set into contours."""
    edges = edge_set(config)
    return extract_from_edges(edges, open_only=open_only)


def extract_from_edges(edges, open_only: bool = False) -> ContourFamily:
    ports = _ports(edges)
    used = set()

    def walk(v, port):
        """Follow pairings from the half-edge (v, port); returns vertex path."""
        path = [v]
        while True:
            da, db = _STEP[port]
            w = (v[0] + da, v[1] + db)
            key = (v, w) if v <= w else (w, v)
            if key in used:
                return path  # closed walk came back to its first edge
            used.add(key)
            path.append(w)
            nxt = _partner(ports[w], _OPP[port])
            if nxt is None:
                return path
            v, port = w, nxt

    loose = []
    for v, mask in ports.items():
        for port in (_N, _E, _S, _W):
            if mask & (1 << port) and _partner(mask, port) is None:
                loose.append((v, port))
    loose.sort()

    opens = []
    for v, port in loose:
        da, db = _STEP[port]
        w = (v[0] + da, v[1] + db)
        key = (v, w) if v <= w else (w, v)
        if key in used:
            continue
        opens.append(Contour(_canonical_open(walk(v, port)), closed=False))

    closeds = []
    if not open_only:
        remaining = sorted(e for e in edges if e not in used)
        for a, b in remaining:
            key = (a, b)
            if key in used:
                continue
            port = _N if b == (a[0], a[1] + 2) else _E
            path = walk(a, port)
            closeds.append(Contour(_canonical_closed(path[:-1]), closed=True))

    opens.sort(key=lambda c: min(c.vertices))
    closeds.sort(key=lambda c: min(c.vertices))
    return ContourFamily(tuple(opens), tuple(closeds))


# ---------------------------------------------------------------------------
# endpoints from the boundary condition
# ---------------------------------------------------------------------------

def _gap_endpoint(box: Rect, a, b):
    """Dual site sitting in the gap between consecutive boundary-layer sites."""
    (xa, ya), (xb, yb) = a, b
    mx, my = xa + xb, ya + yb  # doubled midpoint
    if (mx & 1) and (my & 1):
        return (mx, my)  # diagonal corner gap
    if ya == yb == box.y0 - 1:
        return (mx, 2 * box.y0 - 1)
    if ya == yb == box.y1 + 1:
        return (mx, 2 * box.y1 + 1)
    if xa == xb == box.x0 - 1:
        return (2 * box.x0 - 1, my)
    if xa == xb == box.x1 + 1:
        return (2 * box.x1 + 1, my)
    raise ValueError(f"sites {a}, {b} are not a boundary gap of {box}")


def endpoints_of_bc(bc, box: Rect) -> tuple:
    """Endpoints of the open contours, read off the boundary spins alone.

    Walks the boundary layer circularly and emits the gap dual site at
    every sign change; the count is even.
    """
    layer = boundary_layer(box)
    vals = [bc.value(s) for s in layer]
    out = []
    for i, site in enumerate(layer):
        j = (i + 1) % len(layer)
        if vals[i] != vals[j]:
            out.append(_gap_endpoint(box, site, layer[j]))
    return tuple(out)


# ---------------------------------------------------------------------------
# events and observables
# ---------------------------------------------------------------------------

def crossing_count(family: ContourFamily, probe: Rect) -> int:
    """Number of open contours with a dual vertex inside the probe's dual box."""
    count = 0
    for c in family.open_contours:
        if any(in_dual_box(v, probe) for v in c.vertices):
            count += 1
    return count


def circuit_event(config, core: Rect, sign: int) -> bool:
    """Is there an s-path circuit of ``sign`` spins around the core?

    Implemented through the blocking dual: the circuit exists iff no
    s-connected path of opposite-sign annulus sites joins the core's
    neighborhood to the outer ring of the box.  The s-graph is a planar
    triangulation, hence self-matching, so the blocking path lives in the
    same adjacency; this is validated against a geometric oracle in the
    test suite.
    """
    box = config.box
    if not box.strictly_contains_rect(core):
        raise ValueError("core must be strictly inside the box")
    interior = config.interior
    h, w = interior.shape
    core_mask = np.zeros((h, w), dtype=bool)
    core_mask[core.y0 - box.y0:core.y1 - box.y0 + 1,
              core.x0 - box.x0:core.x1 - box.x0 + 1] = True
    annulus = ~core_mask
    blocked = (interior != sign) & annulus
    labels, n_lab = ndimage.label(blocked, structure=SPATH_STRUCTURE)
    if n_lab == 0:
        return True
    near_core = ndimage.binary_dilation(core_mask, structure=SPATH_STRUCTURE) \
        & annulus
    ring = np.zeros((h, w), dtype=bool)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    inner_labels = set(np.unique(labels[near_core])) - {0}
    outer_labels = set(np.unique(labels[ring])) - {0}
    return not (inner_labels & outer_labels)


def interface_height_profile(family: ContourFamily) -> dict:
    """Heights at which the unique open contour visits each dual column.

    Returns ``{doubled_x: sorted list of heights}`` with heights in lattice
    units (half-integers).  Requires exactly one open contour.
    """
    if len(family.open_contours) != 1:
        raise NotSingleInterface(
            f"{len(family.open_contours)} open contours, need 1")
    prof = {}
    for (a, b) in family.open_contours[0].vertices:
        prof.setdefault(a, []).append(b / 2.0)
    return {a: sorted(hs) for a, hs in prof.items()}


def median_height(profile: dict, doubled_x: int):
    hs = profile.get(doubled_x)
    if not hs:
        return None
    return float(np.median(hs))


# observable adapters for the sampler -------------------------------------

class CircuitObservable:
    """Indicator of an s-circuit of ``sign`` spins around ``core``."""

    def __init__(self, core: Rect, sign: int, name=None):
        self.core = core
        self.sign = sign
        self.name = name or f"circuit({sign:+d},{core.x1})"

    def __call__(self, config):
        return 1.0 if circuit_event(config, self.core, self.sign) else 0.0


class CrossingObservable:
    """Indicator of at least ``k`` open contours meeting the probe."""

    def __init__(self, probe: Rect, k: int, name=None):
        self.probe = probe
        self.k = k
        self.name = name or f"ncr>={k}"

    def __call__(self, config):
        fam = extract_contours(config, open_only=True)
        return 1.0 if crossing_count(fam, self.probe) >= self.k else 0.0


class InterfaceHeightObservable:
    """Median visit height of the unique open contour at one dual column."""

    def __init__(self, doubled_x: int = 1, name=None):
        self.doubled_x = doubled_x
        self.name = name or f"height(x2={doubled_x})"

    def __call__(self, config):
        fam = extract_contours(config, open_only=True)
        prof = interface_height_profile(fam)
        m = median_height(prof, self.doubled_x)
        if m is None:
            # contour skipped the column; fall back to nearest visited column
            cols = np.array(sorted(prof))
            nearest = cols[np.argmin(np.abs(cols - self.doubled_x))]
            m = median_height(prof, int(nearest))
        return m


class HitObservable:
    """Indicator that the unique open contour meets the probe's dual box."""

    def __init__(self, probe: Rect, name=None):
        self.probe = probe
        self.name = name or f"hit({probe.x1})"

    def __call__(self, config):
        fam = extract_contours(config, open_only=True)
        return 1.0 if crossing_count(fam, self.probe) >= 1 else 0.0
