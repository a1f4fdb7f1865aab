"""Geometry of Z^2, its dual lattice, boxes and the two matched adjacencies.

Sites are integer pairs ``(x, y)``.  Dual sites live on ``(1/2, 1/2) + Z^2``
and are stored with *doubled* coordinates ``(2x, 2y)`` so that everything
stays integer: a dual site is a pair of odd integers.

The canonical site order of a box is row-major: y runs slowest from bottom
to top, x fastest from left to right.  Every bit-packed structure in the
package indexes spins in this order.
"""

from __future__ import annotations

from dataclasses import dataclass

Site = tuple[int, int]
DualSite = tuple[int, int]  # doubled coordinates, both odd

# Adjacency kinds.  SPATH adds the NW and SE diagonal steps to the four
# nearest neighbors; COSPATH adds the NE and SW ones.
NN = "nn"
SPATH = "spath"
COSPATH = "cospath"

_NN_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_SPATH_STEPS = _NN_STEPS + ((-1, 1), (1, -1))
_COSPATH_STEPS = _NN_STEPS + ((1, 1), (-1, -1))

_STEPS = {NN: _NN_STEPS, SPATH: _SPATH_STEPS, COSPATH: _COSPATH_STEPS}


@dataclass(frozen=True)
class Rect:
    """Axis-aligned set of sites x0..x1 times y0..y1, inclusive."""

    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("empty rectangle")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    def __contains__(self, site: Site) -> bool:
        x, y = site
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and other.x1 <= self.x1
                and self.y0 <= other.y0 and other.y1 <= self.y1)

    def strictly_contains_rect(self, other: "Rect") -> bool:
        return (self.x0 < other.x0 and other.x1 < self.x1
                and self.y0 < other.y0 and other.y1 < self.y1)

    def site_index(self, site: Site) -> int:
        """Canonical row-major index of a site of the rectangle."""
        x, y = site
        if site not in self:
            raise ValueError(f"site {site} not in {self}")
        return (y - self.y0) * self.width + (x - self.x0)

    def sites(self) -> list[Site]:
        return [(x, y)
                for y in range(self.y0, self.y1 + 1)
                for x in range(self.x0, self.x1 + 1)]


@dataclass(frozen=True)
class Box(Rect):
    """Centered square box {-n, ..., n}^2 with half-side n."""

    n: int = 0

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("half-side must be nonnegative")
        object.__setattr__(self, "n", n)
        super().__init__(-n, n, -n, n)

    def __repr__(self):  # the rect corners are implied by n
        return f"Box({self.n})"


def box_sites(box: Rect) -> list[Site]:
    """All sites of the box in canonical row-major order."""
    return box.sites()


def dual_box(box: Rect) -> set[DualSite]:
    """Dual sites with at least one of their four surrounding sites in the box.

    Equivalently the dual sites at Euclidean distance 1/sqrt(2) from the box;
    there are (width+1)*(height+1) of them.
    """
    out = set()
    for x in range(box.x0 - 1, box.x1 + 1):
        for y in range(box.y0 - 1, box.y1 + 1):
            out.add((2 * x + 1, 2 * y + 1))
    return out


def dual_boundary(box: Rect) -> set[DualSite]:
    """Dual sites at distance 1/sqrt(2) from both the box and its complement.

    This is the outermost ring of ``dual_box``; open contours end here.
    """
    ring = set()
    for x in range(box.x0 - 1, box.x1 + 1):
        ring.add((2 * x + 1, 2 * box.y0 - 1))
        ring.add((2 * x + 1, 2 * box.y1 + 1))
    for y in range(box.y0 - 1, box.y1 + 1):
        ring.add((2 * box.x0 - 1, 2 * y + 1))
        ring.add((2 * box.x1 + 1, 2 * y + 1))
    return ring


def in_dual_box(v: DualSite, box: Rect) -> bool:
    """Membership test for ``dual_box`` without materializing the set."""
    a, b = v
    return (2 * box.x0 - 1 <= a <= 2 * box.x1 + 1
            and 2 * box.y0 - 1 <= b <= 2 * box.y1 + 1)


def boundary_layer(box: Rect) -> list[Site]:
    """Exterior sites at l1-distance 1 from the box, in circular order.

    The walk starts at the leftmost site below the bottom-left corner and
    proceeds counterclockwise: bottom row left-to-right, right column
    bottom-to-top, top row right-to-left, left column top-to-bottom.
    There are 2*(width+height) of them; corners are not part of the layer.
    """
    out = []
    out.extend((x, box.y0 - 1) for x in range(box.x0, box.x1 + 1))
    out.extend((box.x1 + 1, y) for y in range(box.y0, box.y1 + 1))
    out.extend((x, box.y1 + 1) for x in range(box.x1, box.x0 - 1, -1))
    out.extend((box.x0 - 1, y) for y in range(box.y1, box.y0 - 1, -1))
    return out


def neighbors(site: Site, adj: str = NN) -> list[Site]:
    """Neighbors of a site under the chosen adjacency (4 for NN, 6 otherwise)."""
    x, y = site
    return [(x + dx, y + dy) for dx, dy in _STEPS[adj]]


def adjacency_offsets(adj: str) -> tuple[tuple[int, int], ...]:
    return _STEPS[adj]
