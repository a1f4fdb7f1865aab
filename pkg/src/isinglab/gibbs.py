"""Finite-volume Gibbs measures: configurations, boundary conditions, oracles.

The measure in a box with frozen exterior spins omega is
``mu(sigma) = exp(-beta H(sigma)) / Z`` where ``H`` sums ``-s_i s_j`` over
all nearest-neighbor bonds meeting the box; bonds leaving the box pick up
the boundary spins.  Exact expectations come from two independent engines
(enumeration and transfer matrix, see :mod:`isinglab.exact`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .errors import CapacityExceeded, NotConverged, SupportOutOfBox
from .lattice import Box, Rect, boundary_layer
from .rng import key_from_seed, site_hash_sign

ENUMERATION = "enumeration"
TRANSFER_MATRIX = "transfer-matrix"


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryCondition:
    """Full exterior spin assignment, evaluated lazily per site.

    Named constructors cover the cases used throughout: constant, Dobrushin
    (+1 strictly above the horizontal axis), quadrant (sign changes at the
    four mid-sides), independent Bernoulli spins, a tilted half-plane, and
    explicit tables.  ``flip`` negates every value.
    """

    kind: str
    p: float = 0.5
    seed: int = 0
    theta: float = 0.0
    table: tuple = ()
    flip: bool = False

    @staticmethod
    def plus():
        return BoundaryCondition("plus")

    @staticmethod
    def minus():
        return BoundaryCondition("plus", flip=True)

    @staticmethod
    def dobrushin():
        return BoundaryCondition("dobrushin")

    @staticmethod
    def quadrant():
        return BoundaryCondition("quadrant")

    @staticmethod
    def bernoulli(p: float, seed: int):
        return BoundaryCondition("bernoulli", p=p, seed=seed)

    @staticmethod
    def tilted(theta: float):
        return BoundaryCondition("tilted", theta=theta)

    @staticmethod
    def explicit(mapping):
        items = tuple(sorted(((x, y), int(s)) for (x, y), s in dict(mapping).items()))
        for _, s in items:
            if s not in (-1, 1):
                raise ValueError("explicit boundary spins must be +-1")
        return BoundaryCondition("explicit", table=items)

    def value(self, site) -> int:
        x, y = site
        k = self.kind
        if k == "plus":
            v = 1
        elif k == "dobrushin":
            v = 1 if y > 0 else -1
        elif k == "quadrant":
            v = 1 if (x >= 0) != (y >= 0) else -1
        elif k == "bernoulli":
            v = site_hash_sign(key_from_seed(self.seed), x, y, self.p)
        elif k == "tilted":
            v = 1 if x * math.cos(self.theta) + y * math.sin(self.theta) >= 0 else -1
        elif k == "explicit":
            v = self._lookup(site)
        else:
            raise ValueError(f"unknown boundary kind {k!r}")
        return -v if self.flip else v

    def _lookup(self, site):
        for s, v in self.table:
            if s == site:
                return v
        raise KeyError(f"explicit boundary condition has no value at {site}")

    def values_on(self, sites):
        return np.array([self.value(s) for s in sites], dtype=np.int8)

    def flipped(self):
        return BoundaryCondition(self.kind, self.p, self.seed, self.theta,
                                 self.table, not self.flip)

    @property
    def is_sitewise(self) -> bool:
        """True when values are defined at every site of the plane."""
        return self.kind != "explicit"

    @property
    def label(self) -> str:
        base = self.kind
        if self.kind == "bernoulli":
            base = f"bernoulli({self.p:g},{self.seed})"
        elif self.kind == "tilted":
            base = f"tilted({self.theta:.6g})"
        elif self.kind == "plus" and self.flip:
            return "minus"
        return f"-{base}" if self.flip else base

    def layer_key(self, box: Rect):
        """Hashable fingerprint: the values on the boundary layer of a box."""
        return (box.x0, box.x1, box.y0, box.y1,
                tuple(int(self.value(s)) for s in boundary_layer(box)))


def bc_from_endpoints(box: Rect, endpoints) -> BoundaryCondition:
    """Boundary condition whose sign changes sit exactly at given dual sites.

    Walks the boundary layer circularly starting with +1 and flips the sign
    after each listed endpoint (a dual site of the boundary ring, identified
    with the gap between two consecutive layer sites).  The endpoint set of
    the result is exactly the input (total sign changes must be even, which
    holds for any set of distinct gap positions of even cardinality).
    """
    from .contour import _gap_endpoint  # local import; pure geometry helper

    endpoints = set(endpoints)
    layer = boundary_layer(box)
    values = {}
    sign = 1
    for i, site in enumerate(layer):
        values[site] = sign
        nxt = layer[(i + 1) % len(layer)]
        if _gap_endpoint(box, site, nxt) in endpoints:
            sign = -sign
    if sign != 1:
        raise ValueError("odd number of endpoints does not close up")
    return BoundaryCondition.explicit(values)


# ---------------------------------------------------------------------------
# configurations and local functions
# ---------------------------------------------------------------------------

class SpinConfiguration:
    """Spins of a box plus its frozen boundary layer.

    Stored as an int8 grid padded by one cell on each side; the border rows
    and columns carry the boundary spins (corner cells are unused).  Index
    ``grid[1 + (y - y0), 1 + (x - x0)]`` holds the spin at ``(x, y)``.
    """

    __slots__ = ("box", "grid", "bc")

    def __init__(self, box: Rect, grid: np.ndarray, bc: BoundaryCondition):
        self.box = box
        self.grid = grid
        self.bc = bc

    # -- constructors -------------------------------------------------------

    @staticmethod
    def _padded(box: Rect, bc: BoundaryCondition) -> np.ndarray:
        g = np.zeros((box.height + 2, box.width + 2), dtype=np.int8)
        xs = np.arange(box.x0, box.x1 + 1)
        ys = np.arange(box.y0, box.y1 + 1)
        g[0, 1:-1] = [bc.value((x, box.y0 - 1)) for x in xs]
        g[-1, 1:-1] = [bc.value((x, box.y1 + 1)) for x in xs]
        g[1:-1, 0] = [bc.value((box.x0 - 1, y)) for y in ys]
        g[1:-1, -1] = [bc.value((box.x1 + 1, y)) for y in ys]
        return g

    @classmethod
    def filled(cls, box: Rect, bc: BoundaryCondition, value: int = 1):
        g = cls._padded(box, bc)
        g[1:-1, 1:-1] = value
        return cls(box, g, bc)

    @classmethod
    def from_interior(cls, box: Rect, interior: np.ndarray, bc: BoundaryCondition):
        g = cls._padded(box, bc)
        g[1:-1, 1:-1] = interior
        return cls(box, g, bc)

    @classmethod
    def from_bits(cls, box: Rect, bits: int, bc: BoundaryCondition):
        """Unpack a canonical-order bitmask (bit k set means spin +1)."""
        idx = np.arange(box.n_sites)
        interior = np.where((bits >> idx) & 1, 1, -1).astype(np.int8)
        return cls.from_interior(box, interior.reshape(box.height, box.width), bc)

    # -- access -------------------------------------------------------------

    @property
    def interior(self) -> np.ndarray:
        return self.grid[1:-1, 1:-1]

    def spin(self, site) -> int:
        x, y = site
        return int(self.grid[y - self.box.y0 + 1, x - self.box.x0 + 1])

    def to_bits(self) -> int:
        flat = (self.interior.reshape(-1) > 0).astype(np.uint8)
        out = 0
        for k in np.nonzero(flat)[0]:
            out |= 1 << int(k)
        return out

    def flipped_global(self):
        return SpinConfiguration(self.box, -self.grid, self.bc.flipped())

    def copy(self):
        return SpinConfiguration(self.box, self.grid.copy(), self.bc)


@dataclass(frozen=True)
class LocalFunction:
    """Function of finitely many spins: a support tuple plus a value table.

    ``table[p]`` is the value when bit i of p is 1 iff the spin at
    ``support[i]`` equals +1.
    """

    support: tuple
    table: tuple
    name: str = ""

    @staticmethod
    def sigma(site, name=None):
        return LocalFunction((site,), (-1.0, 1.0), name or f"sigma{site}")

    @staticmethod
    def product(sites):
        sites = tuple(sites)
        k = len(sites)
        table = tuple(float(np.prod([1 if (p >> i) & 1 else -1 for i in range(k)]))
                      for p in range(1 << k))
        return LocalFunction(sites, table, "prod" + "".join(map(str, sites)))

    @staticmethod
    def column_step(j, name=None):
        """sigma at (0, j) minus sigma at (0, j-1)."""
        table = []
        for p in range(4):
            s0 = 1 if p & 1 else -1
            s1 = 1 if p & 2 else -1
            table.append(float(s1 - s0))
        return LocalFunction(((0, j - 1), (0, j)), tuple(table),
                             name or f"step({j})")

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.table)

    def __call__(self, config: SpinConfiguration) -> float:
        p = 0
        for i, site in enumerate(self.support):
            if config.spin(site) > 0:
                p |= 1 << i
        return self.table[p]

    def flipped(self):
        k = len(self.support)
        mask = (1 << k) - 1
        table = tuple(self.table[mask ^ p] for p in range(1 << k))
        return LocalFunction(self.support, table, self.name + "∘flip")


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def hamiltonian(config: SpinConfiguration) -> float:
    """Energy -sum s_i s_j over all nearest-neighbor bonds meeting the box."""
    g = config.grid.astype(np.int32)
    horiz = (g[1:-1, :-1] * g[1:-1, 1:]).sum()
    vert = (g[:-1, 1:-1] * g[1:, 1:-1]).sum()
    return float(-(horiz + vert))


# ---------------------------------------------------------------------------
# measure oracle
# ---------------------------------------------------------------------------

@dataclass
class MeasureOracle:
    """Exact finite-volume Gibbs expectations for one (box, beta, bc) cell.

    ``engine`` picks enumeration or the transfer matrix; "auto" prefers the
    transfer matrix whenever the column height allows it (it is faster for
    boxes above ~16 spins) and falls back to enumeration.
    """

    box: Rect
    beta: float
    bc: BoundaryCondition
    engine: str = "auto"

    def _resolve(self) -> str:
        if self.engine != "auto":
            return self.engine
        if self.box.height <= exact.TM_HEIGHT_CAP and self.box.n_sites > 16:
            return TRANSFER_MATRIX
        if self.box.n_sites <= exact.ENUM_CAP:
            return ENUMERATION
        return TRANSFER_MATRIX

    def _dos(self, support=()):
        n, bonds, fld, pat = exact.rect_dos_inputs(self.box, self.bc, support)
        return exact.enumerate_dos(n, bonds, fld, pat)

    def log_partition(self) -> float:
        eng = self._resolve()
        if eng == ENUMERATION:
            if self.box.n_sites > exact.ENUM_CAP:
                raise CapacityExceeded(
                    f"{self.box.n_sites} spins exceed enumeration cap")
            e_min, counts = self._dos()
            return exact.dos_log_partition(e_min, counts, self.beta)
        return exact.tm_log_partition(self.box, self.beta, self.bc)

    def expectation(self, f: LocalFunction) -> float:
        for site in f.support:
            if site not in self.box:
                raise SupportOutOfBox(f"{site} outside {self.box}")
        eng = self._resolve()
        if eng == ENUMERATION:
            e_min, counts = self._dos(f.support)
            return float(exact.dos_expectation(e_min, counts, self.beta, f.table))
        return exact.tm_expectation(self.box, self.beta, self.bc, f.support, f.table)


def partition_function(oracle: MeasureOracle) -> float:
    return math.exp(oracle.log_partition())


def log_partition_function(oracle: MeasureOracle) -> float:
    return oracle.log_partition()


def expectation(oracle: MeasureOracle, f: LocalFunction) -> float:
    return oracle.expectation(f)


# ---------------------------------------------------------------------------
# DLR consistency
# ---------------------------------------------------------------------------

def dlr_check(outer: MeasureOracle, inner_box: Rect, f: LocalFunction,
              eta_samples: int = 8, seed: int = 0) -> float:
    """Max discrepancy of the finite-volume DLR identity, computed exactly.

    Two independent routes are compared:

    * the full re-averaging identity: summing the inner-box expectation over
      every configuration of the ring, weighted by the outer measure, must
      reproduce the outer expectation of f;
    * for a seeded sample of ring configurations, the outer measure
      conditioned on the ring must agree with a fresh inner-box oracle whose
      boundary condition reads the ring spins.

    Both hold to rounding when the Hamiltonian bond partition is consistent.
    """
    box = outer.box
    beta = outer.beta
    if not box.strictly_contains_rect(inner_box):
        raise ValueError("inner box must be strictly inside the outer box")
    for site in f.support:
        if site not in inner_box:
            raise SupportOutOfBox(f"{site} outside inner box")

    inner_sites = set(inner_box.sites())
    ring_sites = [s for s in box.sites() if s not in inner_sites]
    n_ring = len(ring_sites)
    if n_ring > exact.ENUM_CAP or inner_box.n_sites > exact.ENUM_CAP:
        raise CapacityExceeded("ring or inner box beyond enumeration capacity")

    # frozen environment of the ring: the outer boundary condition
    env = {s: int(outer.bc.value(s)) for s in boundary_layer(box)}

    def ring_bond(a, b):
        # bonds meeting the ring but not the inner box
        if a in inner_sites or b in inner_sites:
            return False
        return (a in ring_index) or (b in ring_index) or (a in env and b in env)

    ring_index = {s: k for k, s in enumerate(ring_sites)}
    layer_in = boundary_layer(inner_box)
    if any(s not in ring_index for s in layer_in):
        raise ValueError("inner boundary layer must lie inside the outer box")
    n, bonds, fld, index = exact.region_dos_inputs(ring_sites, env, ring_bond)
    pattern_bits = [index[s] for s in layer_in]
    e_min, counts = exact.enumerate_dos(n, bonds, fld, pattern_bits)

    # inner-box quantities per boundary pattern
    npat = 1 << len(layer_in)
    log_zin = np.empty(npat)
    a_over_z = np.empty(npat)
    for pat in range(npat):
        bc_in = BoundaryCondition.explicit(
            {s: (1 if (pat >> i) & 1 else -1) for i, s in enumerate(layer_in)})
        o_in = MeasureOracle(inner_box, beta, bc_in, engine=ENUMERATION)
        log_zin[pat] = o_in.log_partition()
        a_over_z[pat] = o_in.expectation(f)

    rows = counts                         # [energy, pattern]
    nz = rows.sum(axis=1) > 0
    energies = e_min + np.nonzero(nz)[0]
    logw = -beta * energies[:, None] + np.where(rows[nz] > 0, np.log(
        np.where(rows[nz] > 0, rows[nz], 1.0)), -np.inf) + log_zin[None, :]
    m = logw.max()
    w = np.exp(logw - m)
    z_fact = w.sum()
    reavg = (w * a_over_z[None, :]).sum() / z_fact
    direct = outer.expectation(f)
    disc = abs(direct - reavg)

    # seeded conditional spot checks
    rng = np.random.default_rng(seed)
    n_inner = inner_box.n_sites
    inner_list = inner_box.sites()
    for _ in range(eta_samples):
        eta = {s: int(rng.choice((-1, 1))) for s in ring_sites}
        full_env = dict(env)
        full_env.update(eta)
        bc_in = BoundaryCondition.explicit(
            {s: full_env[s] for s in layer_in})
        o_in = MeasureOracle(inner_box, beta, bc_in, engine=ENUMERATION)
        fresh = o_in.expectation(f)
        # conditional from the outer Hamiltonian, summed directly
        logs = []
        vals = []
        for bits in range(1 << n_inner):
            spins = dict(full_env)
            for k, s in enumerate(inner_list):
                spins[s] = 1 if (bits >> k) & 1 else -1
            e = 0
            for (x, y) in box.sites():
                for nb in ((x + 1, y), (x, y + 1)):
                    if nb in spins or nb in inner_sites:
                        e -= spins[(x, y)] * spins[nb]
            logs.append(-beta * e)
            p = 0
            for i, s in enumerate(f.support):
                if spins[s] > 0:
                    p |= 1 << i
            vals.append(f.table[p])
        logs = np.array(logs)
        wts = np.exp(logs - logs.max())
        cond = float((wts * np.array(vals)).sum() / wts.sum())
        disc = max(disc, abs(cond - fresh))
    return disc


# ---------------------------------------------------------------------------
# strips and pure-phase references
# ---------------------------------------------------------------------------

def strip_rect(width: int, length: int) -> Rect:
    """Rectangle with `length` sites along x and `width` along y, centered."""
    y0 = -((width - 1) // 2)
    x0 = -((length - 1) // 2)
    return Rect(x0, x0 + length - 1, y0, y0 + width - 1)


def strip_partition(width: int, length: int, beta: float,
                    bc: BoundaryCondition) -> float:
    """log Z of a width x length strip via the transfer matrix."""
    rect = strip_rect(width, length)
    return exact.tm_log_partition(rect, beta, bc)


def pure_phase_reference(beta: float, f: LocalFunction, n_max: int = 9,
                         tol: float = 5e-4, mc_n: int = 24,
                         mc_sweeps: int = 60_000, seed: int = 20_26):
    """Estimate the plus-phase expectation of f with an error bar.

    Exact plus-boundary expectations on growing boxes converge
    exponentially; we stop when increments fall below ``tol``.  If the
    largest exact box is not converged, a plus-boundary Monte Carlo run on a
    bigger box takes over and the error bar becomes statistical.
    """
    radius = max(abs(c) for site in f.support for c in site) if f.support else 0
    sizes = [n for n in range(max(2, radius + 1), n_max + 1)]
    vals = []
    for n in sizes:
        o = MeasureOracle(Box(n), beta, BoundaryCondition.plus())
        vals.append(o.expectation(f))
    incs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    if len(incs) >= 2 and incs[-1] <= tol:
        return vals[-1], max(incs[-1], 1e-15)
    if len(incs) >= 2 and incs[-1] > incs[0]:
        raise NotConverged("plus-phase increments are not shrinking")
    from . import sampler  # deferred: sampler builds on this module

    spec = sampler.ChainSpec(Box(mc_n), beta, BoundaryCondition.plus(),
                             seed=seed, sweeps=mc_sweeps)
    stats = sampler.run_chain(spec, [f])[f.name]
    return stats.mean, max(stats.std_error, incs[-1] if incs else 0.0)


def minus_phase_reference(beta: float, f: LocalFunction, **kw):
    """Minus-phase expectation by global flip covariance."""
    v, e = pure_phase_reference(beta, f.flipped(), **kw)
    return v, e
