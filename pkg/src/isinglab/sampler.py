"""Markov-chain Monte Carlo for boxes up to ~n=128 with frozen boundaries.

Single-spin heat-bath (Glauber) updates in checkerboard order: all sites of
even parity, then all odd ones.  Each update resamples the spin from the
exact conditional given its four current neighbors, so the dynamics is
reversible for the target measure regardless of the frozen boundary.

Randomness is counter-based: the draw for (replica, sweep, phase, site) is a
pure function of those labels and the chain seed, so runs are bit-for-bit
reproducible and independent of scheduling or replica count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gibbs import BoundaryCondition, LocalFunction, SpinConfiguration
from .lattice import Rect
from .rng import derive_key, key_from_seed, uniforms


@dataclass(frozen=True)
class ChainSpec:
    """Parameters of one reproducible chain."""

    box: Rect
    beta: float
    bc: BoundaryCondition
    seed: int
    sweeps: int = 10_000
    burn_in_sweeps: int | None = None   # None: 20n for interface bcs, 2n else
    thin: int = 1

    def __post_init__(self):
        if self.sweeps < 1 or self.thin < 1:
            raise ValueError("sweeps and thin must be >= 1")

    def resolved_burn_in(self) -> int:
        if self.burn_in_sweeps is not None:
            return self.burn_in_sweeps
        n = max(self.box.width, self.box.height) // 2
        layer_vals = [self.bc.value(s) for s in _layer_sites(self.box)]
        uniform = all(v == layer_vals[0] for v in layer_vals)
        return (2 if uniform else 20) * max(n, 1)


@dataclass
class SampleStats:
    """Batch-means summary of one observable."""

    mean: float
    std_error: float
    n_batches: int
    autocorr_estimate: float
    n_samples: int = 0


def _layer_sites(box: Rect):
    from .lattice import boundary_layer

    return boundary_layer(box)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

class _SweepKernel:
    """Precomputed geometry for vectorized checkerboard sweeps on one box."""

    def __init__(self, box: Rect, beta: float):
        self.box = box
        self.beta = beta
        h, w = box.height, box.width
        ys, xs = np.mgrid[box.y0:box.y1 + 1, box.x0:box.x1 + 1]
        parity = ((xs + ys) & 1).astype(np.uint8)
        self.masks = [parity == 0, parity == 1]
        flat = np.arange(h * w, dtype=np.uint64).reshape(h, w)
        self.site_ctr = [flat[m] for m in self.masks]
        # heat-bath acceptance table: P(+1 | neighbor sum h) for h in -4..4
        hs = np.arange(-4, 5)
        self.p_plus = 1.0 / (1.0 + np.exp(-2.0 * beta * hs))

    def sweep(self, grids: np.ndarray, keys: np.ndarray, sweep_index: int):
        """One in-place checkerboard sweep over a (R, H+2, W+2) stack."""
        for phase in (0, 1):
            mask = self.masks[phase]
            h = (grids[:, :-2, 1:-1].astype(np.int16)
                 + grids[:, 2:, 1:-1]
                 + grids[:, 1:-1, :-2]
                 + grids[:, 1:-1, 2:])
            hsel = h[:, mask]
            p = self.p_plus[hsel + 4]
            ctr = (np.uint64(2 * sweep_index + phase) << np.uint64(32)) \
                | self.site_ctr[phase]
            u = uniforms_by_key(keys, ctr)
            newspins = np.where(u < p, 1, -1).astype(np.int8)
            inner = grids[:, 1:-1, 1:-1]
            inner[:, mask] = newspins


def uniforms_by_key(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniforms of shape (len(keys), len(counters))."""
    from .rng import GOLDEN, mix64

    with np.errstate(over="ignore"):
        z = mix64(counters[None, :] * GOLDEN + keys[:, None])
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def glauber_sweep(config: SpinConfiguration, beta: float, seed: int,
                  sweep_index: int = 0) -> SpinConfiguration:
    """One checkerboard heat-bath sweep; boundary spins never change."""
    kernel = _SweepKernel(config.box, beta)
    grids = config.grid[None, :, :].copy()
    keys = np.array([key_from_seed(seed)], dtype=np.uint64)
    kernel.sweep(grids, keys, sweep_index)
    return SpinConfiguration(config.box, grids[0], config.bc)


def _initial_interior(box: Rect, bc: BoundaryCondition, key) -> np.ndarray:
    if bc.is_sitewise:
        vals = np.array([[bc.value((x, y))
                          for x in range(box.x0, box.x1 + 1)]
                         for y in range(box.y0, box.y1 + 1)], dtype=np.int8)
        return vals
    ctr = np.arange(box.n_sites, dtype=np.uint64) + (np.uint64(1) << np.uint64(63))
    u = uniforms(key, ctr)
    return np.where(u < 0.5, 1, -1).astype(np.int8).reshape(box.height, box.width)


def _batch_stats(series: np.ndarray, thin: int) -> SampleStats:
    n = len(series)
    nb = min(32, max(8, n // 32))
    nb = min(nb, n)
    usable = (n // nb) * nb
    batches = series[:usable].reshape(nb, -1).mean(axis=1)
    mean = float(batches.mean())
    if nb > 1:
        se = float(batches.std(ddof=1) / math.sqrt(nb))
    else:
        se = float("nan")
    var1 = float(series.var(ddof=1)) if n > 1 else 0.0
    blen = usable // nb
    if var1 > 0 and nb > 1:
        tau = max(1.0, blen * float(batches.var(ddof=1)) / var1) * thin
    else:
        tau = float(thin)
    return SampleStats(mean, se, nb, tau, n)


def _pool(per_replica: list[SampleStats], thin: int) -> SampleStats:
    if len(per_replica) == 1:
        return per_replica[0]
    means = np.array([s.mean for s in per_replica])
    ses = np.array([s.std_error for s in per_replica])
    nb = sum(s.n_batches for s in per_replica)
    mean = float(means.mean())
    # replicas are independent; combine their batch-mean spreads
    se = float(np.sqrt((ses ** 2).sum()) / len(per_replica))
    tau = float(np.mean([s.autocorr_estimate for s in per_replica]))
    return SampleStats(mean, se, nb, tau, sum(s.n_samples for s in per_replica))


def _observable_name(obs, i):
    name = getattr(obs, "name", "") or f"obs{i}"
    return name


def parallel_chains(spec: ChainSpec, replicas: int = 1, observables=()):
    """Run replicas of one chain spec and pool their statistics.

    Replica r draws from the sub-stream ``derive_key(key_from_seed(seed), r)``;
    results are a deterministic function of (seed, replicas, observables).
    Returns ``{name: SampleStats}``.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    observables = list(observables)
    box, beta, bc = spec.box, spec.beta, spec.bc
    kernel = _SweepKernel(box, beta)
    master = key_from_seed(spec.seed)
    keys = np.array([derive_key(master, r) for r in range(replicas)],
                    dtype=np.uint64)

    grids = np.empty((replicas, box.height + 2, box.width + 2), dtype=np.int8)
    for r in range(replicas):
        base = SpinConfiguration.from_interior(
            box, _initial_interior(box, bc, keys[r]), bc)
        grids[r] = base.grid

    burn = spec.resolved_burn_in()
    series = {r: {i: [] for i in range(len(observables))}
              for r in range(replicas)}
    total = burn + spec.sweeps
    for sweep in range(total):
        kernel.sweep(grids, keys, sweep)
        if sweep >= burn and (sweep - burn) % spec.thin == 0:
            for r in range(replicas):
                cfg = SpinConfiguration(box, grids[r], bc)
                for i, obs in enumerate(observables):
                    series[r][i].append(float(obs(cfg)))

    out = {}
    for i, obs in enumerate(observables):
        per = [_batch_stats(np.array(series[r][i]), spec.thin)
               for r in range(replicas)]
        out[_observable_name(obs, i)] = _pool(per, spec.thin)
    return out


def run_chain(spec: ChainSpec, observables=()):
    """Single-chain version of :func:`parallel_chains`."""
    return parallel_chains(spec, 1, observables)
