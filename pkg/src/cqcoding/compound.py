"""Max-min Holevo information over finite channel families and their convex hulls.

The objective ``p -> min_t chi(p, W_t)`` is concave on the probability simplex.
:func:`compound_capacity` climbs it with a multi-start projected supergradient
method, polishes the incumbent with a pattern search on the simplex, and
certifies the result with an LP upper bound assembled from tangent planes of
the individual (concave) Holevo functions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from .channels import CqChannel, InputDistribution, check_compatible, cq_distance, mix_channels
from .measures import _entropy_of_spectrum

TIE_TOL = 1e-9
DEFAULT_TOL = 1e-4


@dataclass(frozen=True)
class CompoundSet:
    channels: tuple

    def __post_init__(self):
        chans = tuple(self.channels)
        check_compatible(chans)
        object.__setattr__(self, "channels", chans)

    def __len__(self) -> int:
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def __getitem__(self, t: int) -> CqChannel:
        return self.channels[t]

    @property
    def alphabet(self) -> tuple:
        return self.channels[0].alphabet

    @property
    def n_inputs(self) -> int:
        return self.channels[0].n_inputs

    @property
    def dim(self) -> int:
        return self.channels[0].dim


@dataclass(frozen=True)
class CapacityResult:
    value: float
    argmax_p: InputDistribution
    worst_t: int
    iterations: int
    # certified gap: upper_bound - value
    achieved_tol: float
    upper_bound: float
    converged: bool


class HolevoFamily:
    """Vectorized ``chi(p, W_t)`` and its gradient in ``p`` for every channel ``t``."""

    def __init__(self, channels: Sequence[CqChannel]):
        check_compatible(channels)
        self.outputs = np.array([w.outputs for w in channels])  # (T, X, d, d)
        self.output_entropy = np.array(
            [[_entropy_of_spectrum(np.linalg.eigvalsh(o)) for o in w.outputs] for w in channels]
        )

    def values(self, p: np.ndarray) -> np.ndarray:
        avg = np.einsum("x,txij->tij", p, self.outputs)
        evals = np.linalg.eigvalsh(avg)
        s_avg = np.array([_entropy_of_spectrum(e) for e in evals])
        return s_avg - self.output_entropy @ p

    def values_and_gradients(self, p: np.ndarray):
        """Values and gradients; gradients are exact only for ``p`` in the open simplex.

        The constant ``-1/ln 2`` of the true partial derivatives is omitted;
        it is orthogonal to the simplex.
        """
        avg = np.einsum("x,txij->tij", p, self.outputs)
        evals, vecs = np.linalg.eigh(avg)
        evals = np.where((evals < 0) & (evals > -1e-9), 0.0, evals)
        keep = evals > 1e-14 * evals[:, -1:]
        logs = np.where(keep, np.log2(np.where(keep, evals, 1.0)), 0.0)
        s_avg = -np.sum(np.where(keep, evals * logs, 0.0), axis=1)
        log_avg = np.einsum("tik,tk,tjk->tij", vecs, logs, vecs.conj())
        cross = np.einsum("txij,tji->tx", self.outputs, log_avg).real
        values = s_avg - self.output_entropy @ p
        return values, -cross - self.output_entropy


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    n = len(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, n + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class _MaxMinSolver:
    def __init__(self, family: HolevoFamily, n: int):
        self.family = family
        self.n = n
        self.cut_points: list[np.ndarray] = []
        self.cut_values: list[np.ndarray] = []
        self.cut_grads: list[np.ndarray] = []
        self.evaluations = 0

    def objective(self, p: np.ndarray) -> float:
        self.evaluations += 1
        return float(np.min(self.family.values(p)))

    def add_cut(self, p: np.ndarray) -> float:
        # tangent planes are valid global upper bounds only at interior points
        pc = (1.0 - 1e-9) * p + 1e-9 / self.n
        values, grads = self.family.values_and_gradients(pc)
        self.evaluations += 1
        self.cut_points.append(pc)
        self.cut_values.append(values)
        self.cut_grads.append(grads)
        return float(np.min(values))

    def ascend(self, p: np.ndarray, max_iter: int, step0: float, cut_every: int):
        best_p, best_f = p.copy(), -np.inf
        for k in range(max_iter):
            values, grads = self.family.values_and_gradients(p)
            self.evaluations += 1
            f = float(np.min(values))
            if f > best_f:
                best_p, best_f = p.copy(), f
            if k % cut_every == 0:
                self.add_cut(p)
            active = values <= f + TIE_TOL
            g = grads[active].mean(axis=0)
            g = g - g.mean()
            norm = np.linalg.norm(g)
            if norm < 1e-14:
                break
            p = project_simplex(p + (step0 / math.sqrt(k + 1.0)) * g / norm)
        return best_p, best_f

    def polish(self, p: np.ndarray, f: float, h_min: float):
        h = 0.05
        while h >= h_min:
            improved = False
            for i, j in itertools.permutations(range(self.n), 2):
                if p[j] <= 0.0:
                    continue
                step = min(h, p[j])
                cand = p.copy()
                cand[i] += step
                cand[j] -= step
                fc = self.objective(cand)
                if fc > f + 1e-15:
                    p, f, improved = cand, fc, True
            if not improved:
                h /= 2.0
        return p, f

    def upper_bound(self) -> tuple[float, np.ndarray]:
        """Maximize the minimum over all recorded tangent planes on the simplex."""
        n = self.n
        rows, rhs = [], []
        for pc, vals, grads in zip(self.cut_points, self.cut_values, self.cut_grads):
            for v, g in zip(vals, grads):
                # z <= v + g.(p - pc)
                rows.append(np.concatenate([-g, [1.0]]))
                rhs.append(v - g @ pc)
        c = np.zeros(n + 1)
        c[-1] = -1.0
        res = linprog(
            c,
            A_ub=np.array(rows),
            b_ub=np.array(rhs),
            A_eq=np.concatenate([np.ones(n), [0.0]])[None, :],
            b_eq=[1.0],
            bounds=[(0, None)] * n + [(None, None)],
            method="highs",
        )
        if res.status != 0:
            return math.inf, np.full(n, 1.0 / n)
        return float(res.x[-1]), project_simplex(res.x[:n])


def compound_capacity(
    channels,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    n_starts: int = 4,
    max_iter: int = 150,
    cut_rounds: int = 40,
) -> CapacityResult:
    """``max_p min_t chi(p, W_t)`` over a finite family, to additive ``tol`` when certified.

    ``converged`` is False when the LP certificate could not be brought
    within ``tol``; the best point found is still returned.
    """
    cset = channels if isinstance(channels, CompoundSet) else CompoundSet(tuple(channels))
    n = cset.n_inputs
    solver = _MaxMinSolver(HolevoFamily(cset.channels), n)
    rng = np.random.Generator(np.random.PCG64(seed))

    starts = [np.full(n, 1.0 / n)] + [rng.dirichlet(np.ones(n)) for _ in range(n_starts - 1)]
    best_p, best_f = starts[0], -np.inf
    for start in starts:
        p, f = solver.ascend(start, max_iter, step0=0.5, cut_every=10)
        if f > best_f:
            best_p, best_f = p, f

    best_p, best_f = solver.polish(best_p, best_f, h_min=min(tol, 1e-4) * 1e-2)
    solver.add_cut(best_p)
    upper = math.inf
    for _ in range(cut_rounds):
        upper, p_lp = solver.upper_bound()
        if upper - best_f <= tol:
            break
        f_lp = solver.add_cut(p_lp)
        if f_lp > best_f:
            best_p, best_f = solver.polish(p_lp, f_lp, h_min=min(tol, 1e-4) * 1e-2)
            solver.add_cut(best_p)
    if n == 1:
        upper = best_f
    values = solver.family.values(best_p)
    gap = max(upper - best_f, 0.0)
    return CapacityResult(
        value=float(np.min(values)),
        argmax_p=InputDistribution(cset.alphabet, best_p / best_p.sum()),
        worst_t=int(np.argmin(values)),
        iterations=solver.evaluations,
        achieved_tol=gap,
        upper_bound=upper,
        converged=gap <= tol,
    )


def simplex_grid(k: int, resolution: int) -> Iterator[np.ndarray]:
    """All weight vectors on ``k`` points with entries in ``{0, 1/N, ..., 1}``."""
    for bars in itertools.combinations(range(resolution + k - 1), k - 1):
        parts = np.diff(np.concatenate([[-1], bars, [resolution + k - 1]])) - 1
        yield parts / resolution


def hull_grid(generators: Sequence[CqChannel], resolution: int) -> tuple[list[np.ndarray], list[CqChannel]]:
    weights = list(simplex_grid(len(generators), resolution))
    return weights, [mix_channels(q, generators) for q in weights]


def grid_discretization_bound(k: int, resolution: int, dim: int) -> float:
    """Holevo continuity slack for replacing any hull point by its nearest grid point.

    Rounding weights to the grid moves them by at most ``k/N`` in l1 norm, so
    outputs move by at most that much in trace norm; Fannes applied to both
    entropy terms of chi then gives ``2 eps log2(d/eps)``.
    """
    eps = min(k / resolution, 1.0)
    if eps > 1.0 / math.e:
        return 2.0 * math.log2(dim)
    return 2.0 * eps * math.log2(dim / eps)


@dataclass(frozen=True)
class MinimaxResult:
    lhs: float
    rhs: float
    gap: float
    discretization_bound: float
    lhs_result: CapacityResult
    rhs_index: int
    weights: list = field(repr=False)


def minimax_check(generators, grid: int, tol: float = DEFAULT_TOL, seed: int = 0) -> MinimaxResult:
    """Compare ``max_p min_q chi(p, W_q)`` with ``min_q max_p chi(p, W_q)`` over a weight grid."""
    gens = list(generators.channels if isinstance(generators, CompoundSet) else generators)
    weights, mixed = hull_grid(gens, grid)
    lhs = compound_capacity(mixed, tol=tol, seed=seed)
    per_q = [compound_capacity([w], tol=tol, seed=seed, n_starts=2) for w in mixed]
    rhs_vals = [r.value for r in per_q]
    j = int(np.argmin(rhs_vals))
    return MinimaxResult(
        lhs=lhs.value,
        rhs=rhs_vals[j],
        gap=rhs_vals[j] - lhs.value,
        discretization_bound=grid_discretization_bound(len(gens), grid, gens[0].dim),
        lhs_result=lhs,
        rhs_index=j,
        weights=weights,
    )


@dataclass(frozen=True)
class AlphaNet:
    weights: list
    channels: list
    resolution: int
    covering_radius: float
    # log2 of (6/alpha)^(2|X|d^2)
    log2_cardinality_bound: float


def hull_lipschitz(generators: Sequence[CqChannel]) -> float:
    """Constant ``L`` with ``||W_q - W_q'||_cq <= L * ||q - q'||_1`` on the hull.

    For weights summing to zero the difference splits into two PSD parts of
    equal trace ``||q - q'||_1 / 2``, so ``L`` is half the generator diameter.
    """
    diam = max(
        (cq_distance(a, b) for a, b in itertools.combinations(generators, 2)), default=0.0
    )
    return diam / 2.0


def alpha_net_weights(generators: Sequence[CqChannel], alpha: float) -> AlphaNet:
    """Finite set of hull points within cq-distance ``2 * alpha`` of every point of the hull."""
    if not 0.0 < alpha < 1.0 / math.e:
        raise ValueError("alpha must lie in (0, 1/e)")
    gens = list(generators)
    check_compatible(gens)
    k = len(gens)
    lip = hull_lipschitz(gens)
    # nearest grid point is within k/N in l1
    resolution = max(1, math.ceil(k * lip / (2.0 * alpha))) if lip > 0 else 1
    weights, chans = [], []
    for q in simplex_grid(k, resolution):
        w = mix_channels(q, gens)
        if any(cq_distance(w, c) <= 1e-12 for c in chans):
            continue
        weights.append(q)
        chans.append(w)
    n_inputs, d = gens[0].n_inputs, gens[0].dim
    log2_bound = 2 * n_inputs * d * d * math.log2(6.0 / alpha)
    if math.log2(len(weights)) >= log2_bound:
        raise AssertionError("alpha-net larger than (6/alpha)^(2|X|d^2)")
    return AlphaNet(weights, chans, resolution, lip * k / resolution, log2_bound)
