"""Zero-error coding at small blocklength and extremality tests for cq and Kraus channels."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import CqChannel
from .hypotest import BudgetExceeded
from .operators import dagger, tensor_all, trace_norm

CONFUSABILITY_TOL = 1e-10
VERTEX_BUDGET = 10**5
PRODUCT_BUDGET = 10**4
RANK_TOL = 1e-9


def confusable(v: CqChannel, x: int, y: int, tol: float = CONFUSABILITY_TOL) -> bool:
    """Outputs overlap: ``tr(V(x) V(y)) > tol``."""
    return overlap(v, x, y) > tol


def overlap(v: CqChannel, x: int, y: int) -> float:
    return float(np.real(np.vdot(v.outputs[x], v.outputs[y])))


@dataclass(frozen=True)
class ConfusabilityGraph:
    vertices: tuple
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("confusability graph has no self-loops")
        object.__setattr__(self, "adjacency", adj)

    def __len__(self) -> int:
        return len(self.vertices)


def letter_confusability(v: CqChannel, tol: float = CONFUSABILITY_TOL) -> np.ndarray:
    """Reflexive per-letter relation: ``x ~ y`` iff ``tr(V(x)V(y)) > tol`` (always true for ``x = y``)."""
    n = v.n_inputs
    rel = np.array([[x == y or confusable(v, x, y, tol) for y in range(n)] for x in range(n)])
    return rel


def confusability_graph(v: CqChannel, l: int, tol: float = CONFUSABILITY_TOL) -> ConfusabilityGraph:
    """Words are adjacent iff they differ and every coordinate pair is confusable."""
    n = v.n_inputs
    if n**l > VERTEX_BUDGET:
        raise BudgetExceeded(f"|X|^l = {n ** l} exceeds {VERTEX_BUDGET}")
    rel = letter_confusability(v, tol)
    adj = np.ones((1, 1), dtype=bool)
    for _ in range(l):
        adj = np.kron(adj, rel).astype(bool)
    np.fill_diagonal(adj, False)
    words = tuple(itertools.product(range(n), repeat=l))
    return ConfusabilityGraph(words, adj)


def max_independent_set(adj: np.ndarray) -> list[int]:
    """Exact maximum independent set by colour-ordered branch and bound on bitsets.

    This is maximum-clique search in the complement graph: candidates are
    greedily partitioned into cliques of ``adj``, and an independent set meets
    each clique at most once, so a vertex whose class number cannot lift the
    current set past the incumbent closes the node.
    """
    adj = np.asarray(adj, dtype=bool)
    n = len(adj)
    full = (1 << n) - 1
    nbr = [sum(1 << int(j) for j in np.nonzero(adj[i])[0]) for i in range(n)]
    # complement neighbourhoods: vertices that may join an independent set with i
    free = [full & ~nbr[i] & ~(1 << i) for i in range(n)]

    # greedy minimum-degree incumbent
    best: list[int] = []
    cand = full
    while cand:
        v = min((i for i in range(n) if cand >> i & 1), key=lambda i: (nbr[i] & cand).bit_count())
        best.append(v)
        cand &= free[v]
    chosen: list[int] = []

    def expand(cand: int):
        nonlocal best
        order = _clique_cover_order(cand, nbr)
        for v, bound in reversed(order):
            if len(chosen) + bound <= len(best):
                return
            chosen.append(v)
            sub = cand & free[v]
            if sub:
                expand(sub)
            elif len(chosen) > len(best):
                best = list(chosen)
            chosen.pop()
            cand &= ~(1 << v)

    if n:
        expand(full)
    return sorted(best)


def _clique_cover_order(cand: int, nbr: list[int]) -> list[tuple[int, int]]:
    """Vertices of ``cand`` with the index of the greedy clique holding them, ascending."""
    order = []
    rest = cand
    k = 0
    while rest:
        k += 1
        clique = rest
        while clique:
            low = clique & -clique
            v = low.bit_length() - 1
            rest &= ~low
            # keep only common neighbours so the class stays a clique
            clique &= nbr[v]
            order.append((v, k))
    return order


def zero_error_size(v: CqChannel, l: int, tol: float = CONFUSABILITY_TOL) -> int:
    """Largest number of words of length ``l`` with pairwise orthogonal outputs."""
    graph = confusability_graph(v, l, tol)
    return len(max_independent_set(graph.adjacency))


def is_extremal_cq(w: CqChannel, tol: float = 1e-9) -> bool:
    """Extremal in the convex set of cq-channels iff every output is pure."""
    for out in w.outputs:
        evals = np.linalg.eigvalsh(out)
        if len(evals) > 1 and evals[-2] > tol:
            return False
    return True


@dataclass(frozen=True)
class KrausChannel:
    """Channel ``rho -> sum_i A_i rho A_i^*``; zero operators are discarded."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = [np.asarray(a, dtype=complex) for a in self.kraus_ops]
        if not ops:
            raise ValueError("need at least one Kraus operator")
        shape = ops[0].shape
        if any(a.shape != shape for a in ops):
            raise ValueError("Kraus operators must share one shape")
        total = sum(dagger(a) @ a for a in ops)
        if np.max(np.abs(total - np.eye(shape[1]))) > 1e-9:
            raise ValueError("Kraus operators are not trace preserving")
        ops = [a for a in ops if np.max(np.abs(a)) > 0]
        object.__setattr__(self, "kraus_ops", tuple(ops))

    @property
    def d_in(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus_ops[0].shape[0]

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(a @ rho @ dagger(a) for a in self.kraus_ops)

    def choi(self) -> np.ndarray:
        """``sum_ij |i><j| (x) N(|i><j|)``, trace ``d_in``."""
        d = self.d_in
        out = np.zeros((d * self.d_out, d * self.d_out), dtype=complex)
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                out += np.kron(e, self(e))
        return out


def damping_channel(x: float) -> KrausChannel:
    """Qubit channel with ``A1 = sqrt(1-x^2)|0><1|`` and ``A2 = |0><0| + x|1><1|``; identity at ``x = 1``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    a1 = np.array([[0.0, np.sqrt(1.0 - x * x)], [0.0, 0.0]])
    a2 = np.array([[1.0, 0.0], [0.0, x]])
    return KrausChannel((a1, a2))


def _numerical_rank(rows: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(rows, compute_uv=False)
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def kraus_products(ch: KrausChannel, l: int) -> list[np.ndarray]:
    """All ``A_{i^l}^* A_{j^l}`` with ``A_{i^l} = A_{i_1} (x) ... (x) A_{i_l}``."""
    k = len(ch.kraus_ops)
    if k ** (2 * l) > PRODUCT_BUDGET:
        raise BudgetExceeded(f"{k ** (2 * l)} products exceed {PRODUCT_BUDGET}")
    blocks = [tensor_all([ch.kraus_ops[i] for i in idx]) for idx in itertools.product(range(k), repeat=l)]
    return [dagger(a) @ b for a in blocks for b in blocks]


def kraus_product_span_dim(ch: KrausChannel, l: int = 1) -> int:
    prods = kraus_products(ch, l)
    return _numerical_rank(np.array([p.reshape(-1) for p in prods]))


def is_extremal_kraus(ch: KrausChannel, tol: float = RANK_TOL) -> bool:
    """Choi's criterion: the products ``A_i^* A_j`` are linearly independent.

    The Kraus set is first reduced to a linearly independent one.
    """
    ops = _independent_kraus(ch, tol)
    prods = [dagger(a) @ b for a in ops for b in ops]
    return _numerical_rank(np.array([p.reshape(-1) for p in prods]), tol) == len(prods)


def _independent_kraus(ch: KrausChannel, tol: float) -> list[np.ndarray]:
    # minimal Kraus set from the Choi matrix eigenvectors; same channel, independent operators
    choi = ch.choi()
    evals, vecs = np.linalg.eigh(choi)
    keep = evals > tol * max(evals[-1], 0.0)
    d_in, d_out = ch.d_in, ch.d_out
    ops = []
    for lam, v in zip(evals[keep], vecs[:, keep].T):
        # choi = sum_ij |i><j| (x) A|i><j|A^*, so v reshaped (d_in, d_out) holds columns of A
        ops.append(np.sqrt(lam) * v.reshape(d_in, d_out).T)
    return ops


def q0_obstruction(ch: KrausChannel, l: int = 1) -> bool:
    """True when the products span the full matrix algebra on the ``l``-fold input space."""
    return kraus_product_span_dim(ch, l) == (ch.d_in**l) ** 2


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Trace-norm distance of normalized Choi states.

    It bounds the diamond distance from below and, times ``d_in``, from above.
    """
    if (a.d_in, a.d_out) != (b.d_in, b.d_out):
        raise ValueError("channels act between different spaces")
    return trace_norm(a.choi() - b.choi()) / a.d_in


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel((np.eye(d),))


def pairwise_overlaps(v: CqChannel, l: int) -> np.ndarray:
    """``tr(V^{(x) l}(a) V^{(x) l}(b))`` for all words, as a product of letter overlaps."""
    n = v.n_inputs
    gram = np.array([[overlap(v, x, y) for y in range(n)] for x in range(n)])
    out = np.ones((1, 1))
    for _ in range(l):
        out = np.kron(out, gram)
    return out


def is_zero_error_code(v: CqChannel, words: Sequence[Sequence[int]], tol: float = CONFUSABILITY_TOL) -> bool:
    rel = letter_confusability(v, tol)
    for a, b in itertools.combinations(words, 2):
        if tuple(a) == tuple(b) or all(rel[x, y] for x, y in zip(a, b)):
            return False
    return True
