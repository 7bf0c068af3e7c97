"""Arbitrarily varying cq-channels: worst-case evaluation over state sequences,
robustification by random permutations, random-code reduction, composite codes
and the m-symmetrizability test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import CqChannel, check_compatible, mix_channels
from .coding import Code, Povm, _tr_prod, rng_stream
from .hypotest import BoundViolation, BudgetExceeded
from .operators import inverse_permutation, permute_factors, tensor_all

EXHAUSTIVE_BUDGET = 10**6


@dataclass(frozen=True)
class Avcq:
    """Family ``{A_s}`` indexed by channel states ``s``; realizations are tensor products."""

    channels: tuple
    states: tuple = ()

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise ValueError("an AVcq needs at least one state")
        check_compatible(chans)
        states = tuple(self.states) if self.states else tuple(str(s) for s in range(len(chans)))
        if len(states) != len(chans):
            raise ValueError("one label per channel state required")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "states", states)

    @property
    def n_states(self) -> int:
        return len(self.channels)

    @property
    def n_inputs(self) -> int:
        return self.channels[0].n_inputs

    @property
    def dim(self) -> int:
        return self.channels[0].dim

    @property
    def alphabet(self) -> tuple:
        return self.channels[0].alphabet

    def __getitem__(self, s: int) -> CqChannel:
        return self.channels[s]


def realize(avcq: Avcq, s_seq: Sequence[int], x_seq: Sequence[int]) -> np.ndarray:
    """``A_{s_1}(x_1) (x) ... (x) A_{s_l}(x_l)``."""
    if len(s_seq) != len(x_seq):
        raise ValueError("state and input sequences differ in length")
    return tensor_all([avcq.channels[s].outputs[x] for s, x in zip(s_seq, x_seq)])


@dataclass(frozen=True)
class DiscreteRandomCode:
    """Finitely supported random code: ``atoms[k]`` is used with probability ``probs[k]``."""

    atoms: tuple
    probs: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        probs = np.asarray(self.probs, dtype=float)
        if not atoms or probs.shape != (len(atoms),):
            raise ValueError("one probability per atom required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to one")
        shape = (atoms[0].blocklength, atoms[0].size)
        if any((c.blocklength, c.size) != shape for c in atoms):
            raise ValueError("all atoms must share blocklength and size")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def deterministic(cls, code: Code) -> "DiscreteRandomCode":
        return cls((code,), np.ones(1))

    @classmethod
    def uniform(cls, codes: Sequence[Code]) -> "DiscreteRandomCode":
        return cls(tuple(codes), np.full(len(codes), 1.0 / len(codes)))

    @property
    def blocklength(self) -> int:
        return self.atoms[0].blocklength

    @property
    def size(self) -> int:
        return self.atoms[0].size


def _as_random(code) -> DiscreteRandomCode:
    return code if isinstance(code, DiscreteRandomCode) else DiscreteRandomCode.deterministic(code)


class _Realizer:
    """Caches ``A_{s^l}(x^l)`` across repeated evaluations."""

    def __init__(self, avcq: Avcq):
        self.avcq = avcq
        self._cache: dict = {}

    def __call__(self, s_seq: tuple, x_seq: tuple) -> np.ndarray:
        key = (s_seq, x_seq)
        out = self._cache.get(key)
        if out is None:
            out = realize(self.avcq, s_seq, x_seq)
            self._cache[key] = out
        return out


def sequence_success(code, avcq: Avcq, s_seq: Sequence[int], realizer: _Realizer | None = None) -> float:
    """Average success ``sum_k mu_k (1/M) sum_m tr(A_{s^l}(x_m) D_m)`` at one state sequence."""
    rc = _as_random(code)
    s_seq = tuple(int(s) for s in s_seq)
    if len(s_seq) != rc.blocklength:
        raise ValueError("state sequence length differs from blocklength")
    realizer = realizer or _Realizer(avcq)
    total = 0.0
    for c, mu in zip(rc.atoms, rc.probs):
        if mu == 0:
            continue
        ok = sum(_tr_prod(realizer(s_seq, w), d) for w, d in zip(c.codewords, c.decoder.elements))
        total += mu * ok / c.size
    return float(total)


@dataclass(frozen=True)
class WorstCase:
    min_success: float
    argmin: tuple
    n_evaluated: int
    exhaustive: bool


def all_sequences(n: int, l: int):
    return itertools.product(range(n), repeat=l)


def worst_case_eval(
    code, avcq: Avcq, sampled: bool = False, n_samples: int = 4096, seed: int = 0
) -> WorstCase:
    """Minimum over ``s^l`` of the average success; exact unless ``sampled``."""
    rc = _as_random(code)
    l = rc.blocklength
    n_seq = avcq.n_states**l
    realizer = _Realizer(avcq)
    if not sampled:
        if n_seq > EXHAUSTIVE_BUDGET:
            raise BudgetExceeded(f"|S|^l = {n_seq} exceeds {EXHAUSTIVE_BUDGET}; use sampled mode")
        seqs = all_sequences(avcq.n_states, l)
    else:
        rng = rng_stream(seed, 0)
        seqs = (tuple(int(s) for s in row) for row in rng.integers(0, avcq.n_states, (n_samples, l)))
    best, arg, count = math.inf, None, 0
    for s in seqs:
        val = sequence_success(rc, avcq, s, realizer)
        count += 1
        if val < best - 1e-15:
            best, arg = val, s
    return WorstCase(float(best), arg, count, not sampled)


def types(l: int, n: int) -> list[np.ndarray]:
    """Empirical distributions of length-``l`` sequences over ``n`` letters."""
    out = []
    for counts in itertools.product(range(l + 1), repeat=n):
        if sum(counts) == l:
            out.append(np.array(counts, dtype=float) / l)
    return out


def type_channels(avcq: Avcq, l: int) -> list[CqChannel]:
    return [mix_channels(q, avcq.channels) for q in types(l, avcq.n_states)]


def code_success_on(code: Code, channel: CqChannel) -> float:
    total = 0.0
    for w, d in zip(code.codewords, code.decoder.elements):
        total += _tr_prod(channel.word_output(w), d)
    return total / code.size


def type_success(code: Code, avcq: Avcq) -> tuple[float, np.ndarray]:
    """Worst average success over the i.i.d. channels ``W_q``, ``q`` a type of length ``l``."""
    best, arg = math.inf, None
    for q in types(code.blocklength, avcq.n_states):
        val = code_success_on(code, mix_channels(q, avcq.channels))
        if val < best:
            best, arg = val, q
    return float(best), arg


def permute_code(code: Code, perm: Sequence[int], dim: int) -> Code:
    """Move letter ``i`` of every codeword, and tensor factor ``i`` of every decoding element, to ``perm[i]``."""
    inv = inverse_permutation(perm)
    words = tuple(tuple(w[inv[j]] for j in range(len(w))) for w in code.codewords)
    dec = tuple(permute_factors(d, perm, dim) for d in code.decoder.elements)
    return Code(code.blocklength, words, Povm(dec))


def _same_code(a: Code, b: Code, tol: float = 1e-12) -> bool:
    if a.codewords != b.codewords:
        return False
    return all(np.max(np.abs(x - y)) <= tol for x, y in zip(a.decoder.elements, b.decoder.elements))


class RobustificationPrecondition(ValueError):
    pass


@dataclass(frozen=True)
class RobustificationCheck:
    worst_success: float
    worst_sequence: tuple
    bound: float
    # largest disagreement between evaluating the random code and averaging f over permuted sequences
    route_discrepancy: float
    holds: bool


def robustification_check(code: Code, rc: DiscreteRandomCode, avcq: Avcq, gamma: float) -> RobustificationCheck:
    """Exact check of ``(1/l!) sum_sigma f(sigma s^l) >= 1 - (l+1)^|S| gamma`` for every ``s^l``."""
    l = code.blocklength
    realizer = _Realizer(avcq)
    perms = list(itertools.permutations(range(l)))
    f: dict = {}
    worst, arg, gap = math.inf, None, 0.0
    for s in all_sequences(avcq.n_states, l):
        averaged = 0.0
        for perm in perms:
            t = tuple(s[perm[j]] for j in range(l))
            if t not in f:
                f[t] = sequence_success(code, avcq, t, realizer)
            averaged += f[t]
        averaged /= len(perms)
        direct = sequence_success(rc, avcq, s, realizer)
        gap = max(gap, abs(direct - averaged))
        if averaged < worst:
            worst, arg = averaged, s
    bound = 1.0 - (l + 1) ** avcq.n_states * gamma
    return RobustificationCheck(float(worst), arg, bound, gap, worst >= bound - 1e-9)


def robustify(code: Code, avcq: Avcq, compound_gamma: float | None = None, exact: bool = True) -> DiscreteRandomCode:
    """Uniform random code over all factor permutations of ``code``.

    ``compound_gamma`` must dominate the code's error on every type channel
    ``W_q``; ``None`` uses the measured worst type error. Identical permuted
    codes are merged into one atom.
    """
    l = code.blocklength
    dim = avcq.dim
    worst_type, q = type_success(code, avcq)
    if compound_gamma is None:
        compound_gamma = max(0.0, 1.0 - worst_type)
    elif worst_type < 1.0 - compound_gamma - 1e-12:
        raise RobustificationPrecondition(
            f"success {worst_type:.6g} on type {np.round(q, 6).tolist()} is below 1 - gamma = {1 - compound_gamma:.6g}"
        )
    if math.factorial(l) > EXHAUSTIVE_BUDGET:
        raise BudgetExceeded(f"l! = {math.factorial(l)} exceeds {EXHAUSTIVE_BUDGET}")
    atoms: list[Code] = []
    weights: list[int] = []
    for perm in itertools.permutations(range(l)):
        c = permute_code(code, perm, dim)
        for k, a in enumerate(atoms):
            if _same_code(a, c):
                weights[k] += 1
                break
        else:
            atoms.append(c)
            weights.append(1)
    rc = DiscreteRandomCode(tuple(atoms), np.array(weights, dtype=float) / sum(weights))
    if exact and avcq.n_states**l <= EXHAUSTIVE_BUDGET:
        check = robustification_check(code, rc, avcq, compound_gamma)
        if check.route_discrepancy > 1e-9:
            raise BoundViolation(f"random code and permutation average disagree by {check.route_discrepancy:.3e}")
        if not check.holds:
            raise BoundViolation(
                f"worst success {check.worst_success:.6g} at {check.worst_sequence} below 1 - (l+1)^|S| gamma = {check.bound:.6g}"
            )
    return rc


@dataclass(frozen=True)
class ReductionResult:
    codes: tuple
    worst_success: float
    target: float
    met: bool
    rounds: int
    # 4 eps <= l^-m and 2 log2|S| < K / l^(m+1)
    hypotheses_met: bool


def reduce_random_code(
    rc: DiscreteRandomCode, avcq: Avcq, K: int, seed: int = 0, m: int = 1, retries: int = 20
) -> ReductionResult:
    """Replace ``rc`` by ``K`` sampled atoms whose uniform mixture reaches success ``1 - l^-m``.

    Each round draws a fresh i.i.d. sample from stream ``(seed, round)``; the
    best family is returned with ``met = False`` if no round hits the target.
    """
    if K < 1:
        raise ValueError("K must be positive")
    l = rc.blocklength
    target = 1.0 - float(l) ** (-m)
    eps = 1.0 - worst_case_eval(rc, avcq).min_success
    hyp = 4 * eps <= l ** (-m) and 2 * math.log2(avcq.n_states) < K / l ** (m + 1)
    cdf = np.cumsum(rc.probs)
    cdf[-1] = 1.0
    best = None
    for r in range(retries):
        u = rng_stream(seed, r).random(K)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(rc.atoms) - 1)
        codes = tuple(rc.atoms[i] for i in idx)
        val = worst_case_eval(DiscreteRandomCode.uniform(codes), avcq).min_success
        if best is None or val > best[1]:
            best = (codes, val, r + 1)
        if val >= target - 1e-12:
            return ReductionResult(codes, val, target, True, r + 1, hyp)
    return ReductionResult(best[0], best[1], target, False, retries, hyp)


def compose_cr_code(prefix: Code, bank: Sequence[Code]) -> Code:
    """Code on ``l + m`` letters with messages ``(i, j)``: word ``x_i y_ij``, decoder ``D_i (x) E_ij``."""
    if prefix.size != len(bank):
        raise ValueError(f"prefix has {prefix.size} messages but the bank holds {len(bank)} codes")
    m, size = bank[0].blocklength, bank[0].size
    if any((c.blocklength, c.size) != (m, size) for c in bank):
        raise ValueError("bank codes must share blocklength and size")
    if prefix.decoder.dim ** (1.0 / prefix.blocklength) - bank[0].decoder.dim ** (1.0 / m) > 1e-9:
        raise ValueError("prefix and bank act on different output spaces")
    words, dec = [], []
    for i, (x, d) in enumerate(zip(prefix.codewords, prefix.decoder.elements)):
        for y, e in zip(bank[i].codewords, bank[i].decoder.elements):
            words.append(tuple(x) + tuple(y))
            dec.append(np.kron(d, e))
    return Code(prefix.blocklength + m, tuple(words), Povm(tuple(dec)))


@dataclass(frozen=True)
class CompositeCheck:
    prefix_error: float
    bank_error: float
    composite_success: float
    bound: float
    holds: bool


def composite_check(prefix: Code, bank: Sequence[Code], avcq: Avcq) -> CompositeCheck:
    """Exhaustive check of ``min_s success >= 1 - 2 max(prefix error, bank error)``."""
    composite = compose_cr_code(prefix, bank)
    e_prefix = 1.0 - worst_case_eval(prefix, avcq).min_success
    e_bank = 1.0 - worst_case_eval(DiscreteRandomCode.uniform(bank), avcq).min_success
    success = worst_case_eval(composite, avcq).min_success
    bound = 1.0 - 2.0 * max(e_prefix, e_bank)
    return CompositeCheck(e_prefix, e_bank, success, bound, success >= bound - 1e-9)


def inner_product_bound(a, b) -> float:
    """``mean(a b) - (1 - 2 eps)`` where ``eps`` is the larger of the two mean deficits."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    eps = max(1.0 - a.mean(), 1.0 - b.mean())
    return float(np.mean(a * b) - (1.0 - 2.0 * eps))


# --- m-symmetrizability -------------------------------------------------------------------------


def _simplex_qp(g: np.ndarray, c: np.ndarray) -> np.ndarray:
    """argmin ``p^T g p - 2 c^T p`` over the simplex, by enumerating supports."""
    n = len(c)
    best, best_val = None, math.inf
    for r in range(1, n + 1):
        for supp in itertools.combinations(range(n), r):
            idx = list(supp)
            kkt = np.zeros((r + 1, r + 1))
            kkt[:r, :r] = 2 * g[np.ix_(idx, idx)]
            kkt[:r, r] = 1.0
            kkt[r, :r] = 1.0
            rhs = np.concatenate([2 * c[idx], [1.0]])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            p_s = sol[:r]
            if np.any(p_s < -1e-12) or abs(p_s.sum() - 1.0) > 1e-9:
                continue
            p = np.zeros(n)
            p[idx] = np.clip(p_s, 0.0, None)
            p /= p.sum()
            val = p @ g @ p - 2 * c @ p
            if val < best_val - 1e-15:
                best, best_val = p, val
    return best


def _gram(mats: Sequence[np.ndarray], others: Sequence[np.ndarray] | None = None) -> np.ndarray:
    others = mats if others is None else others
    return np.array([[np.real(np.vdot(a, b)) for b in others] for a in mats])


@dataclass(frozen=True)
class PairWitness:
    p: np.ndarray
    q: np.ndarray
    # Frobenius distance || sum_s p_s A_s(x) - sum_s q_s A_s(x') ||_2
    distance: float


@dataclass(frozen=True)
class SymmetrizabilityCertificate:
    symmetrizable: bool
    witnesses: dict
    feasibility_tol: float

    @property
    def max_distance(self) -> float:
        return max((w.distance for w in self.witnesses.values()), default=0.0)

    def witness(self, x: int, y: int) -> tuple[np.ndarray, np.ndarray]:
        """Distributions ``(p, q)`` pairing input ``x`` with input ``y``."""
        if x == y:
            n = len(next(iter(self.witnesses.values())).p) if self.witnesses else 1
            u = np.full(n, 1.0 / n)
            return u, u
        if (x, y) in self.witnesses:
            w = self.witnesses[(x, y)]
            return w.p, w.q
        w = self.witnesses[(y, x)]
        return w.q, w.p


def closest_hull_points(a: Sequence[np.ndarray], b: Sequence[np.ndarray], max_iter: int = 500) -> PairWitness:
    """Minimize ``||sum p_s a_s - sum q_s b_s||_2`` by exact alternating minimization over each simplex."""
    gaa, gbb, gab = _gram(a), _gram(b), _gram(a, b)
    n = len(a)
    p = np.full(n, 1.0 / n)
    q = np.full(len(b), 1.0 / len(b))

    def dist2(p, q):
        return float(p @ gaa @ p + q @ gbb @ q - 2 * p @ gab @ q)

    cur = dist2(p, q)
    for _ in range(max_iter):
        p = _simplex_qp(gaa, gab @ q)
        q = _simplex_qp(gbb, gab.T @ p)
        new = dist2(p, q)
        if cur - new <= 1e-16:
            cur = new
            break
        cur = new
    diff = sum(pi * ai for pi, ai in zip(p, a)) - sum(qi * bi for qi, bi in zip(q, b))
    return PairWitness(p, q, float(np.linalg.norm(diff)))


def is_m_symmetrizable(avcq: Avcq, feasibility_tol: float = 1e-7) -> SymmetrizabilityCertificate:
    """Whether ``conv{A_s(x)}`` and ``conv{A_s(x')}`` meet for every pair of inputs."""
    witnesses = {}
    for x, y in itertools.combinations(range(avcq.n_inputs), 2):
        a = [ch.outputs[x] for ch in avcq.channels]
        b = [ch.outputs[y] for ch in avcq.channels]
        witnesses[(x, y)] = closest_hull_points(a, b)
    ok = all(w.distance**2 <= feasibility_tol**2 for w in witnesses.values())
    return SymmetrizabilityCertificate(ok, witnesses, feasibility_tol)


class NotSymmetrizable(ValueError):
    pass


def symmetrizable_attack(avcq: Avcq, certificate: SymmetrizabilityCertificate, code: Code, messages=(0, 1)) -> float:
    """Success of the worse of two messages under the jammer built from the witnesses.

    The jammer draws ``s_i`` from ``p(. | a_i, b_i)`` when ``a`` is sent and from
    ``q(. | a_i, b_i)`` when ``b`` is sent; both produce the same averaged
    output, so the two successes sum to at most one.
    """
    if not certificate.symmetrizable:
        raise NotSymmetrizable("certificate does not witness symmetrizability")
    if code.size < 2:
        raise ValueError("attack needs at least two messages")
    i, j = messages
    a, b = code.codewords[i], code.codewords[j]
    l = code.blocklength
    pairs = [certificate.witness(x, y) for x, y in zip(a, b)]
    # product-averaged received states, one per message
    rho_a = tensor_all([sum(p[s] * avcq.channels[s].outputs[x] for s in range(avcq.n_states)) for (p, _), x in zip(pairs, a)])
    rho_b = tensor_all([sum(q[s] * avcq.channels[s].outputs[y] for s in range(avcq.n_states)) for (_, q), y in zip(pairs, b)])
    sa = _tr_prod(rho_a, code.decoder[i])
    sb = _tr_prod(rho_b, code.decoder[j])
    worse = min(sa, sb)
    residual = max((w.distance for w in certificate.witnesses.values()), default=0.0)
    slack = avcq.n_states**l * residual * l
    if worse > 0.5 + slack + 1e-9:
        raise BoundViolation(f"worse message success {worse:.6g} exceeds 1/2 + {slack:.3g}")
    return float(worse)
