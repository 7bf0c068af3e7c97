"""Codes for compound cq-channels: random codebooks, square-root-measurement
decoders built from a hypothesis test, exact error evaluation and expurgation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .channels import CqChannel, InputDistribution
from .compound import CompoundSet
from .hypotest import BoundViolation, TestResult, TestStates, build_test_states, universal_test
from .operators import PSD_TOL, gen_inverse_sqrt, hermitian

BLOCK_TOL = 1e-8


@dataclass(frozen=True)
class Povm:
    """Measurement ``(D_1, ..., D_N)`` with ``sum D_i <= 1``; the remainder is ``D_0``."""

    elements: tuple

    def __post_init__(self):
        elems = tuple(hermitian(e, tol=1e-8) for e in self.elements)
        if not elems:
            raise ValueError("a POVM needs at least one element")
        dim = elems[0].shape[0]
        if any(e.shape != (dim, dim) for e in elems):
            raise ValueError("POVM elements must share one dimension")
        for i, e in enumerate(elems):
            if np.linalg.eigvalsh(e)[0] < -PSD_TOL:
                raise ValueError(f"POVM element {i} is not positive semidefinite")
        if np.linalg.eigvalsh(np.eye(dim) - sum(elems))[0] < -PSD_TOL:
            raise ValueError("POVM elements sum to more than the identity")
        object.__setattr__(self, "elements", elems)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def remainder(self) -> np.ndarray:
        return np.eye(self.dim) - sum(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.elements[i]


@dataclass(frozen=True)
class Code:
    blocklength: int
    codewords: tuple
    decoder: Povm

    def __post_init__(self):
        words = tuple(tuple(int(x) for x in w) for w in self.codewords)
        if len(words) != len(self.decoder):
            raise ValueError("one decoding element per codeword required")
        if any(len(w) != self.blocklength for w in words):
            raise ValueError("codeword length differs from blocklength")
        object.__setattr__(self, "codewords", words)

    @property
    def size(self) -> int:
        return len(self.codewords)

    def success(self, states: Sequence[np.ndarray]) -> np.ndarray:
        """Per-message success ``tr(states[m] D_m)`` for given received states."""
        return np.array([_tr_prod(s, d) for s, d in zip(states, self.decoder.elements)])


def _tr_prod(a: np.ndarray, b: np.ndarray) -> float:
    # tr(a b) without forming the product
    return float(np.real(np.sum(a * b.T)))


@dataclass(frozen=True)
class CodeEvaluation:
    per_channel_avg_error: np.ndarray
    per_channel_max_error: np.ndarray
    worst_avg: float
    worst_max: float
    # error of message m on channel t, shape (T, M)
    per_message_error: np.ndarray


def message_errors(code: Code, channel: CqChannel) -> np.ndarray:
    cache: dict = {}
    errs = []
    for word, d in zip(code.codewords, code.decoder.elements):
        if word not in cache:
            cache[word] = channel.word_output(word)
        errs.append(1.0 - _tr_prod(cache[word], d))
    return np.clip(np.array(errs), 0.0, 1.0)


def eval_code(code: Code, channels) -> CodeEvaluation:
    """Exact average and maximal error of ``code`` on every member of the family."""
    chans = list(channels)
    for w in chans:
        if w.dim ** code.blocklength != code.decoder.dim:
            raise ValueError("decoder dimension does not match channel output")
    errs = np.array([message_errors(code, w) for w in chans])
    avg = errs.mean(axis=1)
    mx = errs.max(axis=1)
    return CodeEvaluation(avg, mx, float(avg.max()), float(mx.max()), errs)


def word_index(word: Sequence[int], n_inputs: int) -> int:
    idx = 0
    for x in word:
        idx = idx * n_inputs + x
    return idx


def index_word(idx: int, n_inputs: int, l: int) -> tuple:
    word = []
    for _ in range(l):
        idx, x = divmod(idx, n_inputs)
        word.append(x)
    return tuple(reversed(word))


def extract_conditional_projectors(q_l, n_inputs: int, l: int, tol: float = BLOCK_TOL) -> dict:
    """Split a classically block-diagonal projector into ``{word: q_word}``."""
    q_l = np.asarray(q_l)
    n = n_inputs ** l
    big = q_l.shape[0]
    if big % n:
        raise ValueError("projector dimension is not a multiple of |X|^l")
    dq = big // n
    t = q_l.reshape(n, dq, n, dq)
    diag = np.einsum("xixj->xij", t)
    off = t.copy()
    for x in range(n):
        off[x, :, x, :] = 0.0
    if np.linalg.norm(off) > tol:
        raise ValueError(f"off-block mass {np.linalg.norm(off):.3e} exceeds {tol}")
    blocks = {}
    for x in range(n):
        b = hermitian(diag[x], tol=1e-6)
        if np.max(np.abs(b @ b - b)) > tol:
            raise ValueError(f"block of word {index_word(x, n_inputs, l)} is not a projection")
        blocks[index_word(x, n_inputs, l)] = _snap_projection(b)
    return blocks


def _snap_projection(b: np.ndarray) -> np.ndarray:
    # round eigenvalues to {0, 1}; rounding noise would be amplified by the inverse square root
    evals, vecs = np.linalg.eigh(b)
    v = vecs[:, evals > 0.5]
    return v @ v.conj().T


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for the substream ``(seed, stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def sample_codewords(p: InputDistribution, l: int, m: int, seed: int, stream: int = 0) -> list:
    """``m`` words drawn i.i.d. from ``p^{(x) l}`` by inverse-CDF sampling."""
    if m < 1:
        raise ValueError("need at least one codeword")
    rng = rng_stream(seed, stream)
    cdf = np.cumsum(p.probs)
    cdf[-1] = 1.0
    u = rng.random((m, l))
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, len(p) - 1)
    return [tuple(int(x) for x in row) for row in idx]


def build_srm_decoder(blocks: Sequence[np.ndarray]) -> Povm:
    """``D_m = S^{-1/2} q_m S^{-1/2}`` with ``S = sum_n q_n`` (generalized inverse)."""
    total = sum(blocks)
    s = gen_inverse_sqrt(total)
    return Povm(tuple(s @ q @ s for q in blocks))


def hayashi_nagaoka_slack(a, b) -> float:
    """Smallest eigenvalue of ``2(1 - a) + 4b - (1 - (a+b)^{-1/2} a (a+b)^{-1/2})``."""
    a, b = hermitian(a), hermitian(b)
    ea = np.linalg.eigvalsh(a)
    if ea[0] < -PSD_TOL or ea[-1] > 1 + PSD_TOL:
        raise ValueError("a must satisfy 0 <= a <= 1")
    if np.linalg.eigvalsh(b)[0] < -PSD_TOL:
        raise ValueError("b must be positive semidefinite")
    eye = np.eye(len(a))
    s = gen_inverse_sqrt(a + b)
    lhs = eye - s @ a @ s
    rhs = 2 * (eye - a) + 4 * b
    return float(np.linalg.eigvalsh(hermitian(rhs - lhs, tol=1e-6))[0])


class EmptySubcode(ValueError):
    pass


def subcode(code: Code, messages: Sequence[int]) -> Code:
    """Keep the listed messages and their decoding elements; the rest joins ``D_0``."""
    return Code(
        code.blocklength,
        tuple(code.codewords[i] for i in messages),
        Povm(tuple(code.decoder[i] for i in messages)),
    )


def expurgation_size(m: int, epsilon: float) -> int:
    return min(m, math.floor(epsilon / (1.0 - epsilon) * m + 1e-12))


def expurgate(code: Code, evaluation: CodeEvaluation, epsilon: float) -> Code:
    """Subcode of ``floor(eps/(1-eps) M)`` messages with maximal error at most ``|T|(avg + eps)``.

    Messages are taken in ascending order of their worst error over the
    family. The bound is guaranteed when ``avg + 2 eps <= 1``; a violation
    raises :class:`BoundViolation`.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    size = expurgation_size(code.size, epsilon)
    if size == 0:
        raise EmptySubcode(f"floor(eps/(1-eps) * {code.size}) = 0")
    worst = evaluation.per_message_error.max(axis=0)
    chosen = sorted(np.argsort(worst, kind="stable")[:size].tolist())
    n_channels = evaluation.per_message_error.shape[0]
    bound = n_channels * (evaluation.worst_avg + epsilon)
    if worst[chosen].max() > bound + 1e-9:
        raise BoundViolation(f"subcode maximal error {worst[chosen].max():.6g} exceeds |T|(avg+eps) = {bound:.6g}")
    return subcode(code, chosen)


def code_size(a: float, eta: float, gamma: float, l: int) -> int:
    """``floor(2^{l(a - eta - gamma)})``, at least 1."""
    return max(1, math.floor(2.0 ** (l * (a - eta - gamma)) + 1e-12))


@dataclass(frozen=True)
class PipelineResult:
    code: Code
    states: TestStates
    test: TestResult
    rate: float
    evaluation: CodeEvaluation
    # |T| (2 lambda + 4 2^{-l gamma})
    error_bound: float


def compound_code(
    cset: CompoundSet,
    p: InputDistribution,
    l: int,
    eta: float,
    gamma: float,
    epsilon: float | None = None,
    seed: int = 0,
    states: TestStates | None = None,
) -> PipelineResult:
    """Hypothesis test -> random codebook -> square-root-measurement decoder -> exact evaluation."""
    if not isinstance(cset, CompoundSet):
        cset = CompoundSet(tuple(cset))
    states = build_test_states(cset, p, l) if states is None else states
    test = universal_test(states, eta, epsilon)
    blocks = extract_conditional_projectors(test.projector, cset.n_inputs, l)
    m = code_size(states.a, eta, gamma, l)
    words = sample_codewords(p, l, m, seed, stream=l)
    code = Code(l, tuple(words), build_srm_decoder([blocks[w] for w in words]))
    evaluation = eval_code(code, cset)
    bound = len(cset) * (2 * test.alpha_error + 4 * 2.0 ** (-l * gamma))
    return PipelineResult(code, states, test, states.a - eta - gamma, evaluation, bound)


def average_channel_output(cset: CompoundSet, word: Sequence[int]) -> np.ndarray:
    return sum(w.word_output(word) for w in cset) / len(cset)


def expected_test_terms(states: TestStates, cset: CompoundSet, blocks: Mapping) -> tuple[float, float]:
    """Codebook averages ``E tr(avg(U)(1 - q_U))`` and ``E tr(avg(U) q_V)`` for independent ``U, V``."""
    p, l = states.p, states.l
    words = list(blocks)
    probs = np.array([p.word_probability(w) for w in words])
    outs = [average_channel_output(cset, w) for w in words]
    dim = outs[0].shape[0]
    miss = sum(pw * _tr_prod(o, np.eye(dim) - blocks[w]) for pw, o, w in zip(probs, outs, words))
    cross = sum(
        pu * pv * _tr_prod(ou, blocks[v])
        for pu, ou in zip(probs, outs)
        for pv, v in zip(probs, words)
    )
    return float(miss), float(cross)


def basis_measurement_code(codewords: Sequence[Sequence[int]], decode, dim: int) -> Code:
    """Code whose decoder measures each letter in the computational basis.

    ``decode`` maps an outcome tuple to a message index, or to ``None`` for
    the remainder element.
    """
    words = [tuple(w) for w in codewords]
    l = len(words[0])
    elems = [np.zeros((dim**l, dim**l), dtype=complex) for _ in words]
    for idx in range(dim**l):
        m = decode(index_word(idx, dim, l))
        if m is not None:
            elems[m][idx, idx] = 1.0
    return Code(l, tuple(words), Povm(tuple(elems)))


def first_letter_code(n_inputs: int, l: int, dim: int) -> Code:
    """Constant words ``x x ... x`` decoded from the first letter alone; not permutation invariant."""
    if dim < n_inputs:
        raise ValueError("needs one basis state per input letter")
    words = [(x,) * l for x in range(n_inputs)]
    return basis_measurement_code(words, lambda y: y[0] if y[0] < n_inputs else None, dim)


def all_words_code(n_inputs: int, l: int, dim: int) -> Code:
    """Every word is a message, decoded letter by letter in the computational basis."""
    if dim < n_inputs:
        raise ValueError("needs one basis state per input letter")
    words = [index_word(i, n_inputs, l) for i in range(n_inputs**l)]
    lookup = {w: i for i, w in enumerate(words)}
    return basis_measurement_code(words, lookup.get, dim)
