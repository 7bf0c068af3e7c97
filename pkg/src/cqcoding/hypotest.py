"""Universal hypothesis-testing projectors for finite compound cq-channels.

The test discriminates the averaged i.i.d. joint state ``rho_l`` from the
product reference ``tau_l`` on ``(C^|X|)^{(x) l} (x) H^{(x) l}``. The projector is
built by regularizing ``rho_l`` towards ``tau_l``, pinching it onto the
eigenspaces of ``tau_l`` and keeping the nonnegative part of
``pinched - 2^{l(a - delta)} tau_l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import InputDistribution
from .compound import CompoundSet
from .measures import DIVERGENT, classical_state, cq_joint_state, relative_entropy
from .operators import (
    CLUSTER_TOL,
    cluster_eigenvalues,
    dagger,
    hermitian,
    permute_factors,
    spectral_decompose,
    tensor_power,
)

DIM_BUDGET = 4096


class BudgetExceeded(RuntimeError):
    pass


class BoundViolation(AssertionError):
    pass


@dataclass(frozen=True)
class TestStates:
    rho_l: np.ndarray
    tau_l: np.ndarray
    l: int
    a: float
    n_inputs: int
    dim: int
    p: InputDistribution
    n_channels: int
    # (1/|T|) sum_t sigma_t^{(x) l}, the quantum factor of tau_l
    sigma_l: np.ndarray

    __test__ = False


@dataclass(frozen=True)
class TestResult:
    projector: np.ndarray
    alpha_error: float
    beta: float
    beta_exponent_bound: float
    epsilon_used: float
    delta: float

    __test__ = False


def interleaved_to_grouped(l: int) -> list[int]:
    """Factor permutation ``(X_1, H_1, ..., X_l, H_l) -> (X_1..X_l, H_1..H_l)``."""
    perm = [0] * (2 * l)
    for i in range(l):
        perm[2 * i] = i
        perm[2 * i + 1] = l + i
    return perm


def build_test_states(cset: CompoundSet, p: InputDistribution, l: int) -> TestStates:
    n, d = cset.n_inputs, cset.dim
    if (n * d) ** l > DIM_BUDGET:
        raise BudgetExceeded(f"(|X| d)^l = {(n * d) ** l} exceeds {DIM_BUDGET}")
    perm = interleaved_to_grouped(l)
    dims = [n, d] * l
    rho_l = 0
    sigma_l = 0
    divergences = []
    for w in cset:
        rho_t = cq_joint_state(p, w)
        sigma_t = w.average(p)
        rho_l = rho_l + permute_factors(tensor_power(rho_t, l), perm, dims)
        sigma_l = sigma_l + tensor_power(sigma_t, l)
        div = relative_entropy(rho_t, np.kron(classical_state(p), sigma_t))
        if div is DIVERGENT:
            raise ArithmeticError("joint state not supported by the product reference")
        divergences.append(div)
    sigma_l = hermitian(sigma_l / len(cset))
    tau_l = hermitian(np.kron(tensor_power(classical_state(p), l), sigma_l))
    return TestStates(
        rho_l=hermitian(rho_l / len(cset)),
        tau_l=tau_l,
        l=l,
        a=max(min(divergences), 0.0),
        n_inputs=n,
        dim=d,
        p=p,
        n_channels=len(cset),
        sigma_l=sigma_l,
    )


def universal_test(
    states: TestStates, delta: float, epsilon: float | None = None, cluster_tol: float = CLUSTER_TOL
) -> TestResult:
    """Projector ``q`` with ``tr(q tau_l) <= 2^{-l(a - delta)}``, confined to the support of ``tau_l``.

    ``epsilon`` defaults to ``2^{-l}``.
    """
    l = states.l
    epsilon = 2.0 ** (-l) if epsilon is None else epsilon
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    rho, tau = states.rho_l, states.tau_l
    rho_eps = (1.0 - epsilon) * rho + epsilon * tau
    scale = 2.0 ** (l * (states.a - delta))

    dec = spectral_decompose(tau, cluster_tol)
    basis, labels = dec.basis, dec.labels
    rho_b = dagger(basis) @ rho_eps @ basis
    q_b = np.zeros_like(rho_b)
    for c, theta in enumerate(dec.eigenvalues):
        if theta <= cluster_tol:
            continue  # kernel of tau_l lies outside the test
        idx = np.nonzero(labels == c)[0]
        # within an eigenspace of tau_l the operator is pinched(rho) - scale*theta*1
        block = hermitian(rho_b[np.ix_(idx, idx)]) - scale * theta * np.eye(len(idx))
        mu, v = np.linalg.eigh(block)
        mu_tol = cluster_tol * (1.0 + np.max(np.abs(mu)))
        sel = v[:, mu >= -mu_tol]
        q_b[np.ix_(idx, idx)] = sel @ dagger(sel)
    q = hermitian(basis @ q_b @ dagger(basis))

    beta = float(np.real(np.trace(q @ tau)))
    bound = 2.0 ** (-l * (states.a - delta))
    if beta > bound + 1e-9:
        raise BoundViolation(f"tr(q tau_l) = {beta:.6g} exceeds 2^(-l(a-delta)) = {bound:.6g}")
    alpha = float(np.real(np.trace(rho)) - np.real(np.trace(q @ rho)))
    return TestResult(q, alpha, beta, bound, epsilon, delta)


def threshold_operator(states: TestStates, delta: float, epsilon: float, cluster_tol: float = CLUSTER_TOL) -> np.ndarray:
    """``pinch(rho_eps onto eigenspaces of tau_l) - 2^{l(a - delta)} tau_l``."""
    rho_eps = (1.0 - epsilon) * states.rho_l + epsilon * states.tau_l
    dec = spectral_decompose(states.tau_l, cluster_tol)
    pinched = 0
    for theta, e in zip(dec.eigenvalues, dec.projectors):
        if theta > cluster_tol:
            pinched = pinched + e @ rho_eps @ e
    return hermitian(pinched - 2.0 ** (states.l * (states.a - delta)) * states.tau_l)


class NotPermutationInvariant(ValueError):
    pass


def spectrum_count(y, l: int, d: int, cluster_tol: float = CLUSTER_TOL, check_tol: float = 1e-8) -> int:
    """Number of distinct eigenvalues of a permutation-invariant operator on ``(C^d)^{(x) l}``.

    Invariance is checked against the adjacent transpositions, which generate
    the symmetric group. The count is asserted against ``(l + 1)^(d^2)``.
    """
    y = hermitian(y)
    scale = 1.0 + np.max(np.abs(y))
    for i in range(l - 1):
        perm = list(range(l))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        if np.max(np.abs(permute_factors(y, perm, d) - y)) > check_tol * scale:
            raise NotPermutationInvariant(f"operator changes under transposition ({i} {i + 1})")
    evals = np.linalg.eigvalsh(y)
    count = int(cluster_eigenvalues(evals, cluster_tol * scale)[-1] + 1)
    if count > (l + 1) ** (d * d):
        raise BoundViolation(f"{count} distinct eigenvalues exceed (l+1)^(d^2) = {(l + 1) ** (d * d)}")
    return count


def pinching_inequality_check(chi, projections: Sequence[np.ndarray], tol: float = 1e-8) -> float:
    """Smallest eigenvalue of ``K sum_k P_k chi P_k - chi`` for a resolution of identity ``{P_k}``."""
    chi = hermitian(chi)
    projs = [hermitian(pk) for pk in projections]
    dim = chi.shape[0]
    total = sum(projs)
    if np.max(np.abs(total - np.eye(dim))) > tol:
        raise ValueError("projections do not sum to the identity")
    for i, pi in enumerate(projs):
        if np.max(np.abs(pi @ pi - pi)) > tol:
            raise ValueError(f"element {i} is not a projection")
    k = len(projs)
    slack = k * sum(pk @ chi @ pk for pk in projs) - chi
    return float(np.linalg.eigvalsh(hermitian(slack, tol=1e-6))[0])


def default_epsilon(l: int) -> float:
    return 2.0 ** (-l)
