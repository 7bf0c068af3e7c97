"""Entropic quantities in bits: von Neumann entropy, relative entropy, Holevo information."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .channels import CqChannel, InputDistribution
from .operators import hermitian, ket, projector, support_projector, tensor, trace_norm

CLAMP_TOL = 1e-9
KERNEL_TOL = 1e-9


class _Divergent:
    """Marker for an infinite relative entropy (support condition violated).

    Deliberately not a float: arithmetic on it fails, so callers must branch.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DIVERGENT"

    def __reduce__(self):
        return (_Divergent, ())


DIVERGENT = _Divergent()


def is_divergent(value) -> bool:
    return value is DIVERGENT


def _entropy_of_spectrum(evals: np.ndarray) -> float:
    evals = np.where((evals < 0) & (evals >= -CLAMP_TOL), 0.0, evals)
    nz = evals[evals > 0]
    return float(-np.sum(nz * np.log2(nz)))


def von_neumann_entropy(rho) -> float:
    return _entropy_of_spectrum(np.linalg.eigvalsh(hermitian(rho)))


def shannon_entropy(probs) -> float:
    return _entropy_of_spectrum(np.asarray(probs, dtype=float))


def _log2_on_support(h: np.ndarray, tol: float) -> np.ndarray:
    evals, vecs = np.linalg.eigh(hermitian(h))
    top = max(evals[-1], 0.0)
    keep = evals > tol * top
    logs = np.zeros_like(evals)
    logs[keep] = np.log2(evals[keep])
    return (vecs * logs) @ vecs.conj().T


def relative_entropy(rho, sigma, tol: float = KERNEL_TOL):
    """``D(rho || sigma)`` in bits, or :data:`DIVERGENT` when ``ker sigma`` is not inside ``ker rho``."""
    rho, sigma = hermitian(rho), hermitian(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("relative_entropy: dimension mismatch")
    outside = np.eye(len(sigma)) - support_projector(sigma, tol)
    if np.real(np.trace(outside @ rho)) > tol:
        return DIVERGENT
    value = -von_neumann_entropy(rho) - np.real(np.trace(rho @ _log2_on_support(sigma, tol)))
    return float(value)


def holevo(p: InputDistribution, w: CqChannel) -> float:
    """``S(sum_x p(x) W(x)) - sum_x p(x) S(W(x))``."""
    _check_alphabet(p, w)
    avg = w.average(p)
    return von_neumann_entropy(avg) - sum(
        px * von_neumann_entropy(wx) for px, wx in zip(p.probs, w.outputs) if px > 0
    )


def holevo_divergence_form(p: InputDistribution, w: CqChannel) -> float:
    """Holevo information as ``sum_x p(x) D(W(x) || avg)``."""
    _check_alphabet(p, w)
    avg = w.average(p)
    total = 0.0
    for px, wx in zip(p.probs, w.outputs):
        if px > 0:
            d = relative_entropy(wx, avg)
            if is_divergent(d):
                raise ArithmeticError("output outside the support of the average state")
            total += px * d
    return total


def classical_state(p: InputDistribution) -> np.ndarray:
    return np.diag(p.probs).astype(complex)


def cq_joint_state(p: InputDistribution, w: CqChannel) -> np.ndarray:
    """Block-diagonal state ``sum_x p(x) |e_x><e_x| (x) W(x)`` on ``C^|X| (x) H``."""
    _check_alphabet(p, w)
    n = len(p)
    return sum(
        p.probs[x] * tensor(projector(ket(x, n)), w.outputs[x]) for x in range(n)
    )


class FannesBound(NamedTuple):
    distance: float
    # None when the distance exceeds 1/e and the inequality does not apply
    bound: float | None


def fannes_bound(rho, sigma) -> FannesBound:
    """Fannes continuity bound ``eps * log2(d / eps)`` with ``eps = ||rho - sigma||_1``."""
    rho, sigma = hermitian(rho), hermitian(sigma)
    eps = trace_norm(rho - sigma)
    if eps > 1.0 / math.e:
        return FannesBound(eps, None)
    if eps == 0.0:
        return FannesBound(0.0, 0.0)
    return FannesBound(eps, eps * math.log2(len(rho) / eps))


def _check_alphabet(p: InputDistribution, w: CqChannel) -> None:
    if len(p) != w.n_inputs:
        raise ValueError("distribution and channel alphabets differ in size")
