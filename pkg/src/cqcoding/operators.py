"""Dense linear algebra for Hermitian operators on small tensor-product spaces.

Operators are plain complex ``numpy`` arrays. Functions that return Hermitian
operators always return the symmetrized matrix ``(M + M*)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
CLUSTER_TOL = 1e-8
PINV_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class EigensolverError(RuntimeError):
    pass


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``m`` as Hermitian and return its symmetrized copy.

    Raises:
        NotHermitianError: if ``max|M - M*| > tol * (1 + max|M|)`` or ``m``
            is not a finite square matrix.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotHermitianError("matrix has non-finite entries")
    scale = 1.0 + (np.max(np.abs(m)) if m.size else 0.0)
    if m.size and np.max(np.abs(m - dagger(m))) > tol * scale:
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + dagger(m))


def density_matrix(m, tol: float = PSD_TOL) -> np.ndarray:
    """Validate ``m`` as a state (PSD, unit trace) and return it symmetrized."""
    h = hermitian(m)
    if abs(np.trace(h).real - 1.0) > tol:
        raise ValueError(f"trace {np.trace(h).real:.12g} differs from 1")
    if np.linalg.eigvalsh(h)[0] < -tol:
        raise NotPSDError("state has a negative eigenvalue")
    return h


def is_psd(m, tol: float = PSD_TOL) -> bool:
    return bool(np.linalg.eigvalsh(hermitian(m))[0] >= -tol)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def tensor(a, b) -> np.ndarray:
    """Kronecker product; entry ``(i*p + k, j*q + m)`` equals ``a[i, j] * b[k, m]``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def tensor_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    if len(mats) == 0:
        return np.ones((1, 1), dtype=complex)
    return reduce(tensor, mats)


def tensor_power(a, n: int) -> np.ndarray:
    return tensor_all([a] * n)


def trace_norm(m) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(m), compute_uv=False)))


def _eigh(h: np.ndarray):
    try:
        return np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigendecomposition failed: {exc}") from exc


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct (clustered) eigenvalues, ascending, with their eigenprojections."""

    eigenvalues: np.ndarray
    projectors: tuple
    # columns are an orthonormal eigenbasis; labels[i] is the cluster of column i
    basis: np.ndarray
    labels: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))

    def __len__(self) -> int:
        return len(self.eigenvalues)


def cluster_eigenvalues(evals: np.ndarray, gap: float) -> np.ndarray:
    """Label sorted eigenvalues so that consecutive values closer than ``gap`` share a label."""
    labels = np.zeros(len(evals), dtype=int)
    for i in range(1, len(evals)):
        labels[i] = labels[i - 1] + (evals[i] - evals[i - 1] >= gap)
    return labels


def spectral_decompose(h, cluster_tol: float = CLUSTER_TOL) -> SpectralDecomposition:
    """Spectral decomposition with eigenvalues merged when their gap is below
    ``cluster_tol * (1 + ||h||)``.

    Each cluster is represented by the mean of its member eigenvalues.
    """
    h = hermitian(h)
    evals, vecs = _eigh(h)
    norm = np.max(np.abs(evals)) if len(evals) else 0.0
    labels = cluster_eigenvalues(evals, cluster_tol * (1.0 + norm))
    values, projs = [], []
    for c in range(labels[-1] + 1 if len(labels) else 0):
        cols = vecs[:, labels == c]
        values.append(float(np.mean(evals[labels == c])))
        projs.append(hermitian(cols @ dagger(cols)))
    return SpectralDecomposition(np.array(values), tuple(projs), vecs, labels)


def pinch(x, reference, cluster_tol: float = CLUSTER_TOL) -> np.ndarray:
    """Sum of ``E x E`` over the eigenprojections ``E`` of ``reference``."""
    x = np.asarray(x, dtype=complex)
    dec = spectral_decompose(reference, cluster_tol)
    if x.shape != dec.basis.shape:
        raise ValueError("pinch: dimension mismatch")
    return _pinch_in_basis(x, dec.basis, dec.labels)


def _pinch_in_basis(x: np.ndarray, basis: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # compressions onto the eigenspaces are the diagonal blocks in the eigenbasis
    xb = dagger(basis) @ x @ basis
    xb = np.where(labels[:, None] == labels[None, :], xb, 0.0)
    return hermitian(basis @ xb @ dagger(basis), tol=1e-6)


def _psd_eigh(a, what: str):
    a = hermitian(a)
    evals, vecs = _eigh(a)
    if len(evals) and evals[0] < -PSD_TOL:
        raise NotPSDError(f"{what}: negative eigenvalue {evals[0]:.3e}")
    return evals, vecs


def support_projector(a, tol: float = PINV_TOL) -> np.ndarray:
    """Projector onto the eigenspaces of PSD ``a`` with eigenvalue above ``tol * lambda_max``."""
    evals, vecs = _psd_eigh(a, "support_projector")
    top = evals[-1] if len(evals) else 0.0
    keep = evals > tol * top if top > 0 else np.zeros(len(evals), dtype=bool)
    cols = vecs[:, keep]
    return hermitian(cols @ dagger(cols))


def gen_power(a, power: float, pinv_tol: float = PINV_TOL) -> np.ndarray:
    """``a**power`` on the support of PSD ``a``, zero on its kernel (generalized inverse for negative powers)."""
    evals, vecs = _psd_eigh(a, "gen_power")
    top = evals[-1] if len(evals) else 0.0
    keep = evals > pinv_tol * top if top > 0 else np.zeros(len(evals), dtype=bool)
    diag = np.zeros(len(evals))
    diag[keep] = evals[keep] ** power
    return hermitian((vecs * diag) @ dagger(vecs))


def gen_inverse_sqrt(a, pinv_tol: float = PINV_TOL) -> np.ndarray:
    return gen_power(a, -0.5, pinv_tol)


def _as_dims(local_dim, n: int) -> list[int]:
    if np.isscalar(local_dim):
        return [int(local_dim)] * n
    dims = [int(d) for d in local_dim]
    if len(dims) != n:
        raise ValueError("one local dimension per tensor factor required")
    return dims


def permute_factors(x, perm: Sequence[int], local_dim) -> np.ndarray:
    """Conjugate ``x`` by the unitary that moves tensor factor ``i`` to position ``perm[i]``.

    Equivalently, position ``j`` of the result holds the factor that sat at
    ``perm^{-1}(j)``, so ``A_0 (x) ... (x) A_{n-1}`` maps to
    ``A_{perm^{-1}(0)} (x) ... (x) A_{perm^{-1}(n-1)}``. ``local_dim`` is a
    single dimension or one dimension per (input) factor.
    """
    perm = [int(i) for i in perm]
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"not a permutation: {perm}")
    dims = _as_dims(local_dim, n)
    x = np.asarray(x, dtype=complex)
    total = int(np.prod(dims))
    if x.shape != (total, total):
        raise ValueError(f"expected a {total}x{total} matrix, got {x.shape}")
    inv = inverse_permutation(perm)
    axes = inv + [n + i for i in inv]
    out = x.reshape(dims + dims).transpose(axes)
    return out.reshape(total, total)


def permute_vector_factors(v, perm: Sequence[int], local_dim) -> np.ndarray:
    perm = [int(i) for i in perm]
    dims = _as_dims(local_dim, len(perm))
    inv = inverse_permutation(perm)
    return np.asarray(v).reshape(dims).transpose(inv).reshape(-1)


def permutation_unitary(perm: Sequence[int], local_dim) -> np.ndarray:
    """Explicit matrix of the factor permutation used by :func:`permute_factors`."""
    dims = _as_dims(local_dim, len(perm))
    total = int(np.prod(dims))
    u = np.zeros((total, total), dtype=complex)
    for col in range(total):
        u[:, col] = permute_vector_factors(np.eye(total)[col], perm, dims)
    return u


def inverse_permutation(perm: Sequence[int]) -> list[int]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return inv


def partial_trace(x, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    t = np.asarray(x).reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else letters[n + i].upper() for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    t = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    k = int(np.prod([dims[i] for i in keep]))
    return t.reshape(k, k)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state from the induced (Ginibre) measure; ``rank`` defaults to full."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return hermitian(rho / np.trace(rho).real)


def random_psd(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return hermitian(g @ dagger(g))
