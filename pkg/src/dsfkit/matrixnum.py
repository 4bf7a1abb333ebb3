"""Dense numerical kernels.

Matrices are plain 2-D :class:`numpy.ndarray` objects in numpy's default
row-major (C) layout. Every public routine rejects NaN/Inf input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.optimize import linear_sum_assignment

from .errors import ConjugateSplitError, ReorderError, SingularSylvesterError, ValidationError

DEFAULT_TOL = 1e-10

CONTINUOUS = "continuous"
DISCRETE = "discrete"
DOMAINS = (CONTINUOUS, DISCRETE)


def check_finite(*arrays, names=None):
    for k, a in enumerate(arrays):
        if not np.all(np.isfinite(a)):
            label = names[k] if names else f"argument {k}"
            raise ValidationError(f"{label} contains NaN or Inf entries")


def as_matrix(a, name="matrix", rows=None, cols=None, dtype=float) -> np.ndarray:
    """Coerce ``a`` to a finite 2-D array, optionally checking its shape."""
    arr = np.array(a, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got {arr.ndim}-D")
    if rows is not None and arr.shape[0] != rows:
        raise ValidationError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ValidationError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    check_finite(arr, names=[name])
    return arr


def check_domain(domain: str) -> str:
    if domain not in DOMAINS:
        raise ValidationError(f"domain must be one of {DOMAINS}, got {domain!r}")
    return domain


def stability_predicate(domain: str, margin: float = 0.0) -> Callable[[complex], bool]:
    """Return ``lam -> bool`` testing membership of the open stability region.

    ``margin`` shrinks the region: ``Re(lam) < -margin`` in continuous time,
    ``|lam| < 1 - margin`` in discrete time.
    """
    check_domain(domain)
    if domain == CONTINUOUS:
        return lambda lam: complex(lam).real < -margin
    return lambda lam: abs(complex(lam)) < 1.0 - margin


def is_stable_matrix(A, domain: str, margin: float = 0.0) -> bool:
    A = np.asarray(A)
    if A.size == 0:
        return True
    pred = stability_predicate(domain, margin)
    return all(pred(e) for e in np.linalg.eigvals(A))


def numerical_rank(A, tol_rel: float = DEFAULT_TOL) -> int:
    """Number of singular values above ``tol_rel * sigma_max``."""
    if tol_rel <= 0:
        raise ValidationError("tol_rel must be positive")
    A = np.asarray(A)
    check_finite(A, names=["A"])
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol_rel * s[0]))


def smallest_singular_value(A, k: int | None = None) -> float:
    """The ``k``-th largest singular value (default: the last one)."""
    A = np.asarray(A)
    if A.size == 0:
        return np.inf
    s = np.linalg.svd(A, compute_uv=False)
    if k is None:
        k = min(A.shape)
    if k > len(s):
        return 0.0
    return float(s[k - 1])


def orthonormal_complement(C, target=None) -> np.ndarray:
    """Rows spanning the orthogonal complement of ``rowspace(C)``.

    The basis is rotated (orthogonal Procrustes) to lie as close as possible
    to the rows of ``target``, by default the trailing identity rows
    ``[0 I]``, so that ``C = [I 0]`` yields exactly ``[0 I]`` up to rounding.
    """
    C = np.asarray(C, dtype=float)
    p, n = C.shape
    r = n - p
    if r == 0:
        return np.zeros((0, n))
    N = scipy.linalg.null_space(C)  # n x r, orthonormal columns
    if N.shape[1] != r:
        raise ValidationError("C does not have full row rank")
    if target is None:
        target = np.hstack([np.zeros((r, p)), np.eye(r)])
    U, _, Vt = np.linalg.svd(N.T @ target.T)
    return (N @ (U @ Vt)).T


def kron_sylvester(A, B, C) -> np.ndarray:
    """Solve ``AX - XB = C`` via the Kronecker form; O((nm)^3), for checks only."""
    A, B, C = (np.asarray(x) for x in (A, B, C))
    n, m = C.shape
    op = np.kron(np.eye(m), A) - np.kron(B.T, np.eye(n))
    x = np.linalg.solve(op, C.reshape(-1, order="F"))
    return x.reshape((n, m), order="F")


def solve_sylvester(A, B, C, sep_tol: float = 1e-12) -> np.ndarray:
    """Solve ``A X - X B = C``.

    Raises :class:`SingularSylvesterError` when an eigenvalue of ``A`` lies
    within ``sep_tol * max(1, |A|, |B|)`` of an eigenvalue of ``B``.
    """
    A = np.atleast_2d(np.asarray(A))
    B = np.atleast_2d(np.asarray(B))
    C = np.atleast_2d(np.asarray(C))
    check_finite(A, B, C, names=["A", "B", "C"])
    n, m = A.shape[0], B.shape[0]
    if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
        raise ValidationError(
            f"incompatible shapes A{A.shape}, B{B.shape}, C{C.shape} for AX - XB = C"
        )
    dtype = np.result_type(A, B, C, float)
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=dtype)
    ea = np.linalg.eigvals(A)
    eb = np.linalg.eigvals(B)
    gap = np.min(np.abs(ea[:, None] - eb[None, :]))
    scale = max(1.0, np.linalg.norm(A, 2), np.linalg.norm(B, 2))
    if gap <= sep_tol * scale:
        raise SingularSylvesterError(
            f"spectra of A and B are not disjoint (closest pair distance {gap:.3e})"
        )
    return scipy.linalg.solve_sylvester(A, -B, C)


@dataclass(frozen=True)
class SchurForm:
    """Real Schur decomposition ``A = Q T Q^T``.

    ``blocks`` lists ``(start, size)`` of the diagonal blocks of ``T`` in
    order, ``eigs`` the eigenvalues in the same order (both members of a
    conjugate pair appear, positive imaginary part first).
    """

    Q: np.ndarray
    T: np.ndarray
    eigs: np.ndarray
    blocks: tuple
    n_selected: int = 0

    @property
    def block_eigs(self) -> list:
        out = []
        for start, size in self.blocks:
            out.append(tuple(self.eigs[start:start + size]))
        return out

    def leading_basis(self, k: int | None = None) -> np.ndarray:
        k = self.n_selected if k is None else k
        return self.Q[:, :k]


def _blocks_of(T, tiny=None) -> tuple:
    n = T.shape[0]
    if tiny is None:
        tiny = 0.0
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > tiny:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    return tuple(blocks)


def _eigs_of(T, blocks) -> np.ndarray:
    eigs = np.empty(T.shape[0], dtype=complex)
    for start, size in blocks:
        if size == 1:
            eigs[start] = T[start, start]
        else:
            ev = np.linalg.eigvals(T[start:start + 2, start:start + 2])
            ev = sorted(ev, key=lambda z: -z.imag)
            eigs[start:start + 2] = ev
    return eigs


def real_schur(A) -> SchurForm:
    """Unordered real Schur form of a square real matrix."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValidationError("A must be square")
    if A.shape[0] == 0:
        return SchurForm(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0, complex), ())
    T, Q = scipy.linalg.schur(A, output="real")
    blocks = _blocks_of(T)
    return SchurForm(Q, T, _eigs_of(T, blocks), blocks, 0)


def reorder_schur(form: SchurForm, selected: Sequence[int]) -> SchurForm:
    """Move the diagonal blocks with indices ``selected`` to the top.

    Selected blocks keep their relative order. A rejected swap raises
    :class:`ReorderError` naming the block being moved.
    """
    T = np.array(form.T, order="F")
    Q = np.array(form.Q, order="F")
    chosen = sorted(set(int(b) for b in selected))
    top = 0
    for b in chosen:
        if not 0 <= b < len(form.blocks):
            raise ValidationError(f"block index {b} out of range")
        start, size = form.blocks[b]
        if start != top:
            # blocks below the moving one are untouched, so ``start`` is still valid
            T, Q, info = lapack.dtrexc(T, Q, start + 1, top + 1)
            if info != 0:
                raise ReorderError(
                    f"Schur block swap failed while moving block {b} (eigenvalue "
                    f"{form.eigs[start]:.6g})", block_index=b)
        top += size
    T = np.triu(T, -1)
    blocks = _blocks_of(T)
    return SchurForm(np.ascontiguousarray(Q), np.ascontiguousarray(T),
                     _eigs_of(T, blocks), blocks, top)


def schur_ordered(A, select: Callable[[complex], bool]) -> SchurForm:
    """Real Schur form with the eigenvalues satisfying ``select`` leading.

    A 2x2 block is moved only if ``select`` accepts both of its conjugate
    eigenvalues; accepting exactly one raises :class:`ConjugateSplitError`.
    The number of leading selected eigenvalues is ``n_selected``.
    """
    form = real_schur(A)
    chosen = []
    for b, ev in enumerate(form.block_eigs):
        flags = [bool(select(complex(e))) for e in ev]
        if all(flags):
            chosen.append(b)
        elif any(flags):
            raise ConjugateSplitError(
                f"selection splits the conjugate pair {ev[0]:.6g}, {ev[1]:.6g}", block_index=b)
    return reorder_schur(form, chosen)


def relative_error(reference, other) -> float:
    """``|reference - other|_F / |reference|_F`` (absolute when the reference vanishes)."""
    reference = np.asarray(reference)
    diff = np.linalg.norm(reference - np.asarray(other))
    scale = np.linalg.norm(reference)
    return float(diff / scale) if scale > 0 else float(diff)


def match_spectra(computed, targets) -> float:
    """Largest ``|computed - target| / (1 + |target|)`` under the best one-to-one pairing."""
    computed = np.asarray(computed, dtype=complex)
    targets = np.asarray(targets, dtype=complex)
    if computed.size != targets.size:
        raise ValidationError("spectra have different sizes")
    if computed.size == 0:
        return 0.0
    cost = np.abs(computed[:, None] - targets[None, :]) / (1.0 + np.abs(targets[None, :]))
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))
