"""Recovery of the viable pair behind a stable left coprime factorization.

A factorization normalized to unit feedthrough and output map ``[I 0]``,

    [M N] = [ A' - lam I | F   B ]      A' = A + F [I 0],
            [   [I 0]    | I   0 ]

determines the plant blocks and the injection ``F = [F1; F2]``. The
generator ``K`` of the viable pair then solves the nonsymmetric Riccati
equation

    K (A11 + F1) - A22 K - K A12 K + (A21 + F2) = 0,

found from a ``p``-dimensional invariant subspace ``[V1; V2]`` of

    A_plus = [[A11 + F1, -A12], [-(A21 + F2), A22]]

as ``K = V2 V1^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconjugacyError,
    FeedthroughError,
    NumericalError,
    SingularSylvesterError,
    UnstableError,
    ValidationError,
)
from .factorization import CoprimeFactors, LeftFactor
from .matrixnum import (
    CONTINUOUS,
    as_matrix,
    is_stable_matrix,
    match_spectra,
    numerical_rank,
    real_schur,
    reorder_schur,
    solve_sylvester,
    stability_predicate,
)
from .realization import PartitionedRealization, output_canonical_transform
from .structure import ViablePair, viable_pair

MAX_CONDITION = 1e12
MAX_CANDIDATES = 5000


@dataclass(frozen=True, eq=False)
class RiccatiProblem:
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    domain: str = CONTINUOUS

    def __post_init__(self):
        A11 = as_matrix(self.A11, "A11")
        p = A11.shape[0]
        A22 = np.asarray(self.A22, dtype=float)
        r = A22.shape[0] if A22.size else 0
        shapes = {"A12": (p, r), "A21": (r, p), "A22": (r, r), "F1": (p, p), "F2": (r, p)}
        object.__setattr__(self, "A11", A11)
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.size != shape[0] * shape[1]:
                raise ValidationError(f"{name} must be {shape[0]}x{shape[1]}")
            object.__setattr__(self, name, as_matrix(arr.reshape(shape), name))

    @property
    def p(self):
        return self.A11.shape[0]

    @property
    def r(self):
        return self.A22.shape[0]

    @property
    def A_plus(self) -> np.ndarray:
        return np.block([[self.A11 + self.F1, -self.A12],
                         [-(self.A21 + self.F2), self.A22]])

    def residual_matrix(self, K) -> np.ndarray:
        Ah = self.A11 + self.F1
        return K @ Ah - self.A22 @ K - K @ self.A12 @ K + (self.A21 + self.F2)

    def residual(self, K) -> float:
        return float(np.linalg.norm(self.residual_matrix(K)))

    def tolerance(self) -> float:
        a = np.linalg.norm(self.A_plus, 2) if self.A_plus.size else 0.0
        return 1e-8 * max(a * a + a, 1e-300)


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    K: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    residual: float
    closed_spectrum: np.ndarray
    condition: float
    feasible: int = 1
    candidates: int = 1
    refined: bool = False


def riccati_from_basis(prob: RiccatiProblem, basis) -> tuple[np.ndarray, float]:
    """``K = V2 V1^{-1}`` for an invariant-subspace basis ``[V1; V2]``; also returns ``cond(V1)``."""
    basis = np.asarray(basis)
    p = prob.p
    V1, V2 = basis[:p], basis[p:]
    cond = float(np.linalg.cond(V1))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        return None, cond
    K = np.linalg.solve(V1.T, V2.T).T
    if np.iscomplexobj(K):
        K = K.real
    return K, cond


def _subsets(blocks, p):
    """Index sets of Schur blocks whose sizes sum to ``p``."""
    sizes = [s for _, s in blocks]

    def rec(start, remaining, chosen):
        if remaining == 0:
            yield tuple(chosen)
            return
        for b in range(start, len(sizes)):
            if sizes[b] <= remaining:
                chosen.append(b)
                yield from rec(b + 1, remaining - sizes[b], chosen)
                chosen.pop()

    return rec(0, p, [])


def _count_subsets(blocks, p):
    counts = np.zeros(p + 1)
    counts[0] = 1
    for _, s in blocks:
        for k in range(p, s - 1, -1):
            counts[k] += counts[k - s]
    return int(counts[p])


def _greedy_subset(form, p):
    """Add blocks one at a time, keeping the top block of the basis best conditioned."""
    chosen = []
    size = 0
    while size < p:
        best = (-1.0, None)
        for b, (_, s) in enumerate(form.blocks):
            if b in chosen or size + s > p:
                continue
            trial = reorder_schur(form, chosen + [b])
            V1 = trial.Q[:p, :size + s]
            sv = np.linalg.svd(V1, compute_uv=False)[-1]
            if sv > best[0]:
                best = (sv, b)
        if best[1] is None:
            break
        chosen.append(best[1])
        size += form.blocks[best[1]][1]
    return [tuple(chosen)] if size == p else []


def _refine(prob: RiccatiProblem, K):
    """One Newton (defect-correction) step; kept only if it lowers the residual."""
    Acl = prob.A11 + prob.F1 - prob.A12 @ K
    Ak = prob.A22 + K @ prob.A12
    R = prob.residual_matrix(K)
    try:
        dK = solve_sylvester(Ak, Acl, R)
    except SingularSylvesterError:
        return K, False
    K_new = K + dK
    if prob.residual(K_new) < prob.residual(K):
        return K_new, True
    return K, False


def solve_riccati(prob: RiccatiProblem, max_candidates: int = MAX_CANDIDATES,
                  prefer=None) -> RiccatiSolution:
    """Stabilizing solution through the best-conditioned invariant subspace.

    Candidates are the ``p``-dimensional invariant subspaces of ``A_plus``
    spanned by whole real Schur blocks with only stable eigenvalues (greedy
    search beyond ``max_candidates``); the subspace spectrum is the closed
    spectrum ``eig(A11 + F1 - A12 K)``. The candidate whose orthonormal basis
    has the best conditioned top block ``V1`` is returned, unless ``prefer``
    lists a closed spectrum to match, in which case the closest one wins.
    ``feasible`` counts candidates with ``cond(V1) < 1e12`` and an admissible
    residual. When ``A_plus`` has exactly ``p`` stable eigenvalues the
    stabilizing solution is unique.

    Raises
    ------
    DisconjugacyError
        If no stabilizing candidate has an invertible top block.
    """
    p, r = prob.p, prob.r
    Ah = prob.A11 + prob.F1
    if r == 0:
        return RiccatiSolution(np.zeros((0, p)), np.eye(p), np.zeros((0, p)), 0.0,
                               np.linalg.eigvals(Ah), 1.0)
    form = real_schur(prob.A_plus)
    total = _count_subsets(form.blocks, p)
    subsets = _subsets(form.blocks, p) if total <= max_candidates else _greedy_subset(form, p)
    tol = prob.tolerance()
    best = None
    best_cond = np.inf
    feasible = 0
    tried = 0
    stable = stability_predicate(prob.domain)
    for subset in subsets:
        eigs = np.concatenate([form.block_eigs[b] for b in subset])
        if not all(stable(e) for e in eigs):
            continue
        tried += 1
        ordered = reorder_schur(form, subset)
        basis = ordered.Q[:, :p]
        K, cond = riccati_from_basis(prob, basis)
        best_cond = min(best_cond, cond)
        if K is None:
            continue
        res = prob.residual(K)
        if res > tol:
            K2, _ = _refine(prob, K)
            res = prob.residual(K2)
            if res > tol:
                continue
        feasible += 1
        score = (match_spectra(eigs, prefer) if prefer is not None else 0.0, cond)
        if best is None or score < best[2]:
            best = (basis, cond, score)
    if best is None:
        raise DisconjugacyError(
            f"no disconjugate stable {p}-dimensional invariant subspace among {tried} candidates; "
            f"best cond(V1) = {best_cond:.3e}",
            best_condition=best_cond)
    basis, cond, _ = best
    K, _ = riccati_from_basis(prob, basis)
    K, refined = _refine(prob, K)
    res = prob.residual(K)
    if res > tol:
        raise DisconjugacyError(f"Riccati residual {res:.3e} exceeds tolerance {tol:.3e}",
                                best_condition=cond, residual=res)
    return RiccatiSolution(K, basis[:p], basis[p:], res, np.linalg.eigvals(Ah - prob.A12 @ K),
                           cond, feasible, tried, refined)


@dataclass(frozen=True, eq=False)
class Recovery:
    """Result of :func:`recover_viable`.

    ``left`` reproduces the input factors exactly:
    ``stable_coprime_from_viable(pair, left)`` equals ``[M N]``.
    """

    pair: ViablePair
    Ax: np.ndarray
    solution: RiccatiSolution
    problem: RiccatiProblem
    left: LeftFactor
    transform: np.ndarray


def controller_form(cf: CoprimeFactors, feedthrough_tol: float = 1e-10):
    """Normalize ``[M N]`` to unit feedthrough and output map ``[I 0]``.

    Returns ``(problem, B1, B2, D_M, T)`` where ``T`` is the state transform.
    """
    joint = cf.joint
    p = cf.m_cols
    if joint.n < p:
        raise ValidationError(f"factor realization has {joint.n} states, fewer than p = {p}")
    DM = joint.D[:, :p]
    if p and numerical_rank(DM) < p:
        raise FeedthroughError("the feedthrough of M is singular; M is not biproper")
    C = np.linalg.solve(DM, joint.C)
    D = np.linalg.solve(DM, joint.D)
    scale = max(1.0, np.linalg.norm(D[:, :p]))
    if np.linalg.norm(D[:, p:]) > feedthrough_tol * scale:
        raise FeedthroughError("N has a nonzero feedthrough after normalization")
    T, Tinv = output_canonical_transform(C)
    A = T @ joint.A @ Tinv
    B = T @ joint.B
    F1, F2 = B[:p, :p], B[p:, :p]
    B1, B2 = B[:p, p:], B[p:, p:]
    prob = RiccatiProblem(A[:p, :p] - F1, A[:p, p:], A[p:, :p] - F2, A[p:, p:], F1, F2,
                          joint.domain)
    return prob, B1, B2, DM, T


def recover_viable(cf: CoprimeFactors, prefer=None) -> Recovery:
    """Viable pair ``(W, V)`` and stable factor ``Ax`` behind a stable factorization.

    ``prefer`` optionally names the spectrum of ``Ax`` to select among
    several stabilizing Riccati solutions (see :func:`solve_riccati`).
    """
    if not is_stable_matrix(cf.joint.A, cf.domain):
        bad = np.linalg.eigvals(cf.joint.A)
        raise UnstableError("the factor realization is not stable", eigenvalues=bad)
    prob, B1, B2, DM, T = controller_form(cf)
    sol = solve_riccati(prob, prefer=prefer)
    base = PartitionedRealization(prob.A11, prob.A12, prob.A21, prob.A22, B1, B2, cf.domain)
    vp = viable_pair(base, sol.K)
    Ax = prob.F1 + prob.A11 - prob.A12 @ sol.K
    try:
        left = LeftFactor(Ax, np.eye(prob.p), DM, cf.domain)
    except UnstableError as exc:
        raise NumericalError(f"recovered Ax is not stable: {exc}") from exc
    return Recovery(vp, Ax, sol, prob, left, T)


__all__ = [
    "CONTINUOUS",
    "Recovery",
    "RiccatiProblem",
    "RiccatiSolution",
    "controller_form",
    "recover_viable",
    "riccati_from_basis",
    "solve_riccati",
]
