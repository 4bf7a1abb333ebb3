"""Viable (W, V) pairs, the dynamical structure function (Q, P), and sparsity.

For an output-canonical realization with blocks ``A11 .. B2`` and any
``K`` of shape ``(n-p, p)`` the pair

    W(lam) = (A11 - A12 K) + A12 (lam I - Ak)^{-1} G
    V(lam) = B1 + A12 (lam I - Ak)^{-1} (K B1 + B2)

with ``Ak = A22 + K A12`` and ``G = K A11 + A21 - A22 K - K A12 K``
satisfies ``L = (lam I - W)^{-1} V``. ``K = 0`` gives the canonical pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import (
    PlacementError,
    PoleHitError,
    SingularSylvesterError,
    UnobservableError,
    ValidationError,
)
from .matrixnum import as_matrix, match_spectra, relative_error, solve_sylvester
from .realization import (
    DiagonalPart,
    Inverse,
    LambdaIdentity,
    PartitionedRealization,
    RationalMatrix,
    StateSpace,
    mcmillan_degree,
    random_points,
    sample_grid,
)


@dataclass(frozen=True, eq=False)
class ViablePair:
    """A (W, V) pair with ``L = (lam I - W)^{-1} V``, generated by ``K``."""

    base: PartitionedRealization
    K: np.ndarray
    W: RationalMatrix
    V: RationalMatrix

    @property
    def p(self):
        return self.base.p

    @property
    def plant(self) -> StateSpace:
        return self.base.to_statespace()

    @property
    def pole_matrix(self) -> np.ndarray:
        """``A22 + K A12``, the state matrix shared by W and V."""
        return self.base.A22 + self.K @ self.base.A12

    @property
    def coupling(self) -> np.ndarray:
        """``G = K A11 + A21 - A22 K - K A12 K``."""
        b, K = self.base, self.K
        return K @ b.A11 + b.A21 - b.A22 @ K - K @ b.A12 @ K

    def identity_error(self, lam) -> float:
        L = self.plant.evaluate(lam)
        lhs = np.linalg.solve(lam * np.eye(self.p) - self.W.evaluate(lam), self.V.evaluate(lam))
        return relative_error(L, lhs)


def viable_pair(base: PartitionedRealization, K=None) -> ViablePair:
    """Realize the viable pair generated by ``K`` (default ``K = 0``)."""
    p, r = base.p, base.r
    K = np.zeros((r, p)) if K is None else np.asarray(K, dtype=float)
    if K.size == 0:
        K = np.zeros((r, p))
    K = as_matrix(K, "K")
    if K.shape != (r, p):
        raise ValidationError(f"K must be {r}x{p}, got {K.shape[0]}x{K.shape[1]}")
    Ak = base.A22 + K @ base.A12
    G = K @ base.A11 + base.A21 - base.A22 @ K - K @ base.A12 @ K
    W = StateSpace(Ak, G, base.A12, base.A11 - base.A12 @ K, base.domain)
    V = StateSpace(Ak, K @ base.B1 + base.B2, base.A12, base.B1, base.domain)
    K.setflags(write=False)
    return ViablePair(base, K, W, V)


@dataclass(frozen=True, eq=False)
class DSFPair:
    """Dynamical structure function ``L = (I - Q)^{-1} P`` with zero-diagonal Q."""

    Q: RationalMatrix
    P: RationalMatrix
    D: RationalMatrix
    source: ViablePair | None = None

    @property
    def p(self):
        return self.Q.shape[0]

    def transfer(self, lam) -> np.ndarray:
        return np.linalg.solve(np.eye(self.p) - self.Q.evaluate(lam), self.P.evaluate(lam))


def dsf_from_viable(vp: ViablePair) -> DSFPair:
    W, V = vp.W, vp.V
    D = DiagonalPart(W)
    scale = Inverse(LambdaIdentity(W.shape[0]) - D)
    Q = scale @ (W - D)
    P = scale @ V
    return DSFPair(Q, P, D, vp)


# --------------------------------------------------------------------------
# pole placement


def _check_conjugate_closed(targets, tol=1e-9):
    remaining = list(targets)
    while remaining:
        t = remaining.pop()
        if abs(t.imag) <= tol * (1 + abs(t)):
            continue
        k = int(np.argmin([abs(s - np.conj(t)) for s in remaining])) if remaining else -1
        if k < 0 or abs(remaining[k] - np.conj(t)) > tol * (1 + abs(t)):
            raise ValidationError(f"target set is not closed under conjugation (missing conj of {t})")
        remaining.pop(k)


def _target_blocks(targets, tol=1e-9):
    """Group targets into ``(value, multiplicity)``; complex values keep Im > 0."""
    groups = []
    for t in sorted(targets, key=lambda z: (z.real, z.imag)):
        if t.imag < -tol * (1 + abs(t)):
            continue
        if abs(t.imag) <= tol * (1 + abs(t)):
            t = complex(t.real, 0.0)
        for g in groups:
            if abs(g[0] - t) <= tol * (1 + abs(t)):
                g[1] += 1
                break
        else:
            groups.append([t, 1])
    return groups


def _chain(value, size, unit_size):
    if unit_size == 1:
        return np.diag(np.full(size, value.real)) + np.diag(np.ones(size - 1), 1)
    a, b = value.real, value.imag
    unit = np.array([[a, b], [-b, a]])
    return np.kron(np.eye(size), unit) + np.kron(np.diag(np.ones(size - 1), 1), np.eye(2))


def target_matrix(targets, chains: int | None = None) -> np.ndarray:
    """Real matrix with the given (conjugate-closed) spectrum.

    Each repeated eigenvalue is split into at most ``chains`` Jordan chains of
    near-equal length; ``chains=None`` gives a diagonalizable matrix and
    ``chains=1`` a cyclic one.
    """
    targets = [complex(t) for t in targets]
    _check_conjugate_closed(targets)
    pieces = []
    for value, mult in _target_blocks(targets):
        k = mult if chains is None else max(1, min(chains, mult))
        unit_size = 1 if value.imag == 0 else 2
        for j in range(k):
            size = mult // k + (1 if j < mult % k else 0)
            pieces.append(_chain(value, size, unit_size))
    return scipy.linalg.block_diag(*pieces) if pieces else np.zeros((0, 0))


def unobservable_modes(A22, A12, tol_rel: float = 1e-9) -> list:
    """Eigenvalues of A22 failing the PBH observability test with output map A12."""
    A22 = np.asarray(A22)
    A12 = np.asarray(A12)
    r = A22.shape[0]
    modes = []
    scale = max(1.0, np.linalg.norm(A22, 2), np.linalg.norm(A12, 2) if A12.size else 0.0)
    for mu in np.linalg.eigvals(A22) if r else []:
        M = np.vstack([A22 - mu * np.eye(r), A12])
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= tol_rel * scale:
            modes.append(complex(mu))
    return modes


def place_pair_poles(base: PartitionedRealization, targets, rng=None, max_retries: int = 20,
                     tol: float = 1e-6) -> np.ndarray:
    """Find ``K`` such that ``A22 + K A12`` has the requested spectrum.

    Uses a Sylvester-equation assignment on the dual pair
    ``(A22^T, A12^T)``; ill-conditioned attempts are retried with fresh random
    data.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    targets = [complex(t) for t in targets]
    p, r = base.p, base.r
    if len(targets) != r:
        raise ValidationError(f"need {r} target poles, got {len(targets)}")
    if r == 0:
        return np.zeros((0, p))
    _check_conjugate_closed(targets)
    bad = unobservable_modes(base.A22, base.A12)
    if bad:
        raise UnobservableError(
            "(A12, A22) is not observable; modes " + ", ".join(f"{m:.6g}" for m in bad)
            + " cannot be moved", modes=bad)
    At = base.A22.T
    Bt = base.A12.T
    # shortest Jordan chains first: their eigenvalues are the least sensitive
    variants = [target_matrix(targets), target_matrix(targets, chains=p), target_matrix(targets, chains=1)]
    best = (np.inf, None)
    for attempt in range(max_retries):
        # a random pre-shift keeps the Sylvester equation solvable when targets
        # coincide with open-loop modes
        K0 = np.zeros((r, p)) if attempt == 0 else rng.standard_normal((r, p))
        A0 = At + Bt @ K0.T
        for G in variants:
            H = rng.standard_normal((p, r))
            try:
                X = solve_sylvester(A0, G, -Bt @ H)
            except SingularSylvesterError:
                continue
            if np.linalg.cond(X) > 1e12:
                continue
            K = K0 + np.linalg.solve(X.T, H.T)
            err = _placement_error(base.A22 + K @ base.A12, targets, X, G)
            if err < best[0]:
                best = (err, K)
            if err < tol:
                return K
    raise PlacementError(
        f"pole placement failed after {max_retries} attempts (best error {best[0]:.3e})")


def _placement_error(Acl, targets, X, G) -> float:
    """Spectral mismatch of ``Acl`` against ``targets``.

    Eigenvalues of a defective matrix are only computable to about
    ``eps**(1/k)`` for a Jordan chain of length ``k``. When the pairwise
    match misses, the placement is still accepted if ``Acl^T`` is certified
    similar to ``G`` through ``X`` and every cluster of repeated targets is
    matched by the mean of its assigned eigenvalues, which is well conditioned.
    """
    computed = np.linalg.eigvals(Acl)
    err = match_spectra(computed, targets)
    if err < 1e-6:
        return err
    similarity = np.linalg.norm(Acl.T @ X - X @ G) / (np.linalg.norm(Acl) * np.linalg.norm(X))
    if similarity > 1e-10:
        return err
    t = np.asarray(targets, dtype=complex)
    cost = np.abs(computed[:, None] - t[None, :])
    rows, cols = linear_sum_assignment(cost)
    assigned = np.empty_like(t)
    assigned[cols] = computed[rows]
    worst = 0.0
    for value, _ in _target_blocks(targets):
        for v in {value, np.conj(value)}:
            group = np.abs(t - v) <= 1e-9 * (1 + abs(v))
            worst = max(worst, abs(assigned[group].mean() - v) / (1 + abs(v)))
    return worst


# --------------------------------------------------------------------------
# sparsity and viability


@dataclass(frozen=True)
class SparsityPattern:
    mask: np.ndarray
    tol_rel: float
    samples: tuple
    scale: float = 0.0

    def nonzeros(self) -> set:
        return {(int(i), int(j)) for i, j in zip(*np.nonzero(self.mask))}


def sparsity_of(R: RationalMatrix, tol_rel: float = 1e-9, nsamples: int = 20, rng=None,
                radius: float | None = None, max_retries: int = 100) -> SparsityPattern:
    """Structural nonzero pattern of ``R`` estimated from random samples.

    An entry is declared zero only if it stays below ``tol_rel`` times the
    largest entry magnitude seen at every sample.
    """
    if nsamples < 10:
        raise ValidationError("sparsity detection needs at least 10 samples")
    rng = np.random.default_rng(0) if rng is None else rng
    if radius is None:
        radius = _radius_for(R)
    samples, values = [], []
    misses = 0
    while len(samples) < nsamples:
        lam = random_points(rng, 1, radius)[0]
        try:
            val = R.evaluate(lam)
        except PoleHitError:
            misses += 1
            if misses > max_retries:
                raise
            continue
        samples.append(complex(lam))
        values.append(np.abs(val))
    mags = np.array(values)
    scale = float(mags.max()) if mags.size else 0.0
    if scale == 0.0:
        mask = np.zeros(R.shape, dtype=bool)
    else:
        mask = np.any(mags > tol_rel * scale, axis=0)
    return SparsityPattern(mask, tol_rel, tuple(samples), scale)


def _radius_for(R):
    radii = [1.0]
    stack = [R]
    while stack:
        node = stack.pop()
        if isinstance(node, StateSpace) and node.n:
            radii.append(float(np.max(np.abs(node.poles))))
        for attr in ("a", "b"):
            child = getattr(node, attr, None)
            if isinstance(child, RationalMatrix):
                stack.append(child)
        stack.extend(getattr(node, "parts", ()))
    return 2.0 * max(radii)


@dataclass(frozen=True)
class ViabilityReport:
    passed: bool
    degree: int
    bound: int
    degree_excess: int
    identity_error: float
    worst_lambda: complex | None
    borderline: bool = False
    notes: tuple = field(default_factory=tuple)


def check_viability(vp: ViablePair, rng=None, nsamples: int = 20, tol: float = 1e-8,
                    rank_tol: float = 1e-9) -> ViabilityReport:
    """Degree bound ``deg W <= n - p`` and the identity ``L = (lam I - W)^{-1} V``."""
    rng = np.random.default_rng(0) if rng is None else rng
    bound = vp.base.r
    deg = mcmillan_degree(vp.W, tol_rel=rank_tol)
    points = sample_grid([vp.plant, vp.W, vp.V], rng, nsamples)
    worst, worst_lam = 0.0, None
    for lam in points:
        err = vp.identity_error(lam)
        if err >= worst:
            worst, worst_lam = err, lam
    excess = max(0, deg.degree - bound)
    notes = ("degree decision within 10x of rank tolerance",) if deg.borderline else ()
    return ViabilityReport(bool(excess == 0 and worst < tol), deg.degree, bound, excess, worst,
                           worst_lam, deg.borderline, notes)
