"""State-space and pencil realizations, evaluable rational matrices.

A :class:`RationalMatrix` is anything that can be evaluated at a complex
frequency ``lam``. Realizations (:class:`StateSpace`,
:class:`PencilRealization`) evaluate through a linear solve; expression nodes
(sums, products, inverses, diagonal extraction, constants and ``lam * I``)
evaluate recursively. Realization notation follows

    [A - lam E | B - lam F]
    [----------+----------]  =  D + C (lam E - A)^{-1} (B - lam F)
    [    C     |    D     ]

with ``E = I`` and ``F = 0`` for an ordinary state-space system.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import FeedthroughError, PoleHitError, RegularityError, ValidationError
from .matrixnum import (
    CONTINUOUS,
    as_matrix,
    check_domain,
    numerical_rank,
    orthonormal_complement,
)

POLE_CONDITION = 1e12


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def _solve_checked(M, rhs, lam):
    """Solve ``M X = rhs`` refusing matrices with condition above POLE_CONDITION."""
    if M.shape[0] == 0:
        return np.zeros((0, rhs.shape[1]), dtype=complex)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > POLE_CONDITION:
        raise PoleHitError(f"evaluation point {lam} is (numerically) a pole "
                           f"(condition {cond:.3e})", lam=lam, condition=cond)
    return np.linalg.solve(M, rhs)


class RationalMatrix:
    """Base class of evaluable transfer-function matrices."""

    shape: tuple = (0, 0)
    realization_backed = False

    def evaluate(self, lam: complex) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, lam):
        return self.evaluate(lam)

    @property
    def domain(self):
        return None

    def __add__(self, other):
        return Sum(self, _lift(other, self.shape))

    def __radd__(self, other):
        return Sum(_lift(other, self.shape), self)

    def __sub__(self, other):
        return Sum(self, Scaled(_lift(other, self.shape), -1.0))

    def __rsub__(self, other):
        return Sum(_lift(other, self.shape), Scaled(self, -1.0))

    def __neg__(self):
        return Scaled(self, -1.0)

    def __matmul__(self, other):
        return Product(self, _lift(other))

    def __rmatmul__(self, other):
        return Product(_lift(other), self)

    def inv(self):
        return Inverse(self)

    def diag_part(self):
        return DiagonalPart(self)


def _lift(x, shape=None):
    if isinstance(x, RationalMatrix):
        return x
    arr = np.asarray(x)
    if arr.ndim == 0 and shape is not None:
        # a scalar added to a p x p matrix means a multiple of the identity
        return Constant(arr * np.eye(shape[0], shape[1]))
    return Constant(arr)


def evaluate(R: RationalMatrix, lam: complex) -> np.ndarray:
    """Pointwise value ``R(lam)`` as a complex array."""
    return R.evaluate(lam)


# --------------------------------------------------------------------------
# realizations


@dataclass(frozen=True, eq=False)
class StateSpace(RationalMatrix):
    """Dense real realization ``D + C (lam I - A)^{-1} B``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    domain: str = CONTINUOUS
    realization_backed = True

    def __post_init__(self):
        A = _shaped(self.A, "A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValidationError(f"A must be square, got {A.shape}")
        D0 = np.asarray(self.D, dtype=float)
        m_hint = D0.shape[1] if D0.ndim == 2 else None
        p_hint = D0.shape[0] if D0.ndim == 2 else None
        B = _shaped(self.B, "B", rows=n, cols=m_hint)
        C = _shaped(self.C, "C", rows=p_hint, cols=n)
        D = _shaped(self.D, "D", rows=C.shape[0], cols=B.shape[1])
        check_domain(self.domain)
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def shape(self):
        return (self.p, self.m)

    @property
    def poles(self):
        return np.linalg.eigvals(self.A) if self.n else np.zeros(0, complex)

    def evaluate(self, lam):
        lam = complex(lam)
        X = _solve_checked(lam * np.eye(self.n) - self.A, self.B.astype(complex), lam)
        return self.D + self.C @ X

    def to_pencil(self) -> "PencilRealization":
        return PencilRealization(self.A, np.eye(self.n), self.B, self.C, self.D,
                                 domain=self.domain)

    def columns(self, cols) -> "StateSpace":
        return StateSpace(self.A, self.B[:, cols], self.C, self.D[:, cols], self.domain)

    def rows(self, rows) -> "StateSpace":
        return StateSpace(self.A, self.B, self.C[rows, :], self.D[rows, :], self.domain)

    def __repr__(self):
        return f"StateSpace(n={self.n}, m={self.m}, p={self.p}, domain={self.domain!r})"


def _shaped(x, name, rows=None, cols=None):
    """2-D float matrix; empty input becomes a zero-size matrix of the implied shape."""
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        r = rows if rows is not None else (arr.shape[0] if arr.ndim == 2 else 0)
        c = cols if cols is not None else (arr.shape[1] if arr.ndim == 2 else 0)
        return np.zeros((r, c))
    return as_matrix(arr, name, rows=rows, cols=cols)


@dataclass(frozen=True, eq=False)
class PencilRealization(RationalMatrix):
    """Pencil realization ``D + C (lam E - A)^{-1} (B - lam F)``.

    With ``center=(alpha, beta)`` the input pencil is ``B (alpha - lam beta)``
    instead and ``F`` is ignored.
    """

    A: np.ndarray
    E: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    F: np.ndarray | None = None
    center: tuple | None = None
    domain: str = CONTINUOUS
    realization_backed = True

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValidationError("A must be square")
        E = as_matrix(self.E, "E", rows=n, cols=n) if n else np.zeros((0, 0))
        D = as_matrix(self.D, "D")
        p, m = D.shape
        B = as_matrix(self.B, "B", rows=n, cols=m) if n else np.zeros((0, m))
        C = as_matrix(self.C, "C", rows=p, cols=n) if n else np.zeros((p, 0))
        F = np.zeros((n, m)) if self.F is None else (as_matrix(self.F, "F", rows=n, cols=m) if n else np.zeros((0, m)))
        if self.center is not None:
            alpha, beta = (float(v) for v in self.center)
            if alpha == 0 and beta == 0:
                raise ValidationError("center (alpha, beta) must not be (0, 0)")
            object.__setattr__(self, "center", (alpha, beta))
        check_domain(self.domain)
        for name, val in (("A", A), ("E", E), ("B", B), ("C", C), ("D", D), ("F", F)):
            object.__setattr__(self, name, _frozen(val))
        if n and not is_regular_pencil(A, E):
            raise ValidationError("pole pencil A - lam E is singular (not regular)")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def shape(self):
        return self.D.shape

    def input_pencil(self, lam):
        """``B - lam F`` (or ``B (alpha - lam beta)`` when centered) at ``lam``."""
        if self.center is not None:
            alpha, beta = self.center
            return self.B * (alpha - lam * beta)
        return self.B - lam * self.F

    @property
    def input_constant(self):
        if self.center is not None:
            return self.center[0] * self.B
        return self.B

    @property
    def input_slope(self):
        """``F`` such that the input pencil is ``B0 - lam F``."""
        if self.center is not None:
            return self.center[1] * self.B
        return self.F

    def evaluate(self, lam):
        lam = complex(lam)
        X = _solve_checked(lam * self.E - self.A, self.input_pencil(lam).astype(complex), lam)
        return self.D + self.C @ X

    def finite_poles_candidates(self):
        """Finite generalized eigenvalues of the pole pencil (A, E)."""
        if self.n == 0:
            return np.zeros(0, complex)
        ev = scipy.linalg.eigvals(self.A, self.E)
        return ev[np.isfinite(ev)]

    def system_pencil(self, lam):
        """``[[A - lam E, B - lam F], [C, D]]`` evaluated at ``lam``."""
        top = np.hstack([self.A - lam * self.E, self.input_pencil(lam)])
        bottom = np.hstack([self.C, self.D])
        return np.vstack([top, bottom]).astype(complex)


def is_regular_pencil(A, E, rng=None, samples=None) -> bool:
    """``det(A - lam E)`` not identically zero, tested at ``n + 1`` random points."""
    n = A.shape[0]
    rng = np.random.default_rng(12345) if rng is None else rng
    k = n + 1 if samples is None else samples
    scale = 1.0 + np.linalg.norm(A) + np.linalg.norm(E)
    for _ in range(k):
        lam = scale * complex(rng.standard_normal(), rng.standard_normal())
        if numerical_rank(A - lam * E, 1e-12) == n:
            return True
    return False


def pencil_realization_from(R: RationalMatrix) -> PencilRealization:
    if isinstance(R, PencilRealization):
        return R
    if isinstance(R, StateSpace):
        return R.to_pencil()
    if isinstance(R, Constant):
        return PencilRealization(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, R.shape[1])),
                                 np.zeros((R.shape[0], 0)), R.value)
    raise ValidationError(f"{type(R).__name__} is not realization-backed")


# --------------------------------------------------------------------------
# expression nodes


class Constant(RationalMatrix):
    realization_backed = True

    def __init__(self, value):
        self.value = _frozen(np.atleast_2d(np.asarray(value)))
        self.shape = self.value.shape

    def evaluate(self, lam):
        return self.value.astype(complex)


class LambdaIdentity(RationalMatrix):
    """``lam * I_p``."""

    def __init__(self, p: int):
        self.shape = (p, p)

    def evaluate(self, lam):
        return complex(lam) * np.eye(self.shape[0], dtype=complex)


def _domain_of(*nodes):
    for node in nodes:
        if node.domain is not None:
            return node.domain
    return None


class Sum(RationalMatrix):
    def __init__(self, a: RationalMatrix, b: RationalMatrix):
        if a.shape != b.shape:
            raise ValidationError(f"cannot add shapes {a.shape} and {b.shape}")
        self.a, self.b = a, b
        self.shape = a.shape

    @property
    def domain(self):
        return _domain_of(self.a, self.b)

    def evaluate(self, lam):
        return self.a.evaluate(lam) + self.b.evaluate(lam)


class Scaled(RationalMatrix):
    def __init__(self, a: RationalMatrix, c: float):
        self.a, self.c = a, c
        self.shape = a.shape

    @property
    def domain(self):
        return self.a.domain

    def evaluate(self, lam):
        return self.c * self.a.evaluate(lam)


class Product(RationalMatrix):
    def __init__(self, a: RationalMatrix, b: RationalMatrix):
        if a.shape[1] != b.shape[0]:
            raise ValidationError(f"cannot multiply shapes {a.shape} and {b.shape}")
        self.a, self.b = a, b
        self.shape = (a.shape[0], b.shape[1])

    @property
    def domain(self):
        return _domain_of(self.a, self.b)

    def evaluate(self, lam):
        return self.a.evaluate(lam) @ self.b.evaluate(lam)


class Inverse(RationalMatrix):
    def __init__(self, a: RationalMatrix):
        if a.shape[0] != a.shape[1]:
            raise ValidationError(f"inverse needs a square operand, got {a.shape}")
        self.a = a
        self.shape = a.shape

    @property
    def domain(self):
        return self.a.domain

    def evaluate(self, lam):
        val = self.a.evaluate(lam)
        return _solve_checked(val, np.eye(self.shape[0], dtype=complex), lam)


class DiagonalPart(RationalMatrix):
    def __init__(self, a: RationalMatrix):
        if a.shape[0] != a.shape[1]:
            raise ValidationError("diagonal part needs a square operand")
        self.a = a
        self.shape = a.shape

    @property
    def domain(self):
        return self.a.domain

    def evaluate(self, lam):
        return np.diag(np.diag(self.a.evaluate(lam)))


class HStack(RationalMatrix):
    def __init__(self, *parts: RationalMatrix):
        rows = {p.shape[0] for p in parts}
        if len(rows) != 1:
            raise ValidationError("hstack parts must have equal row counts")
        self.parts = parts
        self.shape = (rows.pop(), sum(p.shape[1] for p in parts))

    @property
    def domain(self):
        return _domain_of(*self.parts)

    def evaluate(self, lam):
        return np.hstack([p.evaluate(lam) for p in self.parts])


# --------------------------------------------------------------------------
# partitioned (output-canonical) form


@dataclass(frozen=True, eq=False)
class PartitionedRealization:
    """Realization with output map exactly ``[I_p 0]`` and no feedthrough."""

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    domain: str = CONTINUOUS

    def __post_init__(self):
        A11 = as_matrix(self.A11, "A11")
        p = A11.shape[0]
        if A11.shape != (p, p):
            raise ValidationError("A11 must be square")
        B1 = as_matrix(self.B1, "B1", rows=p)
        m = B1.shape[1]
        A22 = np.asarray(self.A22, dtype=float)
        r = A22.shape[0] if A22.size else 0
        A22 = as_matrix(A22.reshape(r, r), "A22")
        A12 = as_matrix(np.asarray(self.A12, dtype=float).reshape(p, r), "A12")
        A21 = as_matrix(np.asarray(self.A21, dtype=float).reshape(r, p), "A21")
        B2 = as_matrix(np.asarray(self.B2, dtype=float).reshape(r, m), "B2")
        check_domain(self.domain)
        for name, val in (("A11", A11), ("A12", A12), ("A21", A21), ("A22", A22),
                          ("B1", B1), ("B2", B2)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def p(self):
        return self.A11.shape[0]

    @property
    def r(self):
        """Number of hidden states ``n - p``."""
        return self.A22.shape[0]

    @property
    def n(self):
        return self.p + self.r

    @property
    def m(self):
        return self.B1.shape[1]

    @property
    def A(self):
        return np.block([[self.A11, self.A12], [self.A21, self.A22]])

    @property
    def B(self):
        return np.vstack([self.B1, self.B2])

    @property
    def C(self):
        return np.hstack([np.eye(self.p), np.zeros((self.p, self.r))])

    def to_statespace(self) -> StateSpace:
        return StateSpace(self.A, self.B, self.C, np.zeros((self.p, self.m)), self.domain)

    @classmethod
    def from_blocks(cls, A, B, p, domain=CONTINUOUS):
        """Split a realization already in ``C = [I 0]`` coordinates."""
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        return cls(A[:p, :p], A[:p, p:], A[p:, :p], A[p:, p:], B[:p], B[p:], domain)


def output_canonical_transform(C) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(T, T^{-1})`` with ``C T^{-1} = [I 0]``.

    The completion rows are an orthonormal basis of ``rowspace(C)``'s
    orthogonal complement; ``C = [I 0]`` gives ``T = I`` exactly.
    """
    C = np.asarray(C, dtype=float)
    p, n = C.shape
    if numerical_rank(C) != p:
        raise RegularityError(f"C ({p}x{n}) does not have full row rank")
    if np.array_equal(C, np.hstack([np.eye(p), np.zeros((p, n - p))])):
        return np.eye(n), np.eye(n)
    Cbar = orthonormal_complement(C)
    T = np.vstack([C, Cbar])
    # rows of Cbar are orthonormal and orthogonal to C, so the inverse is explicit
    Cpinv = np.linalg.solve(C @ C.T, C).T
    Tinv = np.hstack([Cpinv, Cbar.T])
    return T, Tinv


def to_output_canonical(sys: StateSpace) -> tuple[PartitionedRealization, np.ndarray]:
    """Change state coordinates so the output map becomes ``[I_p 0]``."""
    if sys.n < sys.p:
        raise RegularityError(f"C has more rows ({sys.p}) than states ({sys.n})")
    if np.any(sys.D != 0):
        raise FeedthroughError("the system has a nonzero feedthrough D")
    T, Tinv = output_canonical_transform(sys.C)
    A = T @ sys.A @ Tinv
    B = T @ sys.B
    return PartitionedRealization.from_blocks(A, B, sys.p, sys.domain), T


# --------------------------------------------------------------------------
# minimality and McMillan degree


def controllable_basis(A, B, tol_abs: float):
    """Orthonormal basis of the controllable subspace by the staircase method.

    Returns ``(Z, singular_values)`` where ``singular_values`` collects the
    singular values on which each rank decision was taken.
    """
    n = A.shape[0]
    if n == 0 or B.shape[1] == 0:
        return np.zeros((n, 0)), []
    Z = np.eye(n)
    Ak, Bk = A.copy(), B.copy()
    nc = 0
    decisions = []
    while nc < n and Bk.size:
        U, s, _ = np.linalg.svd(Bk)
        decisions.extend(s.tolist())
        r = int(np.count_nonzero(s > tol_abs))
        if r == 0:
            break
        Z[:, nc:] = Z[:, nc:] @ U
        At = U.T @ Ak @ U
        nc += r
        Bk = At[r:, :r]
        Ak = At[r:, r:]
    return Z[:, :nc], decisions


@dataclass(frozen=True)
class DegreeResult:
    """McMillan degree with its split into finite and infinite poles."""

    degree: int
    finite: int
    infinite: int
    borderline: bool = False

    def __int__(self):
        return self.degree

    def __index__(self):
        return self.degree


def minimal_order(A, B, C, tol_rel: float = 1e-9):
    """Order of a minimal subrealization of ``(A, B, C)``; returns ``(order, borderline, Amin)``."""
    n = A.shape[0]
    if n == 0:
        return 0, False, np.zeros((0, 0))
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2) if B.size else 0.0,
                np.linalg.norm(C, 2) if C.size else 0.0, np.finfo(float).tiny)
    tol = tol_rel * scale
    Zc, s1 = controllable_basis(A, B, tol)
    Ac = Zc.T @ A @ Zc
    Cc = C @ Zc
    Zo, s2 = controllable_basis(Ac.T, Cc.T, tol)
    Amin = Zo.T @ Ac @ Zo
    decisions = np.asarray(s1 + s2)
    borderline = bool(np.any((decisions > tol / 10) & (decisions < tol * 10)))
    return Zo.shape[1], borderline, Amin


def minimal_realization(A, B, C, tol_rel: float = 1e-9):
    """Controllable and observable part ``(Am, Bm, Cm)`` of ``(A, B, C)``."""
    A, B, C = (np.asarray(x, dtype=float) for x in (A, B, C))
    n = A.shape[0]
    if n == 0:
        return A, B, C
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2) if B.size else 0.0,
                np.linalg.norm(C, 2) if C.size else 0.0, np.finfo(float).tiny)
    Zc, _ = controllable_basis(A, B, tol_rel * scale)
    Ac, Bc, Cc = Zc.T @ A @ Zc, Zc.T @ B, C @ Zc
    Zo, _ = controllable_basis(Ac.T, Cc.T, tol_rel * scale)
    return Zo.T @ Ac @ Zo, Zo.T @ Bc, Cc @ Zo


def _mobius_proper(R: PencilRealization, lam0: float):
    """Proper realization in ``mu`` of ``R(lam0 + 1/mu)``.

    Poles of ``R`` at infinity become poles at ``mu = 0``.
    """
    S = lam0 * R.E - R.A
    Sinv = np.linalg.inv(S)
    Eh = Sinv @ R.E
    B0 = R.input_constant - lam0 * R.input_slope
    Ah = -Eh
    Bh = -(Eh @ Sinv @ B0 + Sinv @ R.input_slope)
    Dh = R.D + R.C @ Sinv @ B0
    return Ah, Bh, R.C, Dh


def choose_center(R: PencilRealization, rng=None, max_tries: int = 100) -> float:
    """A real point that is not a pole of ``R``, well conditioned for the pole pencil."""
    rng = np.random.default_rng(2024) if rng is None else rng
    scale = 1.0 + np.linalg.norm(R.A, 2) / max(np.linalg.norm(R.E, 2), 1.0)
    for _ in range(max_tries):
        lam0 = float(rng.uniform(-1.0, 1.0) * scale)
        if R.n == 0 or np.linalg.cond(lam0 * R.E - R.A) < 1e8:
            return lam0
    raise ValidationError("could not find a non-pole center for the pencil")


def mcmillan_degree(R: RationalMatrix, tol_rel: float = 1e-9, rng=None) -> DegreeResult:
    """Total pole order of a realization-backed rational matrix, finite plus infinite."""
    if isinstance(R, Constant):
        return DegreeResult(0, 0, 0)
    if isinstance(R, StateSpace):
        order, borderline, _ = minimal_order(R.A, R.B, R.C, tol_rel)
        return DegreeResult(order, order, 0, borderline)
    if isinstance(R, PencilRealization):
        if R.n == 0:
            return DegreeResult(0, 0, 0)
        lam0 = choose_center(R, rng)
        Ah, Bh, Ch, _ = _mobius_proper(R, lam0)
        order, borderline, Amin = minimal_order(Ah, Bh, Ch, tol_rel)
        if order == 0:
            return DegreeResult(0, 0, 0, borderline)
        mu = np.linalg.eigvals(Amin)
        infinite = int(np.count_nonzero(np.abs(mu) <= 1e-6 * max(1.0, np.linalg.norm(Amin, 2))))
        return DegreeResult(order, order - infinite, infinite, borderline)
    raise ValidationError(f"{type(R).__name__} is not realization-backed")


@dataclass(frozen=True)
class RankCondition:
    name: str
    passed: bool
    margin: float
    worst_lambda: complex | None = None


@dataclass(frozen=True)
class MinimalityReport:
    conditions: tuple

    @property
    def minimal(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name) -> RankCondition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _relative_margin(M, k):
    s = np.linalg.svd(M, compute_uv=False)
    if len(s) < k or s[0] == 0:
        return 0.0
    return float(s[k - 1] / s[0])


def _sample_points(centers, rng, count):
    radius = 2.0 * max([1.0] + [abs(c) for c in centers])
    r = radius * np.sqrt(rng.uniform(size=count))
    theta = rng.uniform(0, 2 * np.pi, size=count)
    return list(r * np.exp(1j * theta))


def minimality_check(R: PencilRealization, rng=None, nrandom: int = 20,
                     tol_rel: float = 1e-10) -> MinimalityReport:
    """Evaluate the four rank conditions characterizing minimality of a pencil realization.

    Finite-frequency conditions are tested at every finite generalized
    eigenvalue of the pole pencil plus ``nrandom`` random points. For a
    centered realization the input conditions use ``B (alpha - lam beta)``
    and ``[E B]``.
    """
    rng = np.random.default_rng(7) if rng is None else rng
    n = R.n
    gev = list(R.finite_poles_candidates())
    points = gev + _sample_points(gev, rng, nrandom)

    def finite(name, build):
        worst, worst_lam = np.inf, None
        for lam in points:
            margin = _relative_margin(build(lam), n)
            if margin < worst:
                worst, worst_lam = margin, lam
        return RankCondition(name, bool(worst > tol_rel), worst, worst_lam)

    ctrl_finite = finite("input_finite",
                         lambda lam: np.hstack([R.A - lam * R.E, R.input_pencil(lam)]))
    obs_finite = finite("output_finite", lambda lam: np.vstack([R.A - lam * R.E, R.C]))
    if R.center is not None:
        inf_in = np.hstack([R.E, R.B])
    else:
        inf_in = np.hstack([R.E, R.F])
    m_in = _relative_margin(inf_in, n) if n else 1.0
    m_out = _relative_margin(np.vstack([R.E, R.C]), n) if n else 1.0
    return MinimalityReport((
        ctrl_finite,
        RankCondition("input_infinite", bool(m_in > tol_rel), m_in),
        obs_finite,
        RankCondition("output_infinite", bool(m_out > tol_rel), m_out),
    ))


# --------------------------------------------------------------------------
# system files


def system_to_dict(sys: StateSpace, name: str = "system") -> dict:
    return {
        "name": name,
        "domain": sys.domain,
        "A": sys.A.tolist(),
        "B": sys.B.tolist(),
        "C": sys.C.tolist(),
        "D": sys.D.tolist(),
    }


def _matrix_field(data, key, rows=None, cols=None):
    if key not in data:
        raise ValidationError(f"missing field {key!r}")
    raw = data[key]
    if not isinstance(raw, list) or any(not isinstance(row, list) for row in raw):
        raise ValidationError(f"field {key!r} must be a list of rows")
    if len({len(row) for row in raw}) > 1:
        raise ValidationError(f"field {key!r} has rows of unequal length")
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"field {key!r} has non-numeric entries") from exc
    if arr.size == 0:
        arr = np.zeros((rows or 0, cols or 0))
    return as_matrix(arr, key, rows=rows, cols=cols)


def system_from_dict(data: dict) -> tuple[StateSpace, str]:
    if not isinstance(data, dict):
        raise ValidationError("system file must contain a JSON object")
    domain = data.get("domain", CONTINUOUS)
    check_domain(domain)
    A = _matrix_field(data, "A")
    n = A.shape[0]
    B = _matrix_field(data, "B", rows=n)
    C = _matrix_field(data, "C", cols=n)
    D = _matrix_field(data, "D", rows=C.shape[0], cols=B.shape[1]) if "D" in data else \
        np.zeros((C.shape[0], B.shape[1]))
    return StateSpace(A, B, C, D, domain), str(data.get("name", "system"))


def load_system(path) -> tuple[StateSpace, str]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return system_from_dict(data)


def random_points(rng, count: int, radius: float = 2.0) -> list:
    """``count`` points uniformly distributed in the disk of the given radius."""
    r = radius * np.sqrt(rng.uniform(size=count))
    theta = rng.uniform(0, 2 * np.pi, size=count)
    return list(r * np.exp(1j * theta))


def sample_grid(R_list: Sequence[RationalMatrix], rng, count: int = 20,
                radius: float | None = None, max_retries: int = 50) -> list:
    """Random sample points at which every matrix in ``R_list`` evaluates cleanly."""
    if radius is None:
        spectral = [1.0]
        for R in R_list:
            if isinstance(R, StateSpace) and R.n:
                spectral.append(float(np.max(np.abs(R.poles))))
        radius = 2.0 * max(spectral)
    points = []
    attempts = 0
    while len(points) < count:
        if attempts > count + max_retries:
            raise PoleHitError("could not find enough sample points away from poles", lam=None)
        attempts += 1
        lam = random_points(rng, 1, radius)[0]
        try:
            for R in R_list:
                R.evaluate(lam)
        except PoleHitError:
            continue
        points.append(lam)
    return points
