"""Stable left coprime factors ``L = M^{-1} N``.

Two constructions are provided: one from a stable viable pair and a
stable left factor, and the output-injection parameterization

    [M N] = U^{-1} [ (A - F C) - lam I | -F   B - F D ]
                   [        C         |  I      D     ]

Both return a :class:`CoprimeFactors` holding one joint realization of
``[M N]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import UnstableError, ValidationError
from .matrixnum import CONTINUOUS, DISCRETE, as_matrix, check_domain, is_stable_matrix
from .realization import StateSpace, _frozen
from .structure import ViablePair

MAX_CONDITION = 1e12


def _check_invertible(M, name):
    cond = np.linalg.cond(M) if M.size else 1.0
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ValidationError(f"{name} is singular or ill-conditioned (condition {cond:.3e})")


def _unstable(eigs, domain):
    if domain == CONTINUOUS:
        return [complex(e) for e in eigs if e.real >= 0]
    return [complex(e) for e in eigs if abs(e) >= 1]


@dataclass(frozen=True, eq=False)
class LeftFactor:
    """Parameters ``(Ax, T4, T5)`` of the stable left factor applied to ``[lam I - W, V]``."""

    Ax: np.ndarray
    T4: np.ndarray
    T5: np.ndarray
    domain: str = CONTINUOUS

    def __post_init__(self):
        Ax = as_matrix(self.Ax, "Ax")
        p = Ax.shape[0]
        if Ax.shape != (p, p):
            raise ValidationError("Ax must be square")
        T4 = as_matrix(self.T4, "T4", rows=p, cols=p)
        T5 = as_matrix(self.T5, "T5", rows=p, cols=p)
        check_domain(self.domain)
        _check_invertible(T4, "T4")
        _check_invertible(T5, "T5")
        bad = _unstable(np.linalg.eigvals(Ax), self.domain)
        if bad:
            raise UnstableError(f"Ax has eigenvalues outside the {self.domain} stability region",
                                eigenvalues=bad)
        for name, val in (("Ax", Ax), ("T4", T4), ("T5", T5)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def p(self):
        return self.Ax.shape[0]


def default_left_factor(p: int, domain: str = CONTINUOUS) -> LeftFactor:
    """``Ax = -I`` (continuous) or ``0.2 I`` (discrete) with ``T4 = T5 = I``."""
    check_domain(domain)
    scale = -1.0 if domain == CONTINUOUS else 0.2
    return LeftFactor(scale * np.eye(p), np.eye(p), np.eye(p), domain)


@dataclass(frozen=True, eq=False)
class CoprimeFactors:
    """Joint realization of ``[M N]``; the first ``m_cols`` columns belong to ``M``."""

    joint: StateSpace
    m_cols: int
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.joint.p != self.m_cols or self.joint.m < self.m_cols:
            raise ValidationError("M must be square: m_cols must equal the output count")

    @property
    def p(self):
        return self.m_cols

    @property
    def domain(self):
        return self.joint.domain

    @property
    def M(self) -> StateSpace:
        return self.joint.columns(slice(0, self.m_cols))

    @property
    def N(self) -> StateSpace:
        return self.joint.columns(slice(self.m_cols, None))

    @property
    def poles(self) -> np.ndarray:
        return self.joint.poles

    def is_stable(self) -> bool:
        return is_stable_matrix(self.joint.A, self.domain)

    def transfer(self, lam) -> np.ndarray:
        """``M(lam)^{-1} N(lam)``."""
        val = self.joint.evaluate(lam)
        return np.linalg.solve(val[:, :self.m_cols], val[:, self.m_cols:])


def stable_coprime_from_viable(vp: ViablePair, left: LeftFactor) -> CoprimeFactors:
    """Stable factors ``[M N] = X [lam I - W, V]`` of a stable viable pair.

    ``X`` is the stable left factor described by ``left``.

    The joint state matrix is block upper triangular with diagonal blocks
    ``Ax`` and ``A22 + K A12``, so its spectrum is their union.
    """
    base, K = vp.base, vp.K
    p, r = base.p, base.r
    if left.p != p:
        raise ValidationError(f"the left factor is {left.p}x{left.p}, the system has {p} outputs")
    Ak = vp.pole_matrix
    bad = _unstable(np.linalg.eigvals(Ak), base.domain) if r else []
    if bad:
        raise UnstableError("the viable pair has unstable poles (A22 + K A12 is not stable)",
                            eigenvalues=bad)
    if left.domain != base.domain:
        raise ValidationError("the left factor and the system use different domains")
    Ax, T4, T5 = left.Ax, left.T4, left.T5
    A11k = base.A11 - base.A12 @ K
    G = vp.coupling
    A = np.block([[Ax, T4 @ base.A12], [np.zeros((r, p)), Ak]])
    BM = np.vstack([Ax @ T4 - T4 @ A11k, -G])
    BN = np.vstack([T4 @ base.B1, K @ base.B1 + base.B2])
    C = np.hstack([T5, np.zeros((p, r))])
    D = np.hstack([T5 @ T4, np.zeros((p, base.m))])
    joint = StateSpace(A, np.hstack([BM, BN]), C, D, base.domain)
    return CoprimeFactors(joint, p)


def _uncontrollable_modes(A, B, tol_rel=1e-9):
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2), np.linalg.norm(B, 2) if B.size else 0.0)
    modes = []
    for mu in np.linalg.eigvals(A) if n else []:
        s = np.linalg.svd(np.hstack([A - mu * np.eye(n), B]), compute_uv=False)
        if s[-1] <= tol_rel * scale:
            modes.append(complex(mu))
    return modes


def output_injection_factors(sys: StateSpace, F, U=None) -> CoprimeFactors:
    """Left coprime factors by output injection ``F`` and left scaling ``U^{-1}``.

    ``A - F C`` must be stable. A realization that is only stabilizable (not
    controllable) is accepted with a warning and a note on the result.
    """
    n, p = sys.n, sys.p
    F = as_matrix(F, "F", rows=n, cols=p) if n else np.zeros((0, p))
    U = np.eye(p) if U is None else as_matrix(U, "U", rows=p, cols=p)
    _check_invertible(U, "U")
    Acl = sys.A - F @ sys.C
    bad = _unstable(np.linalg.eigvals(Acl), sys.domain) if n else []
    if bad:
        raise UnstableError(f"A - F C is not stable over the {sys.domain} domain",
                            eigenvalues=bad)
    notes = ()
    unc = _uncontrollable_modes(sys.A, sys.B)
    if unc:
        msg = "realization is not controllable; uncontrollable modes " + \
            ", ".join(f"{m:.6g}" for m in unc)
        warnings.warn(msg, stacklevel=2)
        notes = (msg,)
    Uinv = np.linalg.inv(U)
    B = np.hstack([-F, sys.B - F @ sys.D])
    D = np.hstack([np.eye(p), sys.D])
    joint = StateSpace(Acl, B, Uinv @ sys.C, Uinv @ D, sys.domain)
    return CoprimeFactors(joint, p, notes)


def injection_gain(base, K, Ax, T4=None) -> np.ndarray:
    """Injection gain ``F = [Ah - A11 + A12 K ; -K Ah + A22 K - A21]`` with ``Ah = T4^{-1} Ax T4``.

    Output injection with ``-F`` (``A + F C``) in the coordinates of ``base``
    reproduces the factors of :func:`stable_coprime_from_viable`.
    """
    p, r = base.p, base.r
    K = np.zeros((r, p)) if K is None else np.asarray(K, dtype=float).reshape(r, p)
    Ax = as_matrix(Ax, "Ax", rows=p, cols=p)
    T4 = np.eye(p) if T4 is None else as_matrix(T4, "T4", rows=p, cols=p)
    _check_invertible(T4, "T4")
    Ah = np.linalg.solve(T4, Ax @ T4)
    F1 = Ah - base.A11 + base.A12 @ K
    F2 = -K @ Ah + base.A22 @ K - base.A21
    return np.vstack([F1, F2])


# --------------------------------------------------------------------------
# factor files


def factors_to_dict(cf: CoprimeFactors, name: str = "factors") -> dict:
    j = cf.joint
    return {
        "kind": "left_coprime_factors",
        "name": name,
        "domain": j.domain,
        "A": j.A.tolist(),
        "B": j.B.tolist(),
        "C": j.C.tolist(),
        "D": j.D.tolist(),
        "m_cols": cf.m_cols,
    }


def factors_from_dict(data: dict) -> tuple[CoprimeFactors, str]:
    from .realization import system_from_dict

    if not isinstance(data, dict):
        raise ValidationError("factor file must contain a JSON object")
    if data.get("kind", "left_coprime_factors") != "left_coprime_factors":
        raise ValidationError(f"unexpected kind {data.get('kind')!r}")
    joint, name = system_from_dict(data)
    m_cols = data.get("m_cols", joint.p)
    if not isinstance(m_cols, int) or isinstance(m_cols, bool):
        raise ValidationError("m_cols must be an integer")
    return CoprimeFactors(joint, m_cols), name


__all__ = [
    "CONTINUOUS",
    "DISCRETE",
    "CoprimeFactors",
    "LeftFactor",
    "default_left_factor",
    "factors_from_dict",
    "factors_to_dict",
    "injection_gain",
    "output_injection_factors",
    "stable_coprime_from_viable",
]
