"""Numerical certificates: coprimeness, pointwise identities, DSF probes.

Coprimeness of ``[M N]`` means the compound matrix has no finite or infinite
zeros. It is certified on a pencil realization ``S(lam)`` of ``[M N]``:

* finite: ``[[A - lam E, B - lam F], [C, D]]`` keeps full row rank at every
  finite pole, every zero of ``M`` and random points;
* infinite: ``[E F]`` has full row rank and the proper realization of
  ``[M N](lam0 + 1/mu)`` has a full-row-rank system matrix at ``mu = 0``.

Margins are smallest relevant singular values divided by the largest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import PoleHitError, ValidationError
from .matrixnum import relative_error, stability_predicate
from .realization import (
    CONTINUOUS,
    Constant,
    PencilRealization,
    RationalMatrix,
    StateSpace,
    _mobius_proper,
    choose_center,
    minimal_realization,
    random_points,
    sample_grid,
)

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    worst_lambda: complex | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        lam = None if self.worst_lambda is None else [float(np.real(self.worst_lambda)),
                                                    float(np.imag(self.worst_lambda))]
        margin = float(self.margin) if np.isfinite(self.margin) else None
        out = {"name": self.name, "pass": bool(self.passed), "margin": margin, "worst_lambda": lam}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass(frozen=True)
class Report:
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __add__(self, other: "Report") -> "Report":
        return Report(tuple(self.checks) + tuple(other.checks))

    def to_dict(self) -> dict:
        return {"checks": [c.to_dict() for c in self.checks]}


# --------------------------------------------------------------------------
# pencil assembly


@dataclass(frozen=True)
class _Parts:
    A: np.ndarray
    E: np.ndarray
    B: np.ndarray
    F: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]


def _parts(R: RationalMatrix) -> _Parts:
    if isinstance(R, StateSpace):
        n = R.n
        return _Parts(R.A, np.eye(n), R.B, np.zeros_like(R.B), R.C, R.D)
    if isinstance(R, PencilRealization):
        return _Parts(R.A, R.E, R.input_constant, R.input_slope, R.C, R.D)
    if isinstance(R, Constant):
        p, m = R.shape
        z = np.zeros((0, 0))
        return _Parts(z, z, np.zeros((0, m)), np.zeros((0, m)), np.zeros((p, 0)), R.value.real)
    raise ValidationError(f"{type(R).__name__} is not realization-backed")


def _hstack(a: _Parts, b: _Parts) -> _Parts:
    bd = scipy.linalg.block_diag
    za = np.zeros((a.n, b.B.shape[1]))
    zb = np.zeros((b.n, a.B.shape[1]))
    return _Parts(bd(a.A, b.A), bd(a.E, b.E),
                  np.block([[a.B, za], [zb, b.B]]), np.block([[a.F, za], [zb, b.F]]),
                  np.hstack([a.C, b.C]), np.hstack([a.D, b.D]))


def _lambda_minus(w: _Parts) -> _Parts:
    """Parts of ``lam I - W``; the ``lam I`` term uses ``p`` states with ``E = 0``."""
    p = w.D.shape[0]
    bd = scipy.linalg.block_diag
    return _Parts(bd(w.A, np.eye(p)), bd(w.E, np.zeros((p, p))),
                  np.vstack([-w.B, np.zeros((p, p))]), np.vstack([-w.F, np.eye(p)]),
                  np.hstack([w.C, np.eye(p)]), -w.D)


def _to_pencil(parts: _Parts, domain) -> PencilRealization:
    return PencilRealization(parts.A, parts.E, parts.B, parts.C, parts.D, F=parts.F,
                             domain=domain or CONTINUOUS)


def pair_pencil(W: RationalMatrix, V: RationalMatrix, reduce: bool = True) -> PencilRealization:
    """Pencil realization of ``[lam I - W, V]``.

    When ``W`` and ``V`` are state-space systems sharing ``A`` and ``C`` (as a
    viable pair does) the shared state is used once and reduced to a minimal
    realization.
    """
    if W.shape[0] != W.shape[1] or V.shape[0] != W.shape[0]:
        raise ValidationError("W must be p x p and V must have p rows")
    p = W.shape[0]
    domain = W.domain or V.domain
    shared = (isinstance(W, StateSpace) and isinstance(V, StateSpace)
              and W.A.shape == V.A.shape and np.array_equal(W.A, V.A) and np.array_equal(W.C, V.C))
    if shared:
        A, B, C = W.A, np.hstack([-W.B, V.B]), W.C
        if reduce:
            A, B, C = minimal_realization(A, B, C)
        blk = scipy.linalg.block_diag
        r, m = A.shape[0], V.shape[1]
        Bp = np.vstack([B, np.zeros((p, p + m))])
        Fp = np.vstack([np.zeros((r, p + m)), np.hstack([np.eye(p), np.zeros((p, m))])])
        parts = _Parts(blk(A, np.eye(p)), blk(np.eye(r), np.zeros((p, p))), Bp, Fp,
                       np.hstack([C, np.eye(p)]), np.hstack([-W.D, V.D]))
        return _to_pencil(parts, domain)
    return _to_pencil(_hstack(_lambda_minus(_parts(W)), _parts(V)), domain)


def compound_pencil(M: RationalMatrix, N: RationalMatrix) -> PencilRealization:
    """Pencil realization of ``[M N]`` by stacking the two realizations."""
    if M.shape[0] != N.shape[0]:
        raise ValidationError("M and N must have the same number of rows")
    return _to_pencil(_hstack(_parts(M), _parts(N)), M.domain or N.domain)


# --------------------------------------------------------------------------
# coprimeness


def _row_margin(S, rows):
    s = np.linalg.svd(S, compute_uv=False)
    if rows == 0:
        return 1.0
    if len(s) < rows or s[0] == 0:
        return 0.0
    return float(s[rows - 1] / s[0])


def _square_zeros(P: PencilRealization, cols: int) -> np.ndarray:
    """Finite zeros of the square leading ``cols`` columns (``cols`` = row count)."""
    n = P.n
    B0 = P.input_constant[:, :cols]
    F = P.input_slope[:, :cols]
    S0 = np.block([[P.A, B0], [P.C, P.D[:, :cols]]])
    S1 = np.block([[P.E, F], [np.zeros((P.shape[0], n + cols))]])
    if S0.size == 0:
        return np.zeros(0, complex)
    with np.errstate(all="ignore"):
        ev = scipy.linalg.eigvals(S0, S1)
    return ev[np.isfinite(ev)]


def certify_pencil(P: PencilRealization, rows: int | None = None, rng=None,
                   nrandom: int = 30, tol: float = DEFAULT_TOL) -> Report:
    """No-zero certificate for a pencil realization of a compound ``[M N]``.

    ``rows`` is the row count ``p``; the first ``p`` columns are taken as
    ``M`` when collecting candidate zero locations.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    p = P.shape[0] if rows is None else rows
    n = P.n
    poles = list(P.finite_poles_candidates())
    zeros = list(_square_zeros(P, p))
    targeted = poles + zeros
    radius = 2.0 * max([1.0] + [abs(z) for z in targeted])
    points = targeted + random_points(rng, nrandom, radius)
    worst, worst_lam = np.inf, None
    for lam in points:
        margin = _row_margin(P.system_pencil(lam), n + p)
        if margin < worst:
            worst, worst_lam = margin, complex(lam)
    finite = Check("finite_rank", bool(worst > tol), worst, worst_lam,
                   f"{len(poles)} poles, {len(zeros)} zeros of M, {nrandom} random points")
    EF = np.hstack([P.E, P.input_slope])
    m_ef = _row_margin(EF, n) if n else 1.0
    pencil_inf = Check("infinite_pencil", bool(m_ef > tol), m_ef, None)
    if n:
        lam0 = choose_center(P, rng)
        Ah, Bh, Ch, Dh = _mobius_proper(P, lam0)
        Am, Bm, Cm = minimal_realization(Ah, Bh, Ch)
        S = np.block([[Am, Bm], [Cm, Dh]])
        m_inf = _row_margin(S, Am.shape[0] + p)
    else:
        m_inf = _row_margin(P.D, p)
    zero_inf = Check("infinite_rank", bool(m_inf > tol), m_inf, None)
    return Report((finite, pencil_inf, zero_inf))


def coprimeness_certificate(W: RationalMatrix, V: RationalMatrix, rng=None, nrandom: int = 30,
                            tol: float = DEFAULT_TOL) -> Report:
    """Certify that ``[lam I - W, V]`` has no finite or infinite zeros."""
    return certify_pencil(pair_pencil(W, V), W.shape[0], rng, nrandom, tol)


def left_coprime_certificate(M: RationalMatrix, N: RationalMatrix, rng=None,
                             nrandom: int = 30, tol: float = DEFAULT_TOL) -> Report:
    """Certify that ``[M N]`` has no finite or infinite zeros."""
    return certify_pencil(compound_pencil(M, N), M.shape[0], rng, nrandom, tol)


# --------------------------------------------------------------------------
# structure-function probe


@dataclass(frozen=True)
class ProbeFinding:
    row: int
    lam: complex
    margin: float
    residue: float
    noncoprime: bool


@dataclass(frozen=True)
class ProbeResult:
    findings: tuple
    tol: float

    @property
    def coprime(self) -> bool:
        return not any(f.noncoprime for f in self.findings)

    def report(self) -> Report:
        if not self.findings:
            return Report((Check("dsf_coprime", True, 1.0, None, "no unstable diagonal zeros"),))
        worst = min(self.findings, key=lambda f: f.margin)
        bad = [f for f in self.findings if f.noncoprime]
        detail = f"{len(self.findings)} unstable diagonal zeros, {len(bad)} rank drops"
        return Report((Check("dsf_coprime", self.coprime, worst.margin, worst.lam, detail),))


def _shifted(R, lam, rel=1e-8):
    """``R`` at ``lam`` or, on a pole hit, at a nearby point; returns ``(value, shifted)``."""
    try:
        return R.evaluate(lam), False
    except PoleHitError:
        return R.evaluate(lam + rel * (1 + abs(lam)) * (1 + 1j)), True


def diagonal_zeros(W: StateSpace, i: int) -> np.ndarray:
    """Zeros of ``lam - W_ii(lam)`` from a minimal realization of ``W_ii``."""
    A, b, c = minimal_realization(W.A, W.B[:, i:i + 1], W.C[i:i + 1, :])
    d = W.D[i, i]
    return np.linalg.eigvals(np.block([[np.array([[d]]), c], [b, A]]))


def dsf_coprimeness_probe(dsf, tol: float = DEFAULT_TOL) -> ProbeResult:
    """Look for the loss of coprimeness of ``[I - Q, P]`` at unstable diagonal zeros.

    At a zero ``lam_z`` of ``lam - W_ii`` outside the stability region, row
    ``i`` of ``[I - Q, P]`` has a pole (nonzero residue of row ``i`` of
    ``[W - D, V]``) while ``(I - Q)^{-1} = (lam I - W)^{-1} (lam I - D)`` drops
    rank, so the pole cancels in ``L``: the factorization is not coprime.
    """
    vp = dsf.source
    if vp is None or not isinstance(vp.W, StateSpace):
        raise ValidationError("the probe needs a DSF built from a realized viable pair")
    W, V = vp.W, vp.V
    p = W.shape[0]
    stable = stability_predicate(W.domain)
    findings = []
    for i in range(p):
        for lz in diagonal_zeros(W, i):
            lz = complex(lz)
            if stable(lz):
                continue
            Wz, shifted = _shifted(W, lz)
            Vz, _ = _shifted(V, lz)
            lam = lz
            Dz = np.diag(np.diag(Wz))
            try:
                X = np.linalg.solve(lam * np.eye(p) - Wz, lam * np.eye(p) - Dz)
                s = np.linalg.svd(X, compute_uv=False)
                margin = float(s[-1] / s[0]) if s[0] > 0 else 0.0
            except np.linalg.LinAlgError:
                margin = np.inf
            row = np.hstack([(Wz - Dz)[i], Vz[i]])
            ref = max(np.linalg.norm(np.hstack([Wz, Vz])), 1e-300)
            residue = float(np.linalg.norm(row) / ref)
            threshold = 1e-4 if shifted else tol
            findings.append(ProbeFinding(i, lz, margin, residue,
                                         bool(margin < threshold and residue > tol)))
    return ProbeResult(tuple(findings), tol)


# --------------------------------------------------------------------------
# pointwise identities


def identity_suite(sys: StateSpace, vp=None, dsf=None, cf=None, rng=None, nsamples: int = 20,
                   tol: float = DEFAULT_TOL, diag_tol: float = 1e-10) -> Report:
    """Worst relative errors of ``L = (lam I - W)^{-1} V = (I - Q)^{-1} P = M^{-1} N``.

    All identities share one grid of ``nsamples`` points avoiding poles.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    evaluators = [sys]
    if vp is not None:
        evaluators += [vp.W, vp.V]
    if dsf is not None:
        evaluators += [dsf.Q, dsf.P]
    if cf is not None:
        evaluators += [cf.joint]
    grid = sample_grid(evaluators, rng, nsamples)
    p = sys.p
    checks = []

    def worst_of(fn):
        worst, at = 0.0, None
        for lam in grid:
            err = fn(lam)
            if err >= worst:
                worst, at = err, complex(lam)
        return worst, at

    if vp is not None:
        err, at = worst_of(lambda lam: relative_error(
            sys.evaluate(lam),
            np.linalg.solve(lam * np.eye(p) - vp.W.evaluate(lam), vp.V.evaluate(lam))))
        checks.append(Check("viable_identity", err < tol, err, at))
    if dsf is not None:
        err, at = worst_of(lambda lam: relative_error(sys.evaluate(lam), dsf.transfer(lam)))
        checks.append(Check("dsf_identity", err < tol, err, at))
        if vp is not None:
            def diag_err(lam):
                scale = max(np.linalg.norm(vp.W.evaluate(lam)), 1e-300)
                return float(np.max(np.abs(np.diag(dsf.Q.evaluate(lam))))) / scale if p else 0.0
            err, at = worst_of(diag_err)
            checks.append(Check("q_zero_diagonal", err < diag_tol, err, at))
    if cf is not None:
        err, at = worst_of(lambda lam: relative_error(sys.evaluate(lam), cf.transfer(lam)))
        checks.append(Check("factor_identity", err < tol, err, at))
    return Report(tuple(checks))
