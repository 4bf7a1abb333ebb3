import numpy as np
import pytest

from dsfkit.errors import DisconjugacyError, FeedthroughError, UnstableError, ValidationError
from dsfkit.factorization import (
    CoprimeFactors,
    LeftFactor,
    default_left_factor,
    injection_gain,
    output_injection_factors,
    stable_coprime_from_viable,
)
from dsfkit.matrixnum import real_schur, relative_error, reorder_schur
from dsfkit.realization import StateSpace, sample_grid
from dsfkit.riccati import RiccatiProblem, recover_viable, riccati_from_basis, solve_riccati
from dsfkit.structure import place_pair_poles, viable_pair

from systems import random_base, stable_pair_K, stable_targets


def antistable(rng, r):
    return [rng.uniform(0.5, 3.0) for _ in range(r)]


def problem_from_k0(rng, n=5, p=2, unique=True):
    """Plant blocks with F built from a known K0 and a stable Ax."""
    base = random_base(rng, n, p, 1)
    targets = antistable(rng, n - p) if unique else stable_targets(rng, n - p)
    K0 = place_pair_poles(base, targets, rng)
    Ax = np.diag(-rng.uniform(0.5, 1.0) - np.arange(p, dtype=float))
    F = injection_gain(base, K0, Ax)
    prob = RiccatiProblem(base.A11, base.A12, base.A21, base.A22, F[:p], F[p:])
    return prob, K0, Ax


def test_decoupled_problem_has_zero_solution():
    rng = np.random.default_rng(0)
    A21 = rng.standard_normal((2, 2))
    prob = RiccatiProblem(np.diag([1.0, 2.0]), np.zeros((2, 2)), A21, np.diag([3.0, 4.0]),
                          np.diag([-3.0, -4.0]), -A21)
    sol = solve_riccati(prob)
    np.testing.assert_array_equal(sol.K, np.zeros((2, 2)))
    assert sol.residual == 0.0


def test_full_output_problem_is_empty():
    prob = RiccatiProblem([[-1.0]], np.zeros((1, 0)), np.zeros((0, 1)), np.zeros((0, 0)),
                          [[0.0]], np.zeros((0, 1)))
    sol = solve_riccati(prob)
    assert sol.K.shape == (0, 1)
    np.testing.assert_allclose(sol.closed_spectrum, [-1.0])


def test_problem_shape_validation():
    with pytest.raises(ValidationError, match="F2"):
        RiccatiProblem(np.eye(1), np.ones((1, 2)), np.ones((2, 1)), np.eye(2), np.eye(1), np.ones((3, 1)))


@pytest.mark.parametrize("seed", range(10))
def test_known_solution_recovered(seed):
    rng = np.random.default_rng(seed)
    prob, K0, Ax = problem_from_k0(rng, n=int(rng.integers(3, 8)), p=int(rng.integers(1, 3)))
    sol = solve_riccati(prob)
    assert np.linalg.norm(sol.K - K0) < 1e-8 * max(1.0, np.linalg.norm(K0))
    assert sol.residual < prob.tolerance()
    assert np.all(sol.closed_spectrum.real < 0)
    assert sol.feasible == 1


@pytest.mark.parametrize("seed", range(5))
def test_preferred_spectrum_selects_solution(seed):
    rng = np.random.default_rng(100 + seed)
    prob, K0, Ax = problem_from_k0(rng, unique=False)
    sol = solve_riccati(prob, prefer=np.linalg.eigvals(Ax))
    assert np.linalg.norm(sol.K - K0) < 1e-8 * max(1.0, np.linalg.norm(K0))


@pytest.mark.parametrize("seed", range(5))
def test_eigenvector_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    prob, _, _ = problem_from_k0(rng)
    w, X = np.linalg.eig(prob.A_plus)
    stable = X[:, w.real < 0]
    K_ref = np.linalg.solve(stable[:prob.p].T, stable[prob.p:].T).T
    assert np.linalg.norm(solve_riccati(prob).K - K_ref.real) < 1e-8 * max(1, np.linalg.norm(K_ref))


@pytest.mark.parametrize("seed", range(5))
def test_ordering_within_subspace_is_irrelevant(seed):
    rng = np.random.default_rng(300 + seed)
    prob, _, _ = problem_from_k0(rng, n=6, p=3)
    form = real_schur(prob.A_plus)
    chosen = [b for b, ev in enumerate(form.block_eigs) if all(e.real < 0 for e in ev)]
    first = reorder_schur(form, chosen)
    lead = [b for b, (start, _) in enumerate(first.blocks) if start < prob.p]
    second = reorder_schur(first, [lead[-1]])
    assert not np.allclose(first.Q[:, :prob.p], second.Q[:, :prob.p])
    K1, _ = riccati_from_basis(prob, first.Q[:, :prob.p])
    K2, _ = riccati_from_basis(prob, second.Q[:, :prob.p])
    assert np.linalg.norm(K1 - K2) < 1e-8 * max(1.0, np.linalg.norm(K1))


def test_disconjugate_failure():
    prob = RiccatiProblem([[-1.0]], [[0.0]], [[-1.0]], [[-1.0]], [[0.0]], [[0.0]])
    with pytest.raises(DisconjugacyError) as info:
        solve_riccati(prob)
    assert info.value.best_condition > 1e12


def test_residual_definition():
    rng = np.random.default_rng(1)
    prob, K0, _ = problem_from_k0(rng)
    assert prob.residual(K0) < prob.tolerance()
    assert prob.residual(K0 + 1e-3) > prob.tolerance()


def test_scalar_recovery():
    # M = (lam - 2)/(lam + 1), N = 3/(lam + 1)
    joint = StateSpace([[-1.0]], [[-3.0, 3.0]], [[1.0]], [[1.0, 0.0]])
    rec = recover_viable(CoprimeFactors(joint, 1))
    assert rec.pair.W.evaluate(0.7)[0, 0] == pytest.approx(2.0)
    assert rec.pair.V.evaluate(0.7)[0, 0] == pytest.approx(3.0)
    assert rec.Ax[0, 0] == pytest.approx(-1.0)


@pytest.mark.parametrize("domain", ["continuous", "discrete"])
@pytest.mark.parametrize("seed", range(6))
def test_round_trip(seed, domain):
    rng = np.random.default_rng(400 + seed)
    p = int(rng.integers(1, 4))
    base = random_base(rng, p + int(rng.integers(0, 5)), p, 2, domain)
    vp = viable_pair(base, stable_pair_K(rng, base))
    left = default_left_factor(p, domain)
    cf = stable_coprime_from_viable(vp, left)
    rec = recover_viable(cf, prefer=np.linalg.eigvals(left.Ax))
    for lam in sample_grid([vp.W, vp.V, rec.pair.W, rec.pair.V], rng, 20):
        assert relative_error(vp.W.evaluate(lam), rec.pair.W.evaluate(lam)) < 1e-6
        assert relative_error(vp.V.evaluate(lam), rec.pair.V.evaluate(lam)) < 1e-6
    again = stable_coprime_from_viable(rec.pair, rec.left)
    for lam in sample_grid([cf.joint, again.joint], rng, 10):
        assert relative_error(cf.joint.evaluate(lam), again.joint.evaluate(lam)) < 1e-8


def test_output_injection_factors_recover():
    rng = np.random.default_rng(9)
    base = random_base(rng, 4, 2, 1)
    A = base.A - 5 * np.eye(4)
    sys_ = StateSpace(A, base.B, np.hstack([np.eye(2), np.zeros((2, 2))]), np.zeros((2, 1)))
    rec = recover_viable(output_injection_factors(sys_, np.zeros((4, 2))))
    for lam in sample_grid([sys_, rec.pair.W, rec.pair.V], rng, 20):
        assert rec.pair.identity_error(lam) < 1e-8
        lhs = np.linalg.solve(lam * np.eye(2) - rec.pair.W.evaluate(lam), rec.pair.V.evaluate(lam))
        assert relative_error(sys_.evaluate(lam), lhs) < 1e-8


def test_recovery_rejects_feedthrough_in_n():
    joint = StateSpace([[-1.0]], [[1.0, 1.0]], [[1.0]], [[1.0, 0.5]])
    with pytest.raises(FeedthroughError):
        recover_viable(CoprimeFactors(joint, 1))


def test_recovery_rejects_unstable_factors():
    joint = StateSpace([[1.0]], [[1.0, 1.0]], [[1.0]], [[1.0, 0.0]])
    with pytest.raises(UnstableError):
        recover_viable(CoprimeFactors(joint, 1))


def test_recovery_normalizes_feedthrough():
    rng = np.random.default_rng(12)
    base = random_base(rng, 5, 2, 1)
    vp = viable_pair(base, stable_pair_K(rng, base))
    T5 = np.array([[2.0, 1.0], [0.0, 1.0]])
    cf = stable_coprime_from_viable(vp, LeftFactor(-np.eye(2), np.eye(2), T5))
    rec = recover_viable(cf, prefer=[-1.0, -1.0])
    np.testing.assert_allclose(rec.left.T5, T5)
    for lam in sample_grid([vp.W, rec.pair.W], rng, 10):
        assert relative_error(vp.W.evaluate(lam), rec.pair.W.evaluate(lam)) < 1e-6
