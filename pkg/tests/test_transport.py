"""Transportation LP, polytope vertices, and mixture transport distances."""

import numpy as np
import pytest
from scipy.optimize import linprog

from slater_rom import (
    DomainError,
    Slater,
    SlaterMixture,
    TransportPlan,
    VertexBudgetError,
    enumerate_vertices,
    multimarginal_plan,
    mw2,
    solve_transportation_lp,
    two_column_vertices,
    w2_slater,
    w2_slater_sq,
)
from slater_rom.transport import approx_barycenter, pairwise_cost_tensor


def random_marginals(rng, p, q, with_zeros=False):
    a = rng.uniform(0.1, 1.0, size=p)
    b = rng.uniform(0.1, 1.0, size=q)
    if with_zeros:
        a[rng.integers(0, p)] = 0.0
    a /= a.sum()
    b /= b.sum()
    return a, b


def random_mixture(rng, size):
    w = rng.uniform(0.2, 1.0, size=size)
    comps = tuple(Slater(float(rng.uniform(0.3, 3.0)), float(rng.uniform(-3, 3)))
                  for _ in range(size))
    return SlaterMixture(comps, w / w.sum())


def scipy_lp_value(a, b, cost):
    """Independent LP oracle on the flattened transportation problem."""
    p, q = cost.shape
    A_eq = []
    for i in range(p):
        row = np.zeros((p, q))
        row[i, :] = 1.0
        A_eq.append(row.ravel())
    for j in range(q - 1):        # last column constraint is redundant
        col = np.zeros((p, q))
        col[:, j] = 1.0
        A_eq.append(col.ravel())
    res = linprog(cost.ravel(), A_eq=np.array(A_eq),
                  b_eq=np.concatenate([a, b[:-1]]), bounds=(0, None),
                  method="highs")
    assert res.status == 0
    return float(res.fun)


class TestTransportationSimplex:
    def test_against_scipy(self):
        rng = np.random.default_rng(67)
        for _ in range(30):
            p, q = rng.integers(1, 6, size=2)
            a, b = random_marginals(rng, p, q)
            cost = rng.uniform(0.0, 5.0, size=(p, q))
            value, plan = solve_transportation_lp(a, b, cost)
            assert value == pytest.approx(scipy_lp_value(a, b, cost), abs=1e-10)
            np.testing.assert_allclose(plan.matrix.sum(axis=1), a, atol=1e-12)
            np.testing.assert_allclose(plan.matrix.sum(axis=0), b, atol=1e-12)
            assert np.count_nonzero(plan.matrix > 1e-12) <= p + q - 1

    def test_zero_marginal_entries(self):
        rng = np.random.default_rng(68)
        a, b = random_marginals(rng, 4, 3, with_zeros=True)
        cost = rng.uniform(0.0, 5.0, size=(4, 3))
        value, plan = solve_transportation_lp(a, b, cost)
        assert value == pytest.approx(scipy_lp_value(a, b, cost), abs=1e-10)

    def test_deterministic(self):
        """Degenerate optima resolve to the same plan on every call."""
        a = np.array([0.5, 0.5])
        b = np.array([0.5, 0.5])
        cost = np.ones((2, 2))          # every feasible plan is optimal
        _, plan1 = solve_transportation_lp(a, b, cost)
        _, plan2 = solve_transportation_lp(a, b, cost)
        np.testing.assert_array_equal(plan1.matrix, plan2.matrix)

    def test_validation(self):
        with pytest.raises(DomainError):
            solve_transportation_lp([0.5, 0.5], [0.4, 0.4], np.ones((2, 2)))
        with pytest.raises(DomainError):
            solve_transportation_lp([-0.1, 1.1], [0.5, 0.5], np.ones((2, 2)))
        with pytest.raises(DomainError):
            solve_transportation_lp([0.5, 0.5], [1.0], np.ones((2, 2)))


class TestTransportPlanType:
    def test_validation(self):
        with pytest.raises(DomainError):
            TransportPlan(np.array([1.0]), np.array([1.0]), np.ones((2, 1)))
        with pytest.raises(DomainError):
            TransportPlan(np.array([1.0]), np.array([1.0]),
                          np.array([[-0.5]]))
        with pytest.raises(DomainError):
            TransportPlan(np.array([0.6, 0.4]), np.array([1.0]),
                          np.array([[0.5], [0.4]]))

    def test_support_and_cost(self):
        plan = TransportPlan(np.array([0.6, 0.4]), np.array([0.3, 0.7]),
                             np.array([[0.3, 0.3], [0.0, 0.4]]))
        assert plan.support == ((0, 0), (0, 1), (1, 1))
        assert plan.cost(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(2.5)


class TestMixtureDistance:
    def test_reduces_to_component_distance(self):
        rng = np.random.default_rng(69)
        for _ in range(10):
            a = Slater(float(rng.uniform(0.3, 3)), float(rng.uniform(-2, 2)))
            b = Slater(float(rng.uniform(0.3, 3)), float(rng.uniform(-2, 2)))
            d, plan = mw2(SlaterMixture((a,), (1.0,)), SlaterMixture((b,), (1.0,)))
            assert d == pytest.approx(w2_slater(a, b), rel=1e-14)
            assert plan.matrix[0, 0] == pytest.approx(1.0)

    def test_metric_properties(self):
        """Identity, symmetry, and the triangle inequality: the mixture
        distance is W2 between discrete measures on the component space."""
        rng = np.random.default_rng(70)
        for _ in range(25):
            m1 = random_mixture(rng, int(rng.integers(1, 4)))
            m2 = random_mixture(rng, int(rng.integers(1, 4)))
            m3 = random_mixture(rng, int(rng.integers(1, 4)))
            d11, _ = mw2(m1, m1)
            d12, _ = mw2(m1, m2)
            d21, _ = mw2(m2, m1)
            d13, _ = mw2(m1, m3)
            d23, _ = mw2(m2, m3)
            assert d11 <= 1e-12
            assert d12 == pytest.approx(d21, rel=1e-12, abs=1e-14)
            assert d13 <= d12 + d23 + 1e-12

    def test_plan_couples_weights(self):
        rng = np.random.default_rng(71)
        m1, m2 = random_mixture(rng, 3), random_mixture(rng, 2)
        d, plan = mw2(m1, m2)
        np.testing.assert_allclose(plan.matrix.sum(axis=1), m1.weights, atol=1e-12)
        np.testing.assert_allclose(plan.matrix.sum(axis=0), m2.weights, atol=1e-12)
        cost = np.array([[w2_slater_sq(c1, c2) for c2 in m2.components]
                         for c1 in m1.components])
        assert d**2 == pytest.approx(plan.cost(cost), abs=1e-13)


def _support_is_acyclic(matrix) -> bool:
    """Union-find cycle check on the bipartite support graph."""
    p, q = matrix.shape
    parent = list(range(p + q))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(matrix > 1e-12)):
        ri, rj = find(i), find(p + j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


class TestVertexEnumeration:
    def test_two_column_complete_and_extreme(self):
        """Every vertex is feasible with forest support, and minimizing any
        cost over the list reproduces the LP optimum."""
        rng = np.random.default_rng(77)
        for p in (2, 3, 5):
            a, b = random_marginals(rng, p, 2)
            verts = two_column_vertices(a, b)
            # doubled row x subset enumeration, minus infeasible combinations
            assert 1 <= verts.shape[0] <= p * 2 ** (p - 1)
            for w in verts:
                np.testing.assert_allclose(w.sum(axis=1), a, atol=1e-12)
                np.testing.assert_allclose(w.sum(axis=0), b, atol=1e-12)
                assert np.min(w) >= -1e-15
                assert _support_is_acyclic(w)
            for _ in range(5):
                cost = rng.uniform(0.0, 3.0, size=(p, 2))
                best = min(float(np.sum(w * cost)) for w in verts)
                value, _ = solve_transportation_lp(a, b, cost)
                assert best == pytest.approx(value, abs=1e-12)

    def test_general_enumeration_attains_lp_optimum(self):
        rng = np.random.default_rng(78)
        for p, q in ((3, 3), (4, 3), (2, 4)):
            a, b = random_marginals(rng, p, q)
            plans = enumerate_vertices(a, b)
            assert len(plans) >= 1
            for plan in plans:
                assert _support_is_acyclic(plan.matrix)
            for _ in range(5):
                cost = rng.uniform(0.0, 3.0, size=(p, q))
                best = min(plan.cost(cost) for plan in plans)
                value, _ = solve_transportation_lp(a, b, cost)
                assert best == pytest.approx(value, abs=1e-12)

    def test_enumeration_is_deduplicated_and_ordered(self):
        rng = np.random.default_rng(79)
        a, b = random_marginals(rng, 3, 3)
        plans = enumerate_vertices(a, b)

        def order_key(plan):
            flat = plan.matrix.ravel()
            return (tuple(np.nonzero(flat > 1e-12)[0].tolist()),
                    tuple(np.round(flat, 12).tolist()))

        keys = [order_key(p) for p in plans]
        assert len(keys) == len(set(keys))
        assert keys == sorted(keys)

    def test_budget(self):
        with pytest.raises(VertexBudgetError):
            enumerate_vertices(np.full(12, 1 / 12), np.full(12, 1 / 12),
                               budget=1000)


class TestMultimarginal:
    def test_two_marginal_consistency(self):
        """For two mixtures the tensor LP is the pair LP scaled by
        lam_1 * lam_2."""
        rng = np.random.default_rng(87)
        for _ in range(10):
            m1, m2 = random_mixture(rng, 3), random_mixture(rng, 2)
            lam = rng.dirichlet(np.ones(2))
            plan = multimarginal_plan([m1, m2], lam)
            cost = np.array([[w2_slater_sq(c1, c2) for c2 in m2.components]
                             for c1 in m1.components])
            value, _ = solve_transportation_lp(m1.weights, m2.weights, cost)
            assert plan.value == pytest.approx(lam[0] * lam[1] * value, abs=1e-11)
            np.testing.assert_allclose(plan.marginal(0), m1.weights, atol=1e-9)
            np.testing.assert_allclose(plan.marginal(1), m2.weights, atol=1e-9)

    def test_three_marginal_structure(self):
        rng = np.random.default_rng(88)
        mixtures = [random_mixture(rng, s) for s in (2, 3, 2)]
        lam = np.full(3, 1.0 / 3.0)
        plan = multimarginal_plan(mixtures, lam)
        for i, m in enumerate(mixtures):
            np.testing.assert_allclose(plan.marginal(i), m.weights, atol=1e-9)
        assert plan.nnz <= (2 + 3 + 2) - 3 + 1
        # the independent product coupling is feasible, so it bounds the value
        cost = pairwise_cost_tensor(mixtures, lam)
        product = np.einsum("i,j,k->ijk", *[m.weights for m in mixtures])
        assert plan.value <= float(np.sum(product * cost)) + 1e-12
        assert plan.value >= -1e-12

    def test_cost_tensor_entry(self):
        rng = np.random.default_rng(89)
        mixtures = [random_mixture(rng, 2) for _ in range(3)]
        lam = np.array([0.2, 0.5, 0.3])
        cost = pairwise_cost_tensor(mixtures, lam)
        idx = (1, 0, 1)
        direct = 0.0
        for i in range(3):
            for j in range(i + 1, 3):
                direct += lam[i] * lam[j] * w2_slater_sq(
                    mixtures[i].components[idx[i]], mixtures[j].components[idx[j]])
        assert cost[idx] == pytest.approx(direct, rel=1e-14)

    def test_validation(self):
        rng = np.random.default_rng(90)
        m = random_mixture(rng, 2)
        with pytest.raises(DomainError):
            multimarginal_plan([m, m], np.array([0.9, 0.2]))
        with pytest.raises(DomainError):
            multimarginal_plan([m, m], np.array([-0.1, 1.1]))
        with pytest.raises(DomainError):
            multimarginal_plan([m, m], np.array([1.0]))


class TestApproxBarycenter:
    def test_one_hot_reproduces_member(self):
        """At a one-hot weight vector the frozen-coupling family member
        collapses onto that snapshot."""
        rng = np.random.default_rng(97)
        mixtures = [random_mixture(rng, s) for s in (2, 3)]
        plan = multimarginal_plan(mixtures, np.array([0.5, 0.5]))
        for i in range(2):
            lam = np.zeros(2)
            lam[i] = 1.0
            member = approx_barycenter(plan, mixtures, lam).merged(tol=1e-9)
            target = mixtures[i]
            assert member.size == target.size
            order = np.argsort(member.centers)
            torder = np.argsort(target.centers)
            np.testing.assert_allclose(member.centers[order],
                                       target.centers[torder], atol=1e-12)
            np.testing.assert_allclose(member.weights[order],
                                       target.weights[torder], atol=1e-9)

    def test_outside_half_space_rejected(self):
        mixtures = [SlaterMixture((Slater(1.0, 0.0),), (1.0,)),
                    SlaterMixture((Slater(2.0, 1.0),), (1.0,))]
        plan = multimarginal_plan(mixtures, np.array([0.5, 0.5]))
        # inverse scale of the single coupled atom is -2/1 + 3/2 < 0
        with pytest.raises(DomainError):
            approx_barycenter(plan, mixtures, np.array([-2.0, 3.0]))
