import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppmix import (
    DecomposableFunction,
    FacilityLocation,
    GraphCut,
    LinearCapped,
    Log1pConcave,
    LogDetFunction,
    ModelError,
    ModularFunction,
    PairTweakFunction,
    QuadraticConcave,
    SqrtConcave,
    TableConcave,
    mean_field_ising_preset,
    pair_tweak_preset,
)
from dppmix.core import all_subsets
from dppmix.functions import (
    cond_correlation,
    cond_mutual_info,
    cond_variance,
    concave_from_dict,
    facility_hessian_floor,
)
from dppmix.instances import FAMILIES, random_function, random_pd


def admissible(n):
    for mask in range(1 << n):
        for i in range(n):
            if mask >> i & 1:
                continue
            for j in range(n):
                if j != i and not mask >> j & 1:
                    yield i, j, mask


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("seed", [0, 1])
def test_closed_forms_match_finite_differences(family, seed):
    n = 7 if seed else 10
    f = random_function(family, n, np.random.default_rng(seed))
    tol = 1e-6 if family == "log_det" else 1e-9
    rng = np.random.default_rng(seed)
    masks = range(1 << n) if n <= 7 else rng.integers(0, 1 << n, 150)
    for mask in masks:
        mask = int(mask)
        for i in range(n):
            if mask >> i & 1:
                continue
            assert abs(f.gain(i, mask) - f.gain(i, mask, closed_form=False)) <= tol
            for j in range(n):
                if j != i and not mask >> j & 1:
                    assert abs(f.hessian(i, j, mask) - f.hessian(i, j, mask, closed_form=False)) <= tol


@pytest.mark.parametrize("family", FAMILIES)
def test_batches_match_scalar_paths(family):
    n = 6
    f = random_function(family, n, np.random.default_rng(3))
    X = all_subsets(n)
    vals = np.array([f.value(m) for m in range(1 << n)])
    assert np.allclose(f.values_batch(X), vals, atol=1e-9)
    for i in range(n):
        expect = [f.gain(i, m & ~(1 << i)) for m in range(1 << n)]
        assert np.allclose(f.gain_batch(i, X), expect, atol=1e-9)


@pytest.mark.parametrize("family", ["modular", "pair_tweak", "facility_location", "graph_cut", "log_det", "decomposable"])
def test_claimed_submodular_families(family):
    n = 6
    f = random_function(family, n, np.random.default_rng(11))
    assert f.submodular
    assert max(f.hessian(i, j, S) for i, j, S in admissible(n)) <= 1e-12


def test_graph_cut_example_and_constant_hessian():
    L = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float)
    f = GraphCut(L, a=0, b=1, c=1)
    assert f.value([1]) == 2.0
    assert all(f.hessian(i, j, S) == -2 * L[i, j] for i, j, S in admissible(3))
    # gain formula b * deg_i - 2c sum_{l in S} L_il
    assert f.gain(0, [1]) == 1 - 2
    assert f.gain(1, [0, 2]) == 2 - 4


def test_graph_cut_validation():
    with pytest.raises(ModelError):
        GraphCut(np.array([[0, 1], [0, 0]], float))
    with pytest.raises(ModelError):
        GraphCut(np.array([[1, 1], [1, 0]], float))
    with pytest.raises(ModelError):
        GraphCut(np.array([[0, -1], [-1, 0]], float))
    with pytest.raises(ModelError):
        GraphCut(np.zeros((2, 2)), c=-1)


def test_logdet_identity_is_zero():
    f = LogDetFunction(np.eye(4))
    assert all(f.value(m) == 0.0 for m in range(16))


def test_logdet_rejects_non_pd():
    with pytest.raises(ModelError):
        LogDetFunction(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ModelError):
        LogDetFunction(np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_conditional_statistics_identity():
    L = np.eye(4)
    for i, j, S in admissible(4):
        assert cond_variance(L, i, S) == 1.0
        assert cond_correlation(L, i, j, S) == 0.0
        assert cond_mutual_info(L, i, j, S) == 0.0


def test_conditional_statistics_two_by_two():
    r = 0.6
    L = np.array([[1.0, r], [r, 1.0]])
    assert cond_correlation(L, 0, 1, []) == pytest.approx(r)
    assert cond_mutual_info(L, 0, 1, []) == pytest.approx(-0.5 * np.log(1 - r * r))


@pytest.mark.parametrize("seed", range(4))
def test_logdet_gain_and_hessian_identities(seed):
    n = 5
    L = random_pd(n, np.random.default_rng(seed))
    f = LogDetFunction(L)
    for i, j, S in admissible(n):
        assert abs(f.gain(i, S) - np.log(cond_variance(L, i, S))) <= 1e-6
        rho = cond_correlation(L, i, j, S)
        fd = f.hessian(i, j, S, closed_form=False)
        assert abs(fd - np.log(1 - rho * rho)) <= 1e-6
        assert abs(fd + 2 * cond_mutual_info(L, i, j, S)) <= 1e-6


def test_facility_empty_value_and_floor():
    F = FacilityLocation(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert F.value([]) == 0.0
    assert facility_hessian_floor(F, 0, 1) == -2.0
    assert facility_hessian_floor(FacilityLocation(np.array([[0.0, 3.0], [0.0, 1.0]])), 0, 1) == 0.0
    assert facility_hessian_floor(FacilityLocation(np.array([[2.0, 3.0]])), 0, 1) == -2.0
    with pytest.raises(ModelError):
        facility_hessian_floor(F, 0, 0)


@pytest.mark.parametrize("seed", range(5))
def test_facility_floor_is_minimum_and_hessian_nondecreasing(seed):
    rng = np.random.default_rng(seed)
    n = 5
    F = FacilityLocation(rng.uniform(0, 1, (2, n)), lam=0.1)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            hs = {S: F.hessian(i, j, S) for _, _, S in [(i, j, m) for m in range(1 << n)] if not S >> i & 1 and not S >> j & 1}
            assert min(hs.values()) == pytest.approx(facility_hessian_floor(F, i, j), abs=1e-12)
            for S, h in hs.items():
                for k in range(n):
                    T = S | (1 << k)
                    if T in hs:
                        assert hs[T] >= h - 1e-12


def test_facility_validation():
    with pytest.raises(ModelError):
        FacilityLocation(np.array([[-1.0, 1.0]]))
    with pytest.raises(ModelError):
        FacilityLocation(np.ones((1, 2)), lam=-1)


def test_modular_and_pair_tweak():
    f = ModularFunction([1.0, -2.0])
    assert f.gain(1, [0]) == -2.0
    g = pair_tweak_preset(4, 1, 3)
    assert g.w.tolist() == [1.0, 0.0, 1.0, 0.0]
    assert g.value([]) == 0.0 and g.value([1]) == 1.0 and g.value([1, 3]) == 1.0
    with pytest.raises(ModelError):
        PairTweakFunction([1.0, 1.0], 0, 0)
    with pytest.raises(ModelError):
        ModularFunction([])


def test_decomposable_hessian_formula():
    phi = Log1pConcave(1.0)
    cover = [[0, 1, 2], [1, 2, 3], [0, 3]]
    f = DecomposableFunction(4, cover, phi)
    for i, j, S in admissible(4):
        expect = 0.0
        for A in cover:
            if i in A and j in A:
                s = sum(1 for e in A if S >> e & 1)
                expect += float(phi(s + 2) - 2 * phi(s + 1) + phi(s))
        assert f.hessian(i, j, S) == pytest.approx(expect, abs=1e-12)
    # 0 and 3 only share the last block; 1 and 0 share the first
    f2 = DecomposableFunction(4, [[0, 1], [2, 3]], phi)
    assert f2.hessian(0, 2, 0) == 0.0


def test_decomposable_validation():
    with pytest.raises(ModelError):
        DecomposableFunction(3, [[0, 1]], Log1pConcave())
    with pytest.raises(ModelError):
        DecomposableFunction(3, [], Log1pConcave())
    with pytest.raises(ModelError):
        DecomposableFunction(3, [[0, 1, 2]], QuadraticConcave(1.0, 0.5))
    with pytest.raises(ModelError):
        DecomposableFunction(3, [[0, 1, 2]], TableConcave([0.0, 1.0]))


def test_concave_builtin_bounds_hold_on_grid():
    n = 6
    xs = np.linspace(0, n, 601)
    for phi in [SqrtConcave(2.0, 0.5), Log1pConcave(1.5), LinearCapped(n, 2.0), QuadraticConcave(3.0, 0.1)]:
        c, c2 = phi.bounds(n)
        d1 = np.gradient(phi(xs), xs)
        d2 = np.diff(phi(xs), 2) / (xs[1] - xs[0]) ** 2
        assert c > 0
        assert d1.min() >= c - 1e-3
        assert d2.min() >= c2 - 1e-3 and d2.max() <= 1e-9


def test_linear_capped_below_n_not_certifiable():
    phi = LinearCapped(2.0)
    assert not phi.certifiable(5)
    assert phi.certifiable(2)
    with pytest.raises(ModelError):
        phi.bounds(5)


def test_concave_from_dict_round_trip():
    for phi in [SqrtConcave(2.0, 0.5), Log1pConcave(1.5), LinearCapped(3, 2.0), QuadraticConcave(3.0, 0.1), TableConcave([0, 1, 1.5])]:
        back = concave_from_dict(phi.to_dict())
        assert np.allclose(back(np.arange(3)), phi(np.arange(3)))
    with pytest.raises(ModelError):
        concave_from_dict({"kind": "cubic"})
    with pytest.raises(ModelError):
        concave_from_dict({"kind": "sqrt", "bogus": 1})


def test_mean_field_ising_preset():
    n, J = 4, 1.0
    f = mean_field_ising_preset(n, J)
    assert len(f.cover) == 6
    assert not f.phis[0].certifiable(n)
    # f(S) = (J/n) * (#pairs split by S - #pairs not split)
    for m in range(1 << n):
        k = bin(m).count("1")
        split = k * (n - k)
        assert f.value(m) == pytest.approx(J / n * (split - (6 - split)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000))
def test_facility_monotone_submodular_property(n, seed):
    rng = np.random.default_rng(seed)
    F = FacilityLocation(rng.uniform(0, 1, (3, n)))
    for mask in range(1 << n):
        for i in range(n):
            if not mask >> i & 1:
                assert F.gain(i, mask) >= -1e-12
