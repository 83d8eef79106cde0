import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppmix import (
    DecomposableFunction,
    FacilityLocation,
    FamilyMismatch,
    GraphCut,
    Log1pConcave,
    LogDetFunction,
    ModelError,
    ModularFunction,
    PointProcess,
    TooLargeError,
    certify_dobrushin,
    certify_family,
    certify_general,
    curvature,
    decay_check,
    dobrushin_gibbs_exact,
    dobrushin_mh_exact,
    hessian_bound_matrix,
    pair_tweak_preset,
)
from dppmix.certificates import (
    Condition,
    Provenance,
    alpha_beta,
    bound_matrix,
    default_certificate,
    is_submodular,
    tau_bound,
)
from dppmix.functions import SqrtConcave, TableConcave, mean_field_ising_preset
from dppmix.instances import FAMILIES, random_function
from dppmix.oracle import dobrushin_from_kernel


def inst(family, n, seed, beta=1.0):
    return PointProcess(random_function(family, n, np.random.default_rng(seed)), beta)


def test_modular_matrices():
    w = np.array([0.5, -1.0, 2.0])
    P = PointProcess(ModularFunction(w), 1.5)
    assert not dobrushin_gibbs_exact(P).entries.any()
    Ct = dobrushin_mh_exact(P).entries
    assert np.allclose(np.diag(Ct), np.exp(-1.5 * np.abs(w)))
    assert not (Ct - np.diag(np.diag(Ct))).any()


def test_pair_tweak_gibbs_entry():
    beta = 0.8
    P = PointProcess(pair_tweak_preset(4), beta)
    C = dobrushin_gibbs_exact(P).entries
    # gains of 0 are 1 (1 out) and 0 (1 in): |sigma(beta) - sigma(0)|
    assert C[0, 1] == pytest.approx(1 / (1 + math.exp(-beta)) - 0.5, abs=1e-15)
    assert C[0, 2] == 0.0
    assert np.allclose(C, dobrushin_from_kernel(P, "gibbs"), atol=1e-12)


def test_path_cut_zero_pattern():
    L = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float)
    P = PointProcess(GraphCut(L), 1.0)
    C = dobrushin_gibbs_exact(P).entries
    assert np.array_equal(C > 0, L > 0)


def test_monotone_submodular_mh_diagonal():
    rng = np.random.default_rng(0)
    F = FacilityLocation(rng.uniform(0, 1, (3, 5)))
    P = PointProcess(F, 0.7)
    full = 31
    expect = [math.exp(-0.7 * F.gain(i, full & ~(1 << i))) for i in range(5)]
    assert np.allclose(np.diag(dobrushin_mh_exact(P).entries), expect)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("kernel", ["gibbs", "mh"])
def test_two_code_paths_agree(family, kernel):
    P = inst(family, 6, 4, beta=0.9)
    fast = dobrushin_gibbs_exact(P) if kernel == "gibbs" else dobrushin_mh_exact(P)
    assert np.abs(fast.entries - dobrushin_from_kernel(P, kernel)).max() <= 1e-12


def test_hessian_bound_examples():
    L = np.array([[0, 0.5, 0], [0.5, 0, 2.0], [0, 2.0, 0]])
    M = hessian_bound_matrix(GraphCut(L, c=1.5))
    assert M.provenance is Provenance.CLOSED_FORM
    assert np.allclose(M.entries, 3.0 * L)
    Lf = np.array([[1.0, 2.0, 0.0], [3.0, 1.0, 1.0]])
    M = hessian_bound_matrix(FacilityLocation(Lf)).entries
    assert M[0, 1] == 1.0 + 1.0 and M[1, 2] == 0.0 + 1.0 and M[0, 0] == 0.0
    assert not hessian_bound_matrix(ModularFunction([1.0, 2.0])).entries.any()


@pytest.mark.parametrize("family", ["pair_tweak", "facility_location", "graph_cut", "decomposable"])
@pytest.mark.parametrize("seed", range(3))
def test_closed_form_hessian_bound_matches_enumeration(family, seed):
    f = random_function(family, 3 + 2 * seed, np.random.default_rng(seed))
    a = hessian_bound_matrix(f)
    b = hessian_bound_matrix(f, closed_form=False)
    assert a.provenance is Provenance.CLOSED_FORM and b.provenance is Provenance.ENUMERATED
    assert np.allclose(a.entries, b.entries, atol=1e-12)


def test_decomposable_with_table_phi_uses_enumeration():
    f = mean_field_ising_preset(4)
    assert hessian_bound_matrix(f).provenance is Provenance.ENUMERATED


def test_modular_certificate():
    P = PointProcess(ModularFunction([1.0, -2.0, 0.5, 3.0]), 2.0)
    for cert in (certify_general(P, "submodular"), certify_family(P)):
        assert cert.gamma == 0.0 and cert.satisfied
        assert cert.tau_s(0.01) == math.ceil(math.log(4 / 0.01))


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 3.0])
def test_pair_tweak_certificate(beta):
    P = PointProcess(pair_tweak_preset(5), beta)
    for cert in (certify_general(P, "submodular"), certify_family(P)):
        assert abs(cert.gamma - (1 - math.exp(-beta))) <= 1e-12


def test_certificate_fields():
    P = inst("graph_cut", 5, 1, beta=0.1)
    cert = certify_general(P, "submodular", epsilon=0.05)
    assert cert.satisfied
    assert cert.satisfied == (cert.gamma < 1)
    assert cert.lam == pytest.approx(math.exp(cert.gamma - 1))
    assert cert.tau_s() == math.ceil(math.log(5 / 0.05) / (1 - cert.gamma))
    assert cert.tau_r() == math.ceil(math.log(5 / 0.05) / (1 - cert.lam))
    assert cert.mse_bound(3, 100, 2) == pytest.approx((2 * cert.gamma**3) ** 2 + 0.01)
    assert cert.mse_bound(3, 100, 2) >= cert.bias_bound(3, 2) ** 2
    assert cert.gamma == pytest.approx(cert.matrices["R"].entries.sum(1).max(), abs=0)
    d = cert.to_dict(include_matrices=True)
    assert d["condition"] == "submodular" and "R" in d["matrices"]


def test_unsatisfied_certificate_reports_raw_gamma():
    P = inst("graph_cut", 5, 1, beta=50.0)
    cert = certify_general(P, "submodular")
    assert cert.gamma > 1 and not cert.satisfied
    assert cert.tau_s() is None and cert.tau_r() is None


def test_tau_bound_clamps_and_validates():
    assert tau_bound(1, 2.0, 0.5) == 0
    with pytest.raises(ModelError):
        tau_bound(3, 0.0, 0.5)


def test_submodular_condition_rejected_for_nonsubmodular():
    f = DecomposableFunction(3, [[0, 1], [1, 2]], TableConcave([0.0, 0.0, 1.0]))
    assert not is_submodular(f)
    with pytest.raises(FamilyMismatch):
        certify_general(PointProcess(f, 1.0), "submodular")
    cert = certify_general(PointProcess(f, 0.2), "general")
    assert cert.gamma >= dobrushin_gibbs_exact(PointProcess(f, 0.2)).norm_inf()


def test_alpha_forms_agree_under_assumptions():
    P = inst("facility_location", 6, 2, beta=0.8)
    assert alpha_beta(P, "general") == pytest.approx(alpha_beta(P, "submodular"), rel=1e-12)
    L = np.zeros((4, 4))
    Psup = PointProcess(GraphCut(L, b=1.0, c=0.0), 0.5)
    assert alpha_beta(Psup, "general") == pytest.approx(alpha_beta(Psup, "supermodular"), rel=1e-12)


@pytest.mark.parametrize("family", ["facility_location", "graph_cut", "log_det", "decomposable", "pair_tweak"])
@pytest.mark.parametrize("seed", range(3))
def test_condition_ordering_and_domination(family, seed):
    P = inst(family, 4 + seed, seed, beta=0.4)
    C = dobrushin_gibbs_exact(P).entries
    R_gen, _, _ = bound_matrix(P, "general")
    R_sub, _, M = bound_matrix(P, "submodular")
    R_sim, _, _ = bound_matrix(P, "simplified")
    assert np.all(C <= R_sub.entries + 1e-12)
    assert np.all(C <= R_gen.entries + 1e-12)
    assert np.all(R_sub.entries <= R_sim.entries + 1e-12)
    g_sub = certify_general(P, "submodular").gamma
    g_sim = certify_general(P, "simplified").gamma
    assert 0 <= g_sub <= g_sim + 1e-12
    closed = certify_family(P).gamma
    assert closed >= g_sub - 1e-9 * max(1, g_sub)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["facility_location", "graph_cut", "log_det", "decomposable"]), st.integers(0, 1000))
def test_gamma_nondecreasing_in_beta_when_alpha_at_least_one(family, seed):
    # every row term grows with beta once alpha(beta) >= 1 for all beta, i.e. min_i gain_i(V - i) <= 0
    f = random_function(family, 5, np.random.default_rng(seed))
    full = (1 << 5) - 1
    if min(f.gain(i, full & ~(1 << i)) for i in range(5)) > 0:
        return
    betas = np.geomspace(0.01, 5, 12)
    gammas = [certify_general(PointProcess(f, b), "submodular").gamma for b in betas]
    assert all(b >= a - 1e-12 * max(1, a) for a, b in zip(gammas, gammas[1:]))


def test_graph_cut_balanced_prefactor_is_one():
    rng = np.random.default_rng(0)
    L = np.triu(rng.uniform(0, 1, (5, 5)), 1)
    L = L + L.T
    cert = certify_family(PointProcess(GraphCut(L, b=2.0, c=1.0), 0.7))
    assert cert.alpha_beta == 1.0
    assert cert.gamma == pytest.approx((-np.expm1(-1.4 * L)).sum(1).max())


def test_logdet_identity_certificate():
    cert = certify_family(PointProcess(LogDetFunction(np.eye(5)), 1.3))
    assert cert.gamma == 0.0 and cert.alpha_beta == 1.0


def test_logdet_certificate_cap():
    with pytest.raises(TooLargeError):
        certify_family(PointProcess(LogDetFunction(np.eye(17)), 1.0))


def test_logdet_beta_one_uses_squared_correlation():
    from dppmix.functions import cond_correlation

    rng = np.random.default_rng(1)
    f = random_function("log_det", 4, rng)
    cert = certify_family(PointProcess(f, 1.0))
    alpha = (1.0 / f.full_conditional_variances()).max()
    terms = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            if i != j:
                terms[i, j] = max(
                    cond_correlation(f.L, i, j, m) ** 2 for m in range(16) if not m >> i & 1 and not m >> j & 1
                )
    assert cert.gamma == pytest.approx(alpha * terms.sum(1).max(), rel=1e-9)


def test_decomposable_disjoint_blocks():
    phi = Log1pConcave(1.0)
    f = DecomposableFunction(6, [[0, 1, 2], [3, 4], [5]], phi)
    assert f.neighborhood_sizes().tolist() == [3, 3, 3, 2, 2, 1]
    cert = certify_family(PointProcess(f, 0.5))
    c, c2 = phi.bounds(6)
    assert cert.gamma == pytest.approx(-math.expm1(c2 * 0.5) * math.exp(-c * 0.5) * 3)


def test_decomposable_rejects_uncertifiable_phi():
    f = mean_field_ising_preset(4)
    with pytest.raises(FamilyMismatch):
        certify_family(PointProcess(f, 1.0))


def test_decomposable_overlapping_pairs_counted():
    # pair {0, 1} lies in two blocks; the Hessian there is twice a single block's
    f = DecomposableFunction(3, [[0, 1, 2], [0, 1]], SqrtConcave(1.0, eps0=1.0))
    assert f.pair_multiplicity() == 2
    for beta in (0.1, 1.0, 4.0):
        P = PointProcess(f, beta)
        assert certify_family(P).gamma >= certify_general(P, "submodular").gamma


def test_curvature_examples():
    assert curvature(ModularFunction([1.0, 2.0, 0.5])) == 0.0
    assert curvature(pair_tweak_preset(5)) == 1.0
    L = np.array([[1.0, 1.0, 1.0], [0.5, 0.5, 0.5]])
    F = FacilityLocation(L)
    brute = 1 - min(F.gain(i, 7 & ~(1 << i)) / F.value(1 << i) for i in range(3))
    assert curvature(F) == pytest.approx(brute) == 1.0


def test_curvature_errors():
    with pytest.raises(ModelError):
        curvature(ModularFunction([0.0, 0.0]))
    with pytest.raises(ModelError):
        curvature(ModularFunction([1.0, -1.0]))
    with pytest.raises(ModelError):
        curvature(GraphCut(np.array([[0, 1.0], [1.0, 0]])))


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000))
def test_curvature_in_unit_interval(n, seed):
    F = FacilityLocation(np.random.default_rng(seed).uniform(0, 1, (3, n)))
    assert 0.0 <= curvature(F) <= 1.0 + 1e-12


def test_decay_zero_matrix():
    d = np.abs(np.subtract.outer(np.arange(4), np.arange(4))).astype(float)
    for mode in ("exponential", "finite_range"):
        assert decay_check(np.zeros((4, 4)), d, mode).bound_on_norm == 0.0


def test_decay_exponential_path_cut():
    n, c = 6, 0.7
    idx = np.arange(n)
    d = np.abs(np.subtract.outer(idx, idx)).astype(float)
    L = np.exp(-d)
    np.fill_diagonal(L, 0.0)
    M = hessian_bound_matrix(GraphCut(L, c=c))
    rep = decay_check(M, d, "exponential", alpha_prime=1.0)
    assert rep.alpha == pytest.approx(2 * c)
    env = rep.alpha * np.exp(-d)
    np.fill_diagonal(env, 0.0)
    assert np.allclose(env, M.entries)
    assert rep.bound_on_norm >= M.norm_inf() - 1e-12


def test_decay_finite_range_nearest_neighbour():
    n = 6
    idx = np.arange(n)
    d = np.abs(np.subtract.outer(idx, idx)).astype(float)
    L = (d == 1).astype(float)
    M = hessian_bound_matrix(GraphCut(L))
    rep = decay_check(M, d, "finite_range")
    assert rep.r == 1 and rep.N == 3 and rep.c == 2.0
    assert rep.bound_on_norm == 6.0 >= M.norm_inf()
    assert not rep.range_is_diameter


def test_decay_range_equal_to_diameter_flagged():
    d = np.array([[0, 1.0], [1.0, 0]])
    rep = decay_check(np.array([[0, 1.0], [1.0, 0]]), d, "finite_range")
    assert rep.range_is_diameter and rep.r == 1.0


def test_decay_validates_metric():
    with pytest.raises(ModelError):
        decay_check(np.zeros((2, 2)), np.array([[0, 1.0], [2.0, 0]]))
    with pytest.raises(ModelError):
        decay_check(np.zeros((2, 2)), np.array([[1.0, 1.0], [1.0, 0]]))


def test_dobrushin_certificate_and_default():
    P = inst("log_det", 5, 3, beta=0.5)
    c = certify_dobrushin(P, "gibbs")
    assert c.condition is Condition.DOBRUSHIN
    assert c.gamma == pytest.approx(dobrushin_gibbs_exact(P).norm_inf())
    d = default_certificate(P)
    assert d.gamma <= certify_general(P, "submodular").gamma
    assert default_certificate(P, "mh").gamma == pytest.approx(dobrushin_mh_exact(P).norm_inf())


def test_enumeration_cap():
    P = PointProcess(LogDetFunction(np.eye(21)), 1.0)
    with pytest.raises(TooLargeError):
        dobrushin_gibbs_exact(P)
