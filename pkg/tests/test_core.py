import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppmix import (
    GraphCut,
    GroundSet,
    ModelError,
    ModularFunction,
    PointProcess,
    Subset,
    TableFunction,
    TooLargeError,
    evaluate,
    hessian_entry,
    index_from_subset,
    marginal_gain,
    subset_from_index,
)
from dppmix.core import all_subsets, bits_to_masks, masks_to_bits
from dppmix.functions import FacilityLocation, pair_tweak_preset


def path_cut(n=3):
    L = np.zeros((n, n))
    for i in range(n - 1):
        L[i, i + 1] = L[i + 1, i] = 1.0
    return GraphCut(L, a=0, b=1, c=1)


def test_ground_set_labels_and_index():
    G = GroundSet(3, ("x", "y", "z"))
    assert G.index("y") == 1
    assert G.index(2) == 2
    assert GroundSet(2).labels == ("0", "1")
    with pytest.raises(ModelError):
        GroundSet(2, ("a", "a"))
    with pytest.raises(ModelError):
        GroundSet(0)
    with pytest.raises(ModelError):
        G.index("w")


def test_subset_basics():
    S = Subset.from_elements([0, 2], 4)
    assert S.bits == 0b101 and len(S) == 2 and 2 in S and 1 not in S
    assert S.add(1).elements() == [0, 1, 2]
    assert S.remove(0).elements() == [2]
    assert S.to_array().tolist() == [True, False, True, False]
    with pytest.raises(ModelError):
        Subset(0b10000, 4)
    with pytest.raises(ModelError):
        Subset.from_elements([4], 4)


def test_subset_index_examples():
    G = GroundSet(4)
    assert subset_from_index(0, G).elements() == []
    assert subset_from_index(15, G).elements() == [0, 1, 2, 3]
    assert all(index_from_subset(subset_from_index(x, G)) == x for x in range(16))
    with pytest.raises(ModelError):
        subset_from_index(16, G)


@given(st.integers(1, 20).flatmap(lambda n: st.tuples(st.just(n), st.lists(st.integers(0, (1 << n) - 1), min_size=1, max_size=20))))
def test_mask_packing_round_trip(args):
    n, masks = args
    X = masks_to_bits(np.array(masks, dtype=np.uint64), n)
    assert bits_to_masks(X).tolist() == masks


def test_evaluate_examples():
    assert evaluate(ModularFunction([1, 2]), [0, 1]) == 3.0
    F = FacilityLocation(np.array([[1.0, 2.0]]))
    assert evaluate(F, []) == 0.0
    cut = path_cut()
    assert evaluate(cut, [0, 1, 2]) == 0.0
    assert evaluate(cut, []) == 0.0
    assert evaluate(cut, [1]) == 2.0


def test_width_mismatch_raises():
    with pytest.raises(ModelError):
        evaluate(ModularFunction([1, 2]), Subset(0, 3))


def test_gain_and_hessian_preconditions():
    f = ModularFunction([1.0, 2.0, 3.0])
    assert marginal_gain(f, 1, [0]) == 2.0
    with pytest.raises(ModelError):
        marginal_gain(f, 0, [0])
    with pytest.raises(ModelError):
        hessian_entry(f, 1, 1, [])
    with pytest.raises(ModelError):
        hessian_entry(f, 0, 1, [1])
    assert hessian_entry(f, 0, 1, [2]) == 0.0


def test_pair_tweak_hessian_example():
    f = pair_tweak_preset(4, 0, 1)
    assert hessian_entry(f, 0, 1, []) == -1.0
    assert hessian_entry(f, 0, 2, []) == 0.0


def test_graph_cut_hessian_example():
    cut = path_cut()
    assert hessian_entry(cut, 0, 1, []) == -2.0
    assert hessian_entry(cut, 0, 2, []) == 0.0


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.integers(0, 3), st.integers(0, 3), st.integers(0, 15))
def test_table_hessian_symmetry(seed_vals, i, j, mask):
    rng = np.random.default_rng(abs(int(sum(seed_vals) * 1000)))
    f = TableFunction(rng.normal(size=16))
    if i == j or mask >> i & 1 or mask >> j & 1:
        return
    assert f.hessian(i, j, mask) == f.hessian(j, i, mask)
    assert f.hessian(i, j, mask, closed_form=False) == f.hessian(j, i, mask, closed_form=False)


def test_table_function_batches_agree():
    rng = np.random.default_rng(0)
    f = TableFunction(rng.normal(size=32))
    X = all_subsets(5)
    assert np.array_equal(f.values_batch(X), f.table())
    for i in range(5):
        expect = [f.gain(i, m & ~(1 << i)) for m in range(32)]
        assert np.allclose(f.gain_batch(i, X), expect, atol=0)


def test_table_function_validation():
    with pytest.raises(ModelError):
        TableFunction([1.0, 2.0, 3.0])
    with pytest.raises(ModelError):
        TableFunction([1.0, np.inf])


def test_point_process_validation():
    f = ModularFunction([1.0])
    with pytest.raises(ModelError):
        PointProcess(f, 0.0)
    with pytest.raises(ModelError):
        PointProcess(f, float("nan"))
    with pytest.raises(ModelError):
        PointProcess(f, 1.0, GroundSet(2))
    assert PointProcess(f, 2).with_beta(3.0).beta == 3.0


def test_enumeration_cap():
    with pytest.raises(TooLargeError):
        all_subsets(21)
