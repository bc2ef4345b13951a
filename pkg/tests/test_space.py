import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublinear_mmse.space import (
    ConditioningWarning,
    Measure,
    Partition,
    SampleSpace,
    as_variable,
    block_masses,
    check_equivalence,
    cond_density,
    cond_expectation,
    expectation,
)


def test_sample_space_validation():
    s = SampleSpace.uniform(["a", "b", "c"])
    assert s.size == 3
    assert np.allclose(s.base_weights, 1 / 3)
    with pytest.raises(ValueError, match="sum"):
        SampleSpace(("a", "b"), [0.5, 0.6])
    with pytest.raises(ValueError, match="base weight"):
        SampleSpace(("a", "b"), [1.0, 0.0])
    with pytest.raises(ValueError, match="unique"):
        SampleSpace(("a", "a"), [0.5, 0.5])
    with pytest.raises(ValueError):
        SampleSpace((), [])


def test_arrays_are_read_only():
    s = SampleSpace.uniform("ab")
    with pytest.raises(ValueError):
        s.base_weights[0] = 1.0
    p = Partition.trivial(2)
    with pytest.raises(ValueError):
        p.labels[0] = 3


def test_partition_canonical_form():
    p = Partition(((3, 1), (0,), (2,)), 4)
    assert p.blocks == ((0,), (1, 3), (2,))
    assert p.labels.tolist() == [0, 1, 2, 1]
    assert p == Partition.from_labels([7, 5, 9, 5])
    assert Partition.trivial(3).n_blocks == 1
    assert Partition.finest(3).n_blocks == 3


def test_partition_errors():
    with pytest.raises(ValueError, match="overlap"):
        Partition(((0, 1), (1, 2)), 3)
    with pytest.raises(ValueError, match="cover"):
        Partition(((0,), (2,)), 3)
    with pytest.raises(ValueError, match="nonempty"):
        Partition(((0, 1), ()), 2)


def test_refines_and_measurable():
    fine = Partition(((0,), (1,), (2, 3)), 4)
    coarse = Partition(((0, 1), (2, 3)), 4)
    assert fine.refines(coarse)
    assert not coarse.refines(fine)
    assert Partition.finest(4).refines(Partition.trivial(4))
    assert coarse.is_measurable([1.0, 1.0, 5.0, 5.0])
    assert not coarse.is_measurable([1.0, 2.0, 5.0, 5.0])


def test_cond_expectation_by_hand():
    s = SampleSpace.uniform("abcd")
    p = Measure(s, [0.1, 0.3, 0.2, 0.4])
    c = Partition(((0, 1), (2, 3)), 4)
    xi = np.array([1.0, 5.0, 3.0, 0.0])
    # block {0,1}: (0.1 + 1.5) / 0.4 = 4; block {2,3}: 0.6 / 0.6 = 1
    assert np.allclose(cond_expectation(xi, p, c), [4, 4, 1, 1], atol=1e-15)
    assert np.allclose(block_masses(p, c), [0.4, 0.6])
    assert np.allclose(cond_density(p, c), [0.8, 0.8, 1.2, 1.2])
    assert expectation(xi, p) == pytest.approx(2.2, abs=1e-15)


def test_cond_expectation_trivial_and_finest():
    s = SampleSpace.uniform("abc")
    p = Measure(s, [0.2, 0.5, 0.3])
    xi = np.array([2.0, -1.0, 4.0])
    assert np.allclose(cond_expectation(xi, p, Partition.trivial(3)), expectation(xi, p))
    assert np.allclose(cond_expectation(xi, p, Partition.finest(3)), xi)


def test_zero_mass_block_raises():
    s = SampleSpace.uniform("abc")
    p = Measure(s, [0.5, 0.5, 0.0])
    with pytest.raises(ValueError, match="zero mass"):
        cond_expectation([1, 2, 3], p, Partition(((0, 1), (2,)), 3))
    assert not p.equivalent
    assert not check_equivalence(p)


def test_conditioning_warning():
    s = SampleSpace.uniform("ab")
    p = Measure(s, [1e-13, 1 - 1e-13])
    with pytest.warns(ConditioningWarning):
        assert check_equivalence(p)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_equivalence(Measure(s, [0.5, 0.5]))


def test_as_variable_rejects_bad_input():
    s = SampleSpace.uniform("ab")
    with pytest.raises(ValueError, match="shape"):
        as_variable(s, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="finite"):
        as_variable(s, [1.0, np.nan])


@st.composite
def measure_and_partition(draw):
    n = draw(st.integers(2, 7))
    raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    labels = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    xi = np.array(draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n)))
    s = SampleSpace.uniform([str(i) for i in range(n)])
    return Measure(s, raw / raw.sum()), Partition.from_labels(labels), xi


@settings(max_examples=200, deadline=None)
@given(measure_and_partition())
def test_tower_jensen_and_measurability(case):
    p, c, xi = case
    ce = cond_expectation(xi, p, c)
    assert c.is_measurable(ce)
    assert abs(expectation(ce, p) - expectation(xi, p)) <= 1e-12 * (1 + np.abs(xi).max())
    assert np.all(cond_expectation(xi**2, p, c) >= ce**2 - 1e-9 * (1 + xi**2).max())
    # E[eta * xi | C] = eta * E[xi | C] for C-measurable eta
    eta = np.arange(c.n_blocks, dtype=float)[c.labels] + 1.0
    assert np.allclose(cond_expectation(eta * xi, p, c), eta * ce, atol=1e-9 * (1 + np.abs(xi).max()))
