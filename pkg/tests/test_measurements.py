import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimenq import linalg as la
from dimenq.measurements import (
    PovmSet,
    PseudoMeasurement,
    dimension_measure_curve_from_constructions,
    dimension_measure_qubit,
    dimension_measure_upper_bound,
    drop_input,
    enumerate_strategies,
    extract_visibility,
    heuristic_mub_construction,
    incompatibility_weight,
    jm_visibility_construction,
    joint_measurability,
    mix_povms,
    mub_group,
    mub_pair,
    mub_vectors,
    tensor_povm,
    twirl,
    weyl_twirl,
)

from conftest import assert_certified, random_one_sided_set, random_qubit_set

GAP_TOL = 1e-7
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def sharp(*paulis):
    return PovmSet(np.array([[(np.eye(2) + s * p) / 2 for s in (1, -1)] for p in paulis]))


def random_povm(rng, d, n_out):
    parts = [la.random_density(d, rng) for _ in range(n_out)]
    inv = la.psd_sqrt(sum(parts), pinv=True)
    return np.array([inv @ p @ inv for p in parts])


def random_pseudo(rng, d=3):
    r = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    eff = np.array([random_povm(rng, d, d) for _ in range(2)])
    return PseudoMeasurement(r @ eff @ r.conj().T)


def test_mub_pair_examples():
    m = mub_pair(2, 1.0)
    assert np.allclose(m.effects[0], [(np.eye(2) + X) / 2, (np.eye(2) - X) / 2])
    assert np.allclose(m.effects[1], [(np.eye(2) + Z) / 2, (np.eye(2) - Z) / 2])
    assert np.allclose(mub_pair(2, 0.0).effects, np.eye(2) / 2)
    v = mub_vectors(5)
    assert np.allclose(np.abs(v[0].conj() @ v[1].T) ** 2, 1 / 5)
    assert np.allclose(mub_pair(5, 0.6).effects.sum(axis=1), np.eye(5))


def test_mub_pair_rejects():
    with pytest.raises(ValueError):
        mub_pair(4, 0.5)
    with pytest.raises(ValueError):
        mub_pair(3, 1.2)


def test_enumerate_strategies():
    assert len(enumerate_strategies(2, 2)) == 4
    assert len(enumerate_strategies(3, 2)) == 8
    assert len(enumerate_strategies(2, 5)) == 25
    with pytest.raises(ValueError):
        enumerate_strategies(7, 5)


def test_joint_measurability_examples():
    assert joint_measurability(sharp(Z)).jointly_measurable
    jm = joint_measurability(sharp(X, Z))
    assert not jm.jointly_measurable
    assert jm.robustness == pytest.approx(1 / math.sqrt(2), abs=1e-4)
    assert not joint_measurability(sharp(X, Y, Z)).jointly_measurable


def test_qubit_measure_examples():
    r = dimension_measure_qubit(mub_pair(2, 0.6))
    assert r.value == pytest.approx(0.0, abs=1e-6)
    assert_certified(r)
    r = dimension_measure_qubit(sharp(X, Z))
    assert r.value == pytest.approx(1.0, abs=1e-6)
    assert_certified(r)


def test_upper_bound_examples():
    m = mub_pair(2, 0.9)
    assert dimension_measure_upper_bound(m).value == pytest.approx(dimension_measure_qubit(m).value, abs=1e-9)
    r = dimension_measure_upper_bound(mub_pair(5, 1.0))
    assert r.value == pytest.approx(math.log2(5), abs=1e-5)
    assert dimension_measure_upper_bound(mub_pair(5, 0.3)).value == pytest.approx(0.0, abs=1e-6)


def test_weight_examples():
    assert incompatibility_weight(mub_pair(2, 0.5)).value == pytest.approx(0.0, abs=1e-6)
    assert incompatibility_weight(sharp(X, Z)).value == pytest.approx(1.0, abs=1e-6)


def test_weight_strictly_above_measure(rng):
    # generic full-rank effects give no gap; one rank-one effect per input does
    for _ in range(300):
        m = random_one_sided_set(rng)
        gap = incompatibility_weight(m).value - dimension_measure_qubit(m).value
        if gap > 1e-3:
            break
    assert gap > 1e-3


def test_measure_needs_qubits():
    with pytest.raises(ValueError):
        dimension_measure_qubit(mub_pair(3, 1.0))


def test_twirl_examples(rng):
    g = mub_group(3)
    assert len(g) == 2 * 9 * 2
    m = mub_pair(3, 0.7)
    assert np.allclose(twirl(m, g).effects, m.effects, atol=1e-12)
    t = twirl(random_pseudo(rng), g)
    assert isinstance(t, PseudoMeasurement)
    v = mub_vectors(3)
    a = t.effects[0, 0]
    p = (v[0, 0].conj() @ a @ v[0, 0] - v[0, 1].conj() @ a @ v[0, 1]).real
    c = (v[0, 1].conj() @ a @ v[0, 1]).real
    for x in range(2):
        for b in range(3):
            assert np.abs(t.effects[x, b] - (p * la.proj(v[x, b]) + c * np.eye(3))).max() <= 1e-8


def test_weyl_twirl_qubit(rng):
    rho = la.random_density(2, rng)
    assert np.abs(weyl_twirl(rho) - np.eye(2) / 2).max() <= 1e-12


def test_extract_visibility_examples():
    assert extract_visibility(mub_pair(5, 0.6)) == pytest.approx(0.6, abs=1e-9)
    assert extract_visibility(mub_pair(2, 1.0)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        extract_visibility(sharp(X, Y))


def test_heuristic_examples():
    assert heuristic_mub_construction(3, 3).p_k == pytest.approx(1.0, abs=1e-9)
    h = heuristic_mub_construction(2, 1, subsets=((0,), (0,)))
    assert h.p_k == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    p1 = heuristic_mub_construction(5, 1).p_k
    assert p1 == pytest.approx(joint_measurability(mub_pair(5, 1.0)).robustness, abs=1e-4)


def test_heuristic_visibility_by_direct_overlap():
    h = heuristic_mub_construction(5, 2)
    v = mub_vectors(5)
    a = h.pseudo.effects[1, 3]
    direct = (v[1, 3].conj() @ a @ v[1, 3] - v[1, 0].conj() @ a @ v[1, 0]).real
    assert h.p_k == pytest.approx(direct, abs=1e-9)


def test_heuristic_closed_form_k1():
    for d in (2, 3, 5):
        want = (d + math.sqrt(d) - 2) / (2 * (d - 1))
        assert jm_visibility_construction(d) == pytest.approx(want, abs=1e-9)


def test_curve_examples():
    p1 = jm_visibility_construction(5)
    assert dimension_measure_curve_from_constructions(5, p1) == 0.0
    assert dimension_measure_curve_from_constructions(5, 1.0) == pytest.approx(math.log2(5))
    bound = dimension_measure_upper_bound(mub_pair(5, 0.9)).value
    assert bound <= dimension_measure_curve_from_constructions(5, 0.9) + 1e-5


def test_tensor_povm_bookkeeping():
    trivial = PovmSet(np.eye(2)[None, None])
    m = sharp(X, Z)
    t = tensor_povm(m, trivial)
    assert (t.dim, t.n_inputs, t.n_outcomes) == (4, 2, 2)
    assert np.allclose(t.effects, np.kron(m.effects, np.eye(2)))
    both = tensor_povm(m, m)
    assert (both.dim, both.n_inputs, both.n_outcomes) == (4, 4, 4)


def test_product_subadditivity():
    m = sharp(X, Z)
    single = dimension_measure_qubit(m).value
    prod = dimension_measure_upper_bound(tensor_povm(m, m))
    assert prod.value <= 2 * single + 2 * GAP_TOL


def test_pseudo_rejects_signalling():
    with pytest.raises(ValueError, match="marginal"):
        PseudoMeasurement(np.array([[np.eye(2), np.zeros((2, 2))], [np.eye(2), np.eye(2)]]))


def test_measure_below_weight(rng):
    for _ in range(100):
        m = random_qubit_set(rng)
        dm, iw = dimension_measure_qubit(m), incompatibility_weight(m)
        assert_certified(dm)
        assert_certified(iw)
        assert dm.value <= iw.value + 2 * GAP_TOL


def test_zero_iff_jointly_measurable(rng):
    for i in range(100):
        # half the samples are pulled toward white noise to land on the JM side
        m = random_qubit_set(rng)
        if i % 2:
            m = mix_povms(m, mub_pair(2, 0.0), 0.5)
        zero = dimension_measure_qubit(m).value <= 1e-6
        assert zero == joint_measurability(m, tol=1e-6).jointly_measurable


def test_dropping_an_input_never_increases(rng):
    for _ in range(100):
        m = random_qubit_set(rng, 3)
        full = dimension_measure_qubit(m).value
        for x in range(3):
            assert dimension_measure_qubit(drop_input(m, x)).value <= full + 2 * GAP_TOL


def test_convexity(rng):
    for i in range(100):
        m1, m2 = random_qubit_set(rng), random_qubit_set(rng)
        t = (0.25, 0.5, 0.75)[i % 3]
        v1, v2 = dimension_measure_qubit(m1).value, dimension_measure_qubit(m2).value
        vm = dimension_measure_qubit(mix_povms(m1, m2, t)).value
        assert vm <= t * v1 + (1 - t) * v2 + 2 * GAP_TOL


def test_twirl_idempotent(rng):
    g = mub_group(3)
    for _ in range(100):
        once = twirl(random_pseudo(rng), g)
        assert np.abs(twirl(once, g).effects - once.effects).max() <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3, 5, 7]), st.floats(0, 1))
def test_extract_inverts_mub_pair(d, p):
    assert abs(extract_visibility(mub_pair(d, p)) - p) <= 1e-9
