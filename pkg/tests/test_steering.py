import math

import numpy as np
import pytest

from dimenq import linalg as la
from dimenq.measurements import PovmSet, dimension_measure_qubit, joint_measurability, mub_pair
from dimenq.states import DensityMatrix, product
from dimenq.steering import (
    Assemblage,
    from_povms,
    from_state_and_povms,
    gap_example,
    is_unsteerable,
    mix_assemblages,
    pretty_good_measurements,
    schmidt_measure_pgm_bound,
    schmidt_measure_qubit_assemblage,
    schmidt_measure_upper_bound,
    steering_weight,
)

from conftest import assert_certified, random_qubit_set

GAP_TOL = 1e-7
BELL = DensityMatrix((2, 2), la.proj(la.max_entangled(2)))


def random_assemblage(rng):
    rho = la.random_density(4, rng, rank=int(rng.integers(1, 5)))
    return from_state_and_povms(DensityMatrix((2, 2), rho), random_qubit_set(rng))


def sharp_set(rng):
    eff = []
    for _ in range(2):
        u = la.random_unitary(2, rng)
        eff.append([la.proj(u[:, 0]), la.proj(u[:, 1])])
    return PovmSet(np.array(eff))


def noisy_pure_assemblage(rng, rho=None):
    """Sharp measurements on a random pure state, then classical noise; about half are steerable."""
    if rho is None:
        rho = DensityMatrix((2, 2), la.proj(la.random_unitary(4, rng)[:, 0]))
    s = from_state_and_povms(rho, sharp_set(rng))
    return mix_assemblages(s, classical_noise(s), rng.uniform(0.3, 1))


def classical_noise(s):
    """Tr(σ_{a|x})·ρ_σ: same marginal, no steering."""
    tr = np.trace(s.elements, axis1=-2, axis2=-1).real
    return Assemblage(tr[..., None, None] * s.marginal)


def test_separable_state_is_unsteerable(rng):
    rho = 0.5 * product(la.random_density(2, rng), la.random_density(2, rng)).operator
    rho = rho + 0.5 * product(la.random_density(2, rng), la.random_density(2, rng)).operator
    s = from_state_and_povms(DensityMatrix((2, 2), rho), random_qubit_set(rng))
    assert steering_weight(s).value == pytest.approx(0.0, abs=1e-6)


def test_bell_xz_assemblage():
    s = from_state_and_povms(BELL, mub_pair(2, 1.0))
    tr = np.trace(s.elements, axis1=-2, axis2=-1).real
    assert np.allclose(tr, 0.5)
    assert all(la.numerical_rank(e) == 1 for e in s.elements.reshape(-1, 2, 2))
    r = schmidt_measure_qubit_assemblage(s)
    assert r.value == pytest.approx(1.0, abs=1e-6)
    assert_certified(r)


def test_product_state_elements(rng):
    rho_a, rho_b = la.random_density(2, rng), la.random_density(2, rng)
    m = random_qubit_set(rng)
    s = from_state_and_povms(product(rho_a, rho_b), m)
    for x in range(2):
        for a in range(2):
            p = np.trace(m.effects[x, a] @ rho_a).real
            assert np.allclose(s.elements[x, a], p * rho_b)


def test_noisy_bell_below_threshold():
    s = from_state_and_povms(BELL, mub_pair(2, 0.7))
    assert schmidt_measure_qubit_assemblage(s).value == pytest.approx(0.0, abs=1e-6)
    s = from_state_and_povms(BELL, mub_pair(2, 0.75))
    assert schmidt_measure_qubit_assemblage(s).value > 1e-3


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        from_state_and_povms(DensityMatrix((3, 2), np.eye(6) / 6), mub_pair(2, 1.0))


def test_invalid_assemblages():
    with pytest.raises(ValueError, match="signalling"):
        Assemblage(np.array([[np.diag([0.5, 0]), np.diag([0, 0.5])], [np.diag([1.0, 0]), np.zeros((2, 2))]]))
    with pytest.raises(ValueError, match="trace"):
        Assemblage(np.array([[np.eye(2), np.eye(2)]]))


def test_qubit_measure_rejects_qutrits():
    with pytest.raises(ValueError):
        schmidt_measure_qubit_assemblage(gap_example(3).assemblage)


def test_upper_bound_matches_exact_for_qubits(rng):
    s = random_assemblage(rng)
    assert schmidt_measure_upper_bound(s).value == pytest.approx(schmidt_measure_qubit_assemblage(s).value, abs=1e-9)


@pytest.mark.parametrize("d", range(2, 12))
def test_gap_example_decomposition(d):
    g = gap_example(d)
    assert g.true_value == 1.0
    assert g.residual <= 1e-12
    assert sum(g.weights) == pytest.approx(1.0)
    recon = sum(w * p.elements for w, p in zip(g.weights, g.decomposition))
    assert np.abs(recon - g.assemblage.elements).max() <= 1e-12
    for part in g.decomposition:
        assert la.numerical_rank(part.marginal) == 2
    assert np.allclose(g.assemblage.marginal, np.eye(d) / d)


@pytest.mark.parametrize("d", [3, 5, 7])
def test_gap_example_bound_is_log_d(d):
    r = schmidt_measure_upper_bound(gap_example(d).assemblage)
    assert r.value == pytest.approx(math.log2(d), abs=1e-4)
    assert_certified(r)


def test_gap_example_qubit_case_is_unsteerable():
    # at d = 2 the second input is σ_{a|1} = 𝟙/4, so an LHS model exists
    s = gap_example(2).assemblage
    assert np.allclose(s.elements[1], np.eye(2) / 4)
    assert is_unsteerable(s)


@pytest.mark.parametrize("d", [3, 5])
def test_gap_example_halving(d):
    s = gap_example(d).assemblage
    diag = np.array([[la.proj(la.ket(d, a)) / d for a in range(d)]] * 2)
    partner = Assemblage(diag)
    assert is_unsteerable(partner)
    full = schmidt_measure_upper_bound(s).value
    half = schmidt_measure_upper_bound(mix_assemblages(s, partner, 0.5)).value
    assert half == pytest.approx(full / 2, abs=2 * GAP_TOL * math.log2(d))


def test_pgm_of_maximally_mixed_marginal(rng):
    m = random_qubit_set(rng, 3)
    assert np.abs(pretty_good_measurements(from_povms(m)).effects - m.effects).max() <= 1e-12
    m5 = mub_pair(5, 0.8)
    assert np.abs(pretty_good_measurements(from_povms(m5)).effects - m5.effects).max() <= 1e-12


def test_pgm_rank_deficient_marginal(rng):
    psi = la.random_unitary(2, rng)[:, 0]
    rho = DensityMatrix((2, 2), la.tensor(la.random_density(2, rng), la.proj(psi)))
    pgm = pretty_good_measurements(from_state_and_povms(rho, random_qubit_set(rng)))
    assert np.abs(pgm.effects.sum(axis=1) - np.eye(2)).max() <= 1e-9


def test_pgm_of_unsteerable_is_jm():
    s = from_state_and_povms(BELL, mub_pair(2, 0.6))
    assert joint_measurability(pretty_good_measurements(s)).jointly_measurable


def test_pgm_bound_examples(rng):
    b = schmidt_measure_pgm_bound(from_povms(mub_pair(2, 0.9)))
    assert b.s_m_assemblage == pytest.approx(b.d_m_pgm_bound, abs=2 * GAP_TOL)
    b = schmidt_measure_pgm_bound(from_state_and_povms(BELL, mub_pair(2, 0.5)))
    assert b.s_m_assemblage == pytest.approx(0.0, abs=1e-6)
    assert b.d_m_pgm_bound == pytest.approx(0.0, abs=1e-6)
    for _ in range(10):
        s = random_assemblage(rng)
        b = schmidt_measure_pgm_bound(s)
        assert b.holds
        assert b.s_m_assemblage <= b.d_m_pgm_bound + 2 * GAP_TOL


def test_weyl_invariant_correspondence():
    for p in (0.6, 0.75, 0.9, 1.0):
        m = mub_pair(2, p)
        a = schmidt_measure_qubit_assemblage(from_povms(m)).value
        assert a == pytest.approx(dimension_measure_qubit(m).value, abs=2 * GAP_TOL)


def test_zero_iff_lhs(rng):
    # independent oracle: full-rank marginal, unsteerable iff the PGMs are jointly measurable
    zeros = 0
    for _ in range(100):
        s = noisy_pure_assemblage(rng)
        r = schmidt_measure_qubit_assemblage(s)
        assert_certified(r)
        zero = r.value <= 1e-6
        zeros += zero
        assert zero == joint_measurability(pretty_good_measurements(s), tol=1e-6).jointly_measurable
    assert 10 < zeros < 90


def test_convexity(rng):
    for i in range(100):
        # a common state keeps the marginals equal so the mixture is an assemblage
        rho = DensityMatrix((2, 2), la.proj(la.random_unitary(4, rng)[:, 0]))
        s1, s2 = noisy_pure_assemblage(rng, rho), noisy_pure_assemblage(rng, rho)
        t = (0.25, 0.5, 0.75)[i % 3]
        v1 = schmidt_measure_qubit_assemblage(s1).value
        v2 = schmidt_measure_qubit_assemblage(s2).value
        vm = schmidt_measure_qubit_assemblage(mix_assemblages(s1, s2, t)).value
        assert vm <= t * v1 + (1 - t) * v2 + 2 * GAP_TOL
