import numpy as np
import pytest

from dimenq import linalg as la
from dimenq.states import DensityMatrix, is_ppt, product, schmidt_measure_2xn, schmidt_rank, werner

from conftest import assert_certified

GAP_TOL = 1e-7


def psi_plus_werner(lam):
    psi = la.proj(np.array([0, 1, 1, 0]) / np.sqrt(2))
    return DensityMatrix((2, 2), lam * psi + (1 - lam) * np.eye(4) / 4)


def random_state(rng, dims=(2, 2)):
    n = dims[0] * dims[1]
    return DensityMatrix(dims, la.random_density(n, rng, rank=int(rng.integers(1, n + 1))))


def local_unitary(rng, dims):
    return la.tensor(la.random_unitary(dims[0], rng), la.random_unitary(dims[1], rng))


def test_is_ppt_examples(rng):
    assert is_ppt(product(la.random_density(2, rng), la.random_density(2, rng)))
    assert not is_ppt(psi_plus_werner(0.5))
    assert is_ppt(psi_plus_werner(1 / 3))


@pytest.mark.parametrize("lam, want", [(1.0, 1.0), (0.6, 0.4), (0.2, 0.0)])
def test_werner_measure(lam, want):
    r = schmidt_measure_2xn(werner(lam))
    assert r.value == pytest.approx(want, abs=1e-6)
    assert_certified(r)


def test_psi_plus_variant_agrees():
    assert schmidt_measure_2xn(psi_plus_werner(0.6)).value == pytest.approx(0.4, abs=1e-6)


def test_schmidt_rank_examples():
    assert schmidt_rank(la.PureState(2, 2, la.ket(4, 1))) == 1
    assert schmidt_rank(la.PureState(3, 3, la.max_entangled(3))) == 3
    v = np.zeros(4)
    v[0], v[3] = np.sqrt(0.99), np.sqrt(0.01)
    assert schmidt_rank(la.PureState(2, 2, v)) == 2


def test_two_by_three(rng):
    v = np.zeros(6)
    v[0] = v[4] = 1 / np.sqrt(2)
    r = schmidt_measure_2xn(DensityMatrix((2, 3), la.proj(v)))
    assert r.value == pytest.approx(1.0, abs=1e-6)
    assert_certified(r)


def test_outside_regime_rejected():
    with pytest.raises(ValueError):
        schmidt_measure_2xn(DensityMatrix((3, 3), np.eye(9) / 9))


def test_invalid_density_rejected():
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix((2, 2), np.eye(4))
    with pytest.raises(ValueError, match="negative"):
        DensityMatrix((2, 2), np.diag([1.5, -0.5, 0, 0]))


def test_zero_iff_ppt(rng):
    for _ in range(100):
        rho = random_state(rng)
        r = schmidt_measure_2xn(rho)
        assert_certified(r)
        assert (r.value <= 1e-6) == is_ppt(rho, tol=1e-7)


def test_convexity(rng):
    for i in range(100):
        dims = (2, 2) if i % 2 else (2, 3)
        r1, r2 = random_state(rng, dims), random_state(rng, dims)
        t = (0.25, 0.5, 0.75)[i % 3]
        mixed = DensityMatrix(dims, t * r1.operator + (1 - t) * r2.operator)
        v1, v2, vm = (schmidt_measure_2xn(r) for r in (r1, r2, mixed))
        for r in (v1, v2, vm):
            assert_certified(r)
        assert vm.value <= t * v1.value + (1 - t) * v2.value + 2 * GAP_TOL


def test_local_unitary_invariance(rng):
    for _ in range(100):
        rho = random_state(rng)
        u = local_unitary(rng, rho.dims)
        rotated = DensityMatrix(rho.dims, u @ rho.operator @ u.conj().T)
        assert abs(schmidt_measure_2xn(rho).value - schmidt_measure_2xn(rotated).value) <= 2 * GAP_TOL


def test_mixing_with_noise_never_increases(rng):
    for _ in range(100):
        rho = random_state(rng)
        w = rng.uniform(0, 1)
        noisy = DensityMatrix((2, 2), (1 - w) * rho.operator + w * np.eye(4) / 4)
        assert schmidt_measure_2xn(noisy).value <= schmidt_measure_2xn(rho).value + 2 * GAP_TOL
