import numpy as np
import pytest

from dimenq import linalg as la
from dimenq.channels import Channel
from dimenq.measurements import PovmSet

CERT_GAP = 1e-6


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_channel(rng, d_in=2, d_out=2, n_kraus=2):
    """Kraus operators cut from a random isometry C^d_in -> C^(d_out n)."""
    v = la.random_unitary(d_out * n_kraus, rng)[:, :d_in]
    return Channel(d_in, d_out, tuple(v.reshape(n_kraus, d_out, d_in)))


def random_effect(rng, d=2):
    u = la.random_unitary(d, rng)
    return u @ np.diag(rng.uniform(0, 1, d)) @ u.conj().T


def random_qubit_set(rng, n_inputs=2):
    """Two-outcome qubit POVMs with random eigenbases and spectra."""
    eff = []
    for _ in range(n_inputs):
        e = random_effect(rng)
        eff.append([e, np.eye(2) - e])
    return PovmSet(np.array(eff))


def random_one_sided_set(rng, n_inputs=2, lo=0.3):
    """Two-outcome qubit POVMs {η|n⟩⟨n|, 𝟙 − η|n⟩⟨n|}; a rank-one effect per input."""
    eff = []
    for _ in range(n_inputs):
        e = rng.uniform(lo, 1) * la.proj(la.random_unitary(2, rng)[:, 0])
        eff.append([e, np.eye(2) - e])
    return PovmSet(np.array(eff))


def assert_certified(result, gap=CERT_GAP):
    rep = result.check()
    assert result.solution.status == "optimal"
    assert rep.verdict, rep.summary()
    assert rep.gap <= gap


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, when those tests ran."""
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
