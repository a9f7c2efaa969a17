import json

import numpy as np
import pytest

from dimenq import io
from dimenq import linalg as la
from dimenq.channels import choi_of, named_channel
from dimenq.measurements import PovmSet, mub_pair
from dimenq.states import DensityMatrix, werner
from dimenq.steering import from_povms, gap_example


def povm_json(effects):
    effects = np.asarray(effects)
    return {
        "dim": effects.shape[-1],
        "n_inputs": effects.shape[0],
        "n_outcomes": effects.shape[1],
        "effects": [[io.encode_matrix(m) for m in row] for row in effects],
    }


def test_matrix_encoding_round_trip(rng):
    h = la.random_hermitian(3, rng)
    enc = io.encode_matrix(h)
    assert enc[0][1] == [h[0, 1].real, h[0, 1].imag]
    assert np.array_equal(io.decode_matrix(json.loads(json.dumps(enc))), h)


def test_decode_rejects_bad_shapes():
    with pytest.raises(ValueError, match="re, im"):
        io.decode_matrix([[1.0, 2.0]])
    with pytest.raises(ValueError, match="non-finite"):
        io.decode_matrix([[[float("nan"), 0.0]]])


@pytest.mark.parametrize(
    "obj",
    [
        named_channel("amplitude_damping", 0.3),
        choi_of(named_channel("depolarizing", 0.2)),
        werner(0.7),
        mub_pair(3, 0.8),
        gap_example(3).assemblage,
    ],
    ids=["channel", "choi", "state", "povm", "assemblage"],
)
def test_round_trip(obj, tmp_path):
    path = tmp_path / "device.json"
    io.save(obj, path)
    assert io.validate(io.read_json(path)) == []
    back = io.load(path)
    if hasattr(obj, "kraus"):
        assert np.allclose(choi_of(back).operator, choi_of(obj).operator, atol=1e-12)
    elif hasattr(obj, "d_in"):
        assert np.allclose(choi_of(back).operator, obj.operator, atol=1e-12)
    elif hasattr(obj, "dims"):
        assert np.array_equal(back.operator, obj.operator)
    elif hasattr(obj, "effects"):
        assert np.array_equal(back.effects, obj.effects)
    else:
        assert np.array_equal(back.elements, obj.elements)


def test_validate_ok():
    assert io.validate(povm_json(mub_pair(2, 0.9).effects)) == []


def test_validate_names_input_and_residual():
    eff = mub_pair(2, 1.0).effects.copy()
    eff[1] *= 0.99
    msgs = io.validate(povm_json(eff))
    assert len(msgs) == 1
    assert "x=1" in msgs[0] and "0.01" in msgs[0]


def test_validate_flags_signalling():
    el = from_povms(mub_pair(2, 1.0)).elements.copy()
    el[1] = [np.diag([0.5, 0.0]), np.diag([0.0, 0.0])]
    obj = {"dim": 2, "n_inputs": 2, "n_outcomes": 2, "elements": [[io.encode_matrix(m) for m in r] for r in el]}
    msgs = io.validate(obj)
    assert any("no-signalling" in m and "x=1" in m for m in msgs)


def test_validate_reports_each_violation():
    rho = np.diag([0.6, 0.5, -0.05, -0.05]).astype(complex)
    msgs = io.validate({"dims": [2, 2], "rho": io.encode_matrix(rho)})
    assert any("not positive" in m for m in msgs)
    assert not any("trace" in m for m in msgs)
    msgs = io.validate({"d_in": 2, "d_out": 2, "kraus": [io.encode_matrix(np.eye(2) * 0.9)]})
    assert msgs and "trace preservation" in msgs[0]


def test_from_json_raises_on_invalid():
    eff = mub_pair(2, 1.0).effects * 0.99
    with pytest.raises(ValueError):
        io.from_json(povm_json(eff))
    with pytest.raises(ValueError, match="unrecognized"):
        io.from_json({"foo": 1})
    with pytest.raises(ValueError, match="missing"):
        io.from_json({"effects": []})


def test_declared_shape_must_match():
    obj = povm_json(mub_pair(2, 1.0).effects)
    obj["n_outcomes"] = 3
    with pytest.raises(ValueError, match="declared"):
        io.from_json(obj)


def test_invalid_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValueError, match="invalid JSON"):
        io.load(path)


def test_state_shape_mismatch():
    msgs = io.validate({"dims": [2, 3], "rho": io.encode_matrix(np.eye(4) / 4)})
    assert msgs == ["rho: shape (4, 4) does not match dims (2, 3)"]
    assert isinstance(io.from_json({"dims": [2, 2], "rho": io.encode_matrix(np.eye(4) / 4)}), DensityMatrix)
    assert isinstance(io.from_json(povm_json(mub_pair(2, 0.5).effects)), PovmSet)
