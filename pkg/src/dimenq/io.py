"""JSON encoding of matrices and device files, plus invariant reports.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists of them. File kinds are recognized by their keys:

- channel: ``{"d_in", "d_out", "kraus": [...]}`` or ``{"d_in", "d_out", "choi"}``
- state: ``{"dims": [dA, dB], "rho"}``
- POVM set: ``{"dim", "n_inputs", "n_outcomes", "effects": [[...]]}``
- assemblage: ``{"dim", "n_inputs", "n_outcomes", "elements": [[...]]}``
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channels import Channel, ChoiMatrix, kraus_from_choi
from .linalg import partial_trace
from .measurements import PovmSet
from .states import DensityMatrix
from .steering import Assemblage


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def decode_matrix(obj, what: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{what}: not a nested array of [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError(f"{what}: expected rows of [re, im] pairs, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite entry")
    return arr[..., 0] + 1j * arr[..., 1]


def _decode_grid(obj, what):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ValueError(f"{what}: expected a list of lists of matrices")
    rows = [[decode_matrix(m, f"{what}[{x}][{a}]") for a, m in enumerate(row)] for x, row in enumerate(obj)]
    shapes = {m.shape for row in rows for m in row}
    if len(shapes) != 1 or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{what}: ragged entries")
    return np.array(rows)


def kind_of(obj: dict) -> str:
    if not isinstance(obj, dict):
        raise ValueError("device file must hold a JSON object")
    if "kraus" in obj or "choi" in obj:
        return "channel"
    if "rho" in obj:
        return "state"
    if "effects" in obj:
        return "povm"
    if "elements" in obj:
        return "assemblage"
    raise ValueError("unrecognized device file: expected one of kraus/choi, rho, effects, elements")


def _require(obj, keys, kind):
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ValueError(f"{kind} file is missing field(s): {', '.join(missing)}")


def _check_shape(arr, obj, kind):
    dim, X, A = int(obj["dim"]), int(obj["n_inputs"]), int(obj["n_outcomes"])
    if arr.shape != (X, A, dim, dim):
        raise ValueError(f"{kind}: declared (n_inputs, n_outcomes, dim) = {(X, A, dim)} but data has shape {arr.shape}")


def raw_from_json(obj: dict):
    """Decode to plain arrays without checking physical invariants."""
    kind = kind_of(obj)
    if kind == "channel":
        _require(obj, ["d_in", "d_out"], kind)
        if ("kraus" in obj) == ("choi" in obj):
            raise ValueError("channel file must contain exactly one of 'kraus' and 'choi'")
        if "kraus" in obj:
            ks = [decode_matrix(k, f"kraus[{i}]") for i, k in enumerate(obj["kraus"])]
            return kind, {"d_in": int(obj["d_in"]), "d_out": int(obj["d_out"]), "kraus": ks}
        return kind, {"d_in": int(obj["d_in"]), "d_out": int(obj["d_out"]), "choi": decode_matrix(obj["choi"], "choi")}
    if kind == "state":
        _require(obj, ["dims"], kind)
        return kind, {"dims": tuple(int(v) for v in obj["dims"]), "rho": decode_matrix(obj["rho"], "rho")}
    key = "effects" if kind == "povm" else "elements"
    _require(obj, ["dim", "n_inputs", "n_outcomes"], kind)
    arr = _decode_grid(obj[key], key)
    _check_shape(arr, obj, kind)
    return kind, {key: arr}


def from_json(obj: dict):
    """Build the typed object; raises ValueError naming the first violated invariant."""
    kind, raw = raw_from_json(obj)
    if kind == "channel":
        if "kraus" in raw:
            return Channel(raw["d_in"], raw["d_out"], tuple(raw["kraus"]))
        return kraus_from_choi(ChoiMatrix(raw["d_in"], raw["d_out"], raw["choi"]))
    if kind == "state":
        return DensityMatrix(raw["dims"], raw["rho"])
    if kind == "povm":
        return PovmSet(raw["effects"])
    return Assemblage(raw["elements"])


def to_json(obj) -> dict:
    if isinstance(obj, Channel):
        return {"d_in": obj.d_in, "d_out": obj.d_out, "kraus": [encode_matrix(k) for k in obj.kraus]}
    if isinstance(obj, ChoiMatrix):
        return {"d_in": obj.d_in, "d_out": obj.d_out, "choi": encode_matrix(obj.operator)}
    if isinstance(obj, DensityMatrix):
        return {"dims": list(obj.dims), "rho": encode_matrix(obj.operator)}
    if isinstance(obj, Assemblage):
        grid = [[encode_matrix(m) for m in row] for row in obj.elements]
        return {"dim": obj.dim, "n_inputs": obj.n_inputs, "n_outcomes": obj.n_outcomes, "elements": grid}
    if hasattr(obj, "effects"):
        grid = [[encode_matrix(m) for m in row] for row in obj.effects]
        return {"dim": obj.dim, "n_inputs": obj.n_inputs, "n_outcomes": obj.n_outcomes, "effects": grid}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load(path) -> object:
    return from_json(read_json(path))


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def save(obj, path):
    Path(path).write_text(json.dumps(to_json(obj)) + "\n")


# ---------------------------------------------------------------------------
# invariant reports
# ---------------------------------------------------------------------------


def _herm_residual(m):
    return float(np.abs(m - m.conj().T).max(initial=0.0))


def _min_eig(m):
    h = 0.5 * (m + m.conj().T)
    return float(np.linalg.eigvalsh(h)[0])


def validate(obj: dict) -> list[str]:
    """Every invariant violation of a decoded device file, one message each."""
    try:
        kind, raw = raw_from_json(obj)
    except ValueError as exc:
        return [str(exc)]
    out = []
    if kind == "channel":
        d_in, d_out = raw["d_in"], raw["d_out"]
        if "kraus" in raw:
            for i, k in enumerate(raw["kraus"]):
                if k.shape != (d_out, d_in):
                    out.append(f"kraus[{i}]: shape {k.shape}, expected {(d_out, d_in)}")
            if not out:
                tp = sum(k.conj().T @ k for k in raw["kraus"])
                r = float(np.abs(tp - np.eye(d_in)).max())
                if r > 1e-9:
                    out.append(f"trace preservation: sum K^dag K deviates from identity by {r:.3g}")
        else:
            c = raw["choi"]
            if c.shape != (d_in * d_out,) * 2:
                return [f"choi: shape {c.shape}, expected {(d_in * d_out,) * 2}"]
            if _herm_residual(c) > 1e-9:
                out.append(f"choi: not Hermitian, residual {_herm_residual(c):.3g}")
            if _min_eig(c) < -1e-9:
                out.append(f"choi: not positive, min eigenvalue {_min_eig(c):.3g}")
            r = float(np.abs(partial_trace(c, (d_in, d_out), "B") - np.eye(d_in) / d_in).max())
            if r > 1e-8:
                out.append(f"choi: Tr_B deviates from identity/d_in by {r:.3g}")
        return out
    if kind == "state":
        rho, dims = raw["rho"], raw["dims"]
        if rho.shape != (dims[0] * dims[1],) * 2:
            return [f"rho: shape {rho.shape} does not match dims {dims}"]
        if _herm_residual(rho) > 1e-12:
            out.append(f"rho: not Hermitian, residual {_herm_residual(rho):.3g}")
        if _min_eig(rho) < -1e-10:
            out.append(f"rho: not positive, min eigenvalue {_min_eig(rho):.3g}")
        tr = float(np.trace(rho).real)
        if abs(tr - 1) > 1e-10:
            out.append(f"rho: trace {tr:.12g}, residual {abs(tr - 1):.3g}")
        return out
    key = "effects" if kind == "povm" else "elements"
    arr = raw[key]
    name = "M" if kind == "povm" else "sigma"
    for x in range(arr.shape[0]):
        for a in range(arr.shape[1]):
            m = arr[x, a]
            if _herm_residual(m) > 1e-12:
                out.append(f"{name}[{a}|{x}]: not Hermitian, residual {_herm_residual(m):.3g}")
            if _min_eig(m) < -1e-10:
                out.append(f"{name}[{a}|{x}]: not positive, min eigenvalue {_min_eig(m):.3g}")
    sums = arr.sum(axis=1)
    d = arr.shape[-1]
    if kind == "povm":
        for x in range(arr.shape[0]):
            r = float(np.abs(sums[x] - np.eye(d)).max())
            if r > 1e-9:
                out.append(f"input x={x}: effects sum to identity only within residual {r:.3g}")
    else:
        for x in range(1, arr.shape[0]):
            r = float(np.abs(sums[x] - sums[0]).max())
            if r > 1e-9:
                out.append(f"no-signalling: marginal of input x={x} differs from x=0 by {r:.3g}")
        tr = float(np.trace(sums[0]).real)
        if abs(tr - 1) > 1e-9:
            out.append(f"marginal trace {tr:.12g}, residual {abs(tr - 1):.3g}")
    return out

