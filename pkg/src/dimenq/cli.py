"""Command-line entry point: ``dimenq <subcommand> ...``.

Every subcommand prints one JSON object with at least ``value``,
``status``, ``certificate_summary`` and ``runtime_ms``. ``sweep`` writes
CSV instead. Exit codes: 0 success, 1 malformed input or violated
invariant, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io
from . import linalg as la
from .channels import Channel, dimension_measure, named_channel
from .conic import MeasureResult, SolverError
from .measurements import (
    PovmSet,
    PseudoMeasurement,
    dimension_measure_curve_from_constructions,
    dimension_measure_qubit,
    dimension_measure_upper_bound,
    extract_visibility,
    heuristic_mub_construction,
    incompatibility_weight,
    joint_measurability,
    mub_group,
    mub_pair,
    twirl,
)
from .states import DensityMatrix, schmidt_measure_2xn, werner
from .steering import (
    Assemblage,
    from_state_and_povms,
    gap_example,
    pretty_good_measurements,
    schmidt_measure_pgm_bound,
    schmidt_measure_qubit_assemblage,
    schmidt_measure_upper_bound,
)

log = logging.getLogger("dimenq")

CHANNEL_FAMILIES = ["depolarizing", "amplitude_damping", "erasure", "identity", "dephasing"]
SWEEP_TARGETS = ["channel-dim", "meas-dim", "meas-weight", "jm-robustness", "steer-schmidt", "state-schmidt"]


class InputError(ValueError):
    """Malformed or invariant-violating input (exit code 1)."""


def fmt(v: float) -> str:
    return format(float(v), ".9g")


def _round(v):
    return float(fmt(v)) if isinstance(v, float) and math.isfinite(v) else v


def _tols(args):
    return {"gap_tol": args.gap_tol, "feas_tol": args.feas_tol}


def _dump(args, result):
    if getattr(args, "dump_sdp", None) and isinstance(result, MeasureResult):
        with open(args.dump_sdp, "w") as fh:
            fh.write(result.problem.listing())


def _summary(args, result: MeasureResult) -> dict:
    rep = result.check(**_tols(args)).summary()
    return {k: _round(v) for k, v in rep.items()}


def _sdp_output(args, result: MeasureResult, **extra) -> dict:
    _dump(args, result)
    out = {"value": result.value, "status": result.solution.status, "certificate_summary": _summary(args, result)}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# device loading
# ---------------------------------------------------------------------------


def _load(path, expected):
    obj = io.from_json(io.read_json(path))
    if not isinstance(obj, expected):
        raise InputError(f"{path}: expected a {expected.__name__} file, got {type(obj).__name__}")
    return obj


def _channel(args) -> Channel:
    if args.file:
        return _load(args.file, Channel)
    if args.family is None:
        raise InputError("give --family/--param or --file")
    return named_channel(args.family, args.param)


def _povms(args) -> PovmSet:
    if args.file:
        return _load(args.file, PovmSet)
    if args.mub_pair is None:
        raise InputError("give --mub-pair D --p P or --file")
    return mub_pair(args.mub_pair, args.p)


def _state(args) -> DensityMatrix:
    if args.file:
        return _load(args.file, DensityMatrix)
    if args.werner is None:
        raise InputError("give --werner LAMBDA or --file")
    return werner(args.werner)


def bell_mub_assemblage(p: float) -> Assemblage:
    """Bell state steered by the qubit X/Z pair of visibility p."""
    bell = DensityMatrix((2, 2), la.proj(la.max_entangled(2)))
    return from_state_and_povms(bell, mub_pair(2, p))


def _assemblage(args) -> Assemblage:
    if args.file:
        return _load(args.file, Assemblage)
    if getattr(args, "gap_example", None):
        return gap_example(args.gap_example).assemblage
    if getattr(args, "bell_mub", None) is not None:
        return bell_mub_assemblage(args.bell_mub)
    raise InputError("give --file, --bell-mub P or --gap-example D")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_channel_dim(args):
    return _sdp_output(args, dimension_measure(_channel(args), **_tols(args)))


def cmd_state_schmidt(args):
    return _sdp_output(args, schmidt_measure_2xn(_state(args), **_tols(args)))


def _meas_dim(m, tols):
    if m.dim == 2:
        return dimension_measure_qubit(m, **tols), "exact"
    return dimension_measure_upper_bound(m, **tols), "upper_bound"


def cmd_meas_dim(args):
    res, kind = _meas_dim(_povms(args), _tols(args))
    return _sdp_output(args, res, kind=kind)


def cmd_meas_weight(args):
    return _sdp_output(args, incompatibility_weight(_povms(args), **_tols(args)))


def cmd_jm_check(args):
    jm = joint_measurability(_povms(args), **_tols(args))
    return _sdp_output(args, jm.result, jointly_measurable=jm.jointly_measurable, robustness=jm.robustness)


def cmd_steer_schmidt(args):
    return _sdp_output(args, schmidt_measure_qubit_assemblage(_assemblage(args), **_tols(args)))


def cmd_steer_bound(args):
    return _sdp_output(args, schmidt_measure_upper_bound(_assemblage(args), **_tols(args)))


def cmd_pgm(args):
    s = _assemblage(args)
    m = pretty_good_measurements(s)
    out = {"value": None, "status": "ok", "certificate_summary": None, "povm": io.to_json(m)}
    if s.dim == 2:
        rep = schmidt_measure_pgm_bound(s)
        out.update(value=rep.d_m_pgm_bound, s_m_assemblage=rep.s_m_assemblage, d_m_pgm_bound=rep.d_m_pgm_bound, holds=rep.holds)
    return out


def cmd_twirl(args):
    obj = io.read_json(args.file)
    kind, raw = io.raw_from_json(obj)
    if kind != "povm":
        raise InputError(f"{args.file}: twirl needs a POVM or pseudo-measurement file")
    eff = raw["effects"]
    typ = PovmSet if np.allclose(eff.sum(axis=1), np.eye(eff.shape[-1]), atol=1e-9) else PseudoMeasurement
    m = typ(eff)
    out_m = twirl(m, mub_group(m.dim))
    try:
        p = extract_visibility(out_m)
    except ValueError:
        p = None
    return {"value": p, "status": "ok", "certificate_summary": None, "result": io.to_json(out_m)}


def cmd_gap_example(args):
    g = gap_example(args.d)
    res = schmidt_measure_upper_bound(g.assemblage, **_tols(args))
    return _sdp_output(args, res, true_value=g.true_value, decomposition_residual=g.residual, components=len(g.decomposition))


def cmd_mub_heuristic(args):
    subsets = None
    if args.subsets:
        try:
            o1, o2 = args.subsets.split(";")
            subsets = tuple(tuple(int(v) for v in part.split(",") if v.strip()) for part in (o1, o2))
        except ValueError as exc:
            raise InputError("--subsets must look like '0,1;0,2'") from exc
    h = heuristic_mub_construction(args.d, args.k, subsets)
    out = {
        "value": h.p_k,
        "status": "heuristic",
        "certificate_summary": None,
        "subsets": [list(h.subsets[0]), list(h.subsets[1])],
        "degenerate_cutoff": h.tie,
    }
    if args.p is not None:
        out["curve_value"] = dimension_measure_curve_from_constructions(args.d, args.p)
    return out


def cmd_validate(args):
    problems = io.validate(io.read_json(args.file))
    for msg in problems:
        print(msg)
    if not problems:
        print("ok")
    return None if not problems else 1


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def sweep_point(target: str, param: float, opts: dict) -> tuple[float, str]:
    """One sweep value; never raises for solver trouble, it reports the status."""
    tols = {"gap_tol": opts["gap_tol"], "feas_tol": opts["feas_tol"]}
    try:
        if target == "channel-dim":
            v = dimension_measure(named_channel(opts["family"], param), **tols).value
        elif target == "state-schmidt":
            v = schmidt_measure_2xn(werner(param), **tols).value
        elif target == "meas-dim":
            v = _meas_dim(mub_pair(opts["mub_pair"], param), tols)[0].value
        elif target == "meas-weight":
            v = incompatibility_weight(mub_pair(opts["mub_pair"], param), **tols).value
        elif target == "jm-robustness":
            v = joint_measurability(mub_pair(opts["mub_pair"], param), **tols).robustness
        elif target == "steer-schmidt":
            v = schmidt_measure_qubit_assemblage(bell_mub_assemblage(param), **tols).value
        else:
            raise InputError(f"unknown sweep target {target!r}")
    except SolverError as exc:
        return math.nan, exc.solution.status if exc.solution else "error"
    return v, "optimal"


def _workers(n_points: int) -> int:
    cap = os.environ.get("DIMENQ_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise InputError(f"DIMENQ_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(n, n_points))


def run_sweep(target, params, opts) -> list[tuple[float, float, str]]:
    workers = _workers(len(params))
    if workers == 1:
        values = [sweep_point(target, p, opts) for p in params]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(sweep_point, [target] * len(params), params, [opts] * len(params)))
    return [(p, v, s) for p, (v, s) in zip(params, values)]


def sweep_csv(rows) -> str:
    lines = ["param,value,status"]
    lines += [f"{fmt(p)},{fmt(v)},{s}" for p, v, s in rows]
    return "\n".join(lines) + "\n"


def monotonicity_violations(target, opts, rows, tol=1e-6) -> list[str]:
    """Value must not grow with noise: noise is the parameter for depolarizing, 1 − p for MUB pairs."""
    if target == "channel-dim" and opts.get("family") == "depolarizing":
        sign = -1.0
    elif target == "meas-dim":
        sign = 1.0
    else:
        return []
    out = []
    for (p0, v0, _), (p1, v1, _) in zip(rows, rows[1:]):
        if math.isfinite(v0) and math.isfinite(v1) and sign * (v1 - v0) < -tol:
            out.append(f"value decreases with less noise between param {fmt(p0)} and {fmt(p1)}: {fmt(v0)} -> {fmt(v1)}")
    return out


def cmd_sweep(args):
    if args.steps < 2 or not args.start < args.stop:
        raise InputError("sweep needs steps >= 2 and start < stop")
    if args.target == "channel-dim" and not args.family:
        raise InputError("channel-dim sweep needs --family")
    if args.target in ("meas-dim", "meas-weight", "jm-robustness") and not args.mub_pair:
        raise InputError(f"{args.target} sweep needs --mub-pair D")
    params = [float(v) for v in np.linspace(args.start, args.stop, args.steps)]
    opts = {"family": args.family, "mub_pair": args.mub_pair, **_tols(args)}
    rows = run_sweep(args.target, params, opts)
    text = sweep_csv(rows)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    bad = monotonicity_violations(args.target, opts, rows)
    for msg in bad:
        print(f"monotonicity: {msg}", file=sys.stderr)
    if any(s != "optimal" for _, _, s in rows):
        return 2
    return 1 if bad else None


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gap-tol", type=float, default=1e-7)
    common.add_argument("--feas-tol", type=float, default=1e-8)
    common.add_argument("--dump-sdp", metavar="PATH", help="write the SDP as a plain-text LMI listing")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dimenq", description="Average dimensionality of channels, measurements and assemblages.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    def channel_opts(sp):
        sp.add_argument("--family", choices=CHANNEL_FAMILIES)
        sp.add_argument("--param", type=float, default=0.0)
        sp.add_argument("--file")

    def povm_opts(sp):
        sp.add_argument("--mub-pair", type=int, metavar="D")
        sp.add_argument("--p", type=float, default=1.0)
        sp.add_argument("--file")

    def assemblage_opts(sp):
        sp.add_argument("--file")
        sp.add_argument("--bell-mub", type=float, metavar="P")
        sp.add_argument("--gap-example", type=int, metavar="D")

    channel_opts(add("channel-dim", cmd_channel_dim, "channel dimension measure (d_in*d_out <= 6)"))
    sp = add("state-schmidt", cmd_state_schmidt, "Schmidt measure of a 2x2 or 2x3 state")
    sp.add_argument("--werner", type=float, metavar="LAMBDA")
    sp.add_argument("--file")
    povm_opts(add("meas-dim", cmd_meas_dim, "measurement dimension measure (exact for qubits, upper bound otherwise)"))
    povm_opts(add("meas-weight", cmd_meas_weight, "incompatibility weight"))
    povm_opts(add("jm-check", cmd_jm_check, "joint measurability and white-noise robustness"))
    assemblage_opts(add("steer-schmidt", cmd_steer_schmidt, "Schmidt measure of a qubit assemblage"))
    assemblage_opts(add("steer-bound", cmd_steer_bound, "log2(d) upper bound on the assemblage Schmidt measure"))
    assemblage_opts(add("pgm", cmd_pgm, "pretty good measurements of an assemblage"))
    sp = add("twirl", cmd_twirl, "average a measurement pair over the MUB symmetry group")
    sp.add_argument("--file", required=True)
    sp = add("gap-example", cmd_gap_example, "assemblage whose log2(d) bound is loose")
    sp.add_argument("d", type=int)
    sp = add("mub-heuristic", cmd_mub_heuristic, "rank-k heuristic construction for the MUB pair")
    sp.add_argument("d", type=int)
    sp.add_argument("k", type=int)
    sp.add_argument("--subsets", help="O1;O2 as comma lists, e.g. '0,1;0,2'")
    sp.add_argument("--p", type=float, help="also report the construction curve at this visibility")
    sp = add("sweep", cmd_sweep, "parameter sweep to CSV")
    sp.add_argument("--target", choices=SWEEP_TARGETS, required=True)
    sp.add_argument("--family", choices=CHANNEL_FAMILIES)
    sp.add_argument("--mub-pair", type=int, metavar="D")
    sp.add_argument("--start", type=float, required=True)
    sp.add_argument("--stop", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--output", "-o")
    sp = add("validate", cmd_validate, "check every invariant of a device file")
    sp.add_argument("file")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        out = args.fn(args)
    except SolverError as exc:
        sol = exc.solution
        payload = {"value": None, "status": sol.status if sol else "error", "certificate_summary": None}
        payload["runtime_ms"] = round((time.perf_counter() - t0) * 1000, 3)
        print(json.dumps(payload))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if out is None or isinstance(out, int):
        return out or 0
    out["runtime_ms"] = round((time.perf_counter() - t0) * 1000, 3)
    out = {k: _round(v) for k, v in out.items()}
    print(json.dumps(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
