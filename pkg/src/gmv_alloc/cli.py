"""Command-line front end: ``gmv-alloc <command> --input spec.json [--output out.json]``.

Exit codes: 0 success, 2 invalid input or domain error, 3 solver failure.
The input schema is documented in ``docs/schema.md``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import allocators, kelly, mc_oracle
from .errors import DomainError, NotConvergedError, NumericalError, QuadratureError
from .gmv_objectives import CeFamily, Gamble, calibrate_risk_aversion
from .market_model import HorizonSpec, PosteriorBelief, ReturnModel, _reject_unknown

SCHEMA_VERSION = 1
COMMANDS = ("calibrate", "allocate", "leverage", "bet", "simulate", "pipeline")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3


class InputError(DomainError):
    pass


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise InputError(f"{where}: missing required field '{key}'")
    return d[key]


def _check_fields(d, allowed: set[str], where: str) -> dict:
    if not isinstance(d, dict):
        raise InputError(f"{where} must be a JSON object")
    _reject_unknown(d, allowed, where)
    return d


# -- command handlers ------------------------------------------------------------


def _calibrate(doc: dict, args) -> dict:
    _check_fields(doc, {"schema_version", "gamble", "family", "mu_a", "alpha"}, "calibrate input")
    g = _check_fields(_require(doc, "gamble", "calibrate input"), {"outcomes", "probs", "ce", "sigma0_2"}, "gamble")
    gamble = Gamble(_require(g, "outcomes", "gamble"), _require(g, "probs", "gamble"), float(_require(g, "ce", "gamble")),
                    float(g.get("sigma0_2", 0.0)))
    family = CeFamily(doc.get("family", "gaussian"))
    a = calibrate_risk_aversion(gamble, family, mu_a=float(doc.get("mu_a", 0.0)), alpha=doc.get("alpha"))
    return {"a": a, "family": family.value, "gamble_mean": gamble.mean, "gamble_var": gamble.var}


def _constraints(doc: dict) -> dict:
    c = _check_fields(doc.get("constraints", {}), {"long_only", "sum_to_one"}, "constraints")
    return {"long_only": bool(c.get("long_only", False)), "sum_to_one": bool(c.get("sum_to_one", False))}


def _risk_aversion(doc: dict, args, where: str) -> float:
    a = args.risk_aversion if args.risk_aversion is not None else _require(doc, "risk_aversion", where)
    return float(a)


def _allocate_model(doc: dict, args, where: str) -> tuple[allocators.AllocationResult, ReturnModel]:
    model = ReturnModel.from_dict(_check_fields(_require(doc, "model", where), set(ReturnModel.__dataclass_fields__), "model"))
    a = _risk_aversion(doc, args, where)
    cons = _constraints(doc)
    solver = doc.get("solver", "auto")
    if solver not in ("auto", "closed", "numeric"):
        raise InputError(f"solver must be auto, closed or numeric, got {solver!r}")
    use_closed = solver == "closed" or (
        solver == "auto" and not model.has_drift_uncertainty and not any(cons.values())
    )
    if use_closed:
        if any(cons.values()):
            raise InputError("constraints need the numeric solver")
        return allocators.solve_closed(model, a), model
    return allocators.solve_numeric(model, a, **cons), model


def _asset_names(doc: dict, n: int):
    names = doc.get("asset_names")
    if names is None:
        return [f"w{i}" for i in range(n)]
    if len(names) != n:
        raise InputError("asset_names length does not match the model")
    return [str(x) for x in names]


def _allocate(doc: dict, args) -> dict:
    allowed = {"schema_version", "model", "risk_aversion", "solver", "constraints", "asset_names"}
    _check_fields(doc, allowed, "allocate input")
    res, model = _allocate_model(doc, args, "allocate input")
    out = res.to_dict()
    out["asset_names"] = _asset_names(doc, model.n_assets)
    return out


def _leverage_inputs(d: dict, args) -> kelly.LeverageInputs:
    _check_fields(d, {"mu_r", "sigma_r2", "r0", "sigma0_2", "alpha", "T", "lambda"}, "inputs")
    lam = args.lam if args.lam is not None else d.get("lambda", 0.0)
    T = args.horizon if args.horizon is not None else d.get("T", 1.0)
    return kelly.LeverageInputs(
        float(_require(d, "mu_r", "inputs")),
        float(_require(d, "sigma_r2", "inputs")),
        float(d.get("r0", 0.0)),
        float(d.get("sigma0_2", 0.0)),
        d.get("alpha"),
        float(T),
        float(lam),
    )


def _leverage(doc: dict, args) -> dict:
    _check_fields(doc, {"schema_version", "inputs", "gamma"}, "leverage input")
    inputs = _leverage_inputs(_require(doc, "inputs", "leverage input"), args)
    gamma = doc.get("gamma")
    if gamma is not None and gamma != 1:
        res = kelly.crra_leverage(float(gamma), inputs)
    elif inputs.alpha is not None:
        res = kelly.kelly_gmv_uncertain_variance(inputs)
    else:
        res = kelly.kelly_gmv(inputs)
    return res.to_dict()


def _bet(doc: dict, args) -> dict:
    _check_fields(doc, {"schema_version", "bet", "lambda"}, "bet input")
    b = _require(doc, "bet", "bet input")
    lam = float(args.lam if args.lam is not None else doc.get("lambda", 0.0))
    kind = b.get("kind", "binary") if isinstance(b, dict) else None
    if kind == "binary":
        _check_fields(b, {"kind", "p", "b", "a_loss"}, "bet")
        bet = kelly.BinaryBet(float(_require(b, "p", "bet")), float(_require(b, "b", "bet")),
                              float(_require(b, "a_loss", "bet")), lam)
        res = kelly.binary_gmv(bet)
    elif kind == "bayes":
        fields = {"kind", "y1", "n1", "prior_alpha", "prior_beta", "N", "b", "a_loss"}
        _check_fields(b, fields, "bet")
        vals = {k: _require(b, k, "bet") for k in fields - {"kind"}}
        bet = kelly.BayesBinaryBet(lam=lam, **vals)
        res = kelly.bayes_binary_optimal(bet)
    else:
        raise InputError(f"bet.kind must be 'binary' or 'bayes', got {kind!r}")
    return res.to_dict()


def _simulate(doc: dict, args) -> tuple[dict, np.ndarray]:
    allowed = {"schema_version", "process", "x0", "belief", "sigma2", "horizon", "sim"}
    _check_fields(doc, allowed, "simulate input")
    process = _require(doc, "process", "simulate input")
    belief = PosteriorBelief.from_dict(_require(doc, "belief", "simulate input"))
    horizon = dict(_require(doc, "horizon", "simulate input"))
    if args.horizon is not None:
        horizon["T"] = args.horizon
    horizon = HorizonSpec.from_dict(horizon)
    sim = _check_fields(_require(doc, "sim", "simulate input"), {"n_paths", "dt", "seed", "antithetic"}, "sim")
    seed = args.seed if args.seed is not None else sim.get("seed", 0)
    cfg = mc_oracle.SimConfig(int(_require(sim, "n_paths", "sim")), float(_require(sim, "dt", "sim")), int(seed),
                              bool(sim.get("antithetic", False)))
    sigma2 = float(_require(doc, "sigma2", "simulate input"))
    x0 = float(doc.get("x0", 0.0 if process == "abm" else 1.0))
    if process == "abm":
        stats = mc_oracle.simulate_abm(x0, belief, sigma2, horizon, cfg)
    elif process == "gbm":
        stats = mc_oracle.simulate_gbm(x0, belief, sigma2, horizon, cfg)
    else:
        raise InputError(f"process must be 'abm' or 'gbm', got {process!r}")
    out = stats.to_dict()
    out["seed"] = cfg.seed
    return out, stats.values


def _pipeline(doc: dict, args) -> dict:
    allowed = {"schema_version", "model", "risk_aversion", "lambda", "horizon", "alpha", "solver", "constraints", "asset_names"}
    _check_fields(doc, allowed, "pipeline input")
    alloc, model = _allocate_model(doc, args, "pipeline input")
    lam = float(args.lam if args.lam is not None else doc.get("lambda", 0.0))
    T = float(args.horizon if args.horizon is not None else doc.get("horizon", 1.0))
    alpha = doc.get("alpha")
    inputs = kelly.LeverageInputs.from_allocation(alloc, model.r0, T=T, lam=lam, alpha=alpha)
    lev = kelly.kelly_gmv_uncertain_variance(inputs) if alpha is not None else kelly.kelly_gmv(inputs)
    w_f = kelly.combine_allocation(alloc.w, lev.f_star)
    return {
        "asset_names": _asset_names(doc, model.n_assets),
        "w_star": alloc.w.tolist(),
        "mu_p": alloc.mu_p,
        "sigma0_p2": alloc.sigma0_p2,
        "sigma_p2": alloc.sigma_p2,
        "sharpe": alloc.sharpe,
        "f_star": lev.f_star,
        "w_f": w_f.tolist(),
        "cash_f": float(1.0 - w_f.sum()),
        "leverage": lev.to_dict(),
    }


# -- output --------------------------------------------------------------------------


def _finite_or_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite_or_none(obj.item())
    return obj


def _flatten(prefix: str, obj, out: dict):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out[prefix] = obj


def _csv_cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (int, float)):
        return format(float(v), ".17g") if isinstance(v, float) else str(v)
    return str(v)


def render(command: str, result: dict, fmt: str) -> str:
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": command, "result": _finite_or_none(result)}
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    if command == "allocate":
        res = result
        names = res["asset_names"]
        writer.writerow(names + ["mu_p", "sigma_p", "sharpe", "cash"])
        row = res["w"] + [res["mu_p"], math.sqrt(res["sigma_p2"]), res["sharpe"], res["cash"]]
        writer.writerow([_csv_cell(float(v)) for v in row])
        return buf.getvalue()
    flat: dict = {}
    _flatten("", _finite_or_none(result), flat)
    writer.writerow(list(flat))
    writer.writerow([_csv_cell(v) for v in flat.values()])
    return buf.getvalue()


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gmv-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _paths_csv(values: np.ndarray) -> str:
    lines = ["terminal_value"] + [format(float(v), ".17g") for v in values]
    return "\r\n".join(lines) + "\r\n"


def load_input(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read input file {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError("top-level JSON value must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return doc


HANDLERS = {
    "calibrate": _calibrate,
    "allocate": _allocate,
    "leverage": _leverage,
    "bet": _bet,
    "simulate": _simulate,
    "pipeline": _pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmv-alloc", description="Exponential-utility allocation and GMV leverage.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", required=True, help="input JSON file")
    parser.add_argument("--output", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--seed", type=int, help="override the simulation seed")
    parser.add_argument("--lambda", dest="lam", type=float, help="override the utility-variance aversion")
    parser.add_argument("--risk-aversion", type=float, help="override the CARA risk aversion a")
    parser.add_argument("--horizon", type=float, help="override the horizon T")
    parser.add_argument("--paths-output", help="simulate only: write per-path terminal values to this CSV")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.paths_output and args.command != "simulate":
            raise InputError("--paths-output applies to the simulate command only")
        doc = load_input(args.input)
        if args.command == "simulate":
            result, values = _simulate(doc, args)
        else:
            result, values = HANDLERS[args.command](doc, args), None
        text = render(args.command, result, args.format)
        if args.output:
            atomic_write(args.output, text)
        else:
            sys.stdout.write(text)
        if args.paths_output:
            atomic_write(args.paths_output, _paths_csv(values))
    except (NotConvergedError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, NumericalError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
