"""Command-line front end.

Every command accepts ``--config file.json`` whose keys are option names
(dashes or underscores); explicit flags override the file, which overrides
the built-in defaults.  The effective configuration is echoed into each
output's metadata.  Exit codes: 0 success, 1 computation failure, 2 invalid
parameters.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import bell, npa, qsim, sos, swap
from .bell import BellFamily, InfeasibleParameters
from .ncpoly import NcPolynomial

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class UsageError(ValueError):
    pass


def fmt(x) -> object:
    """12 significant digits, kept as a JSON number."""
    if x is None:
        return None
    return float(f"{float(x):.12g}")


def _num(text, exact: bool = False):
    if isinstance(text, (int, float, Fraction)):
        return Fraction(text) if exact else float(text)
    text = str(text).strip()
    if exact:
        return Fraction(text)
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _grid(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    return [float(v) for v in text.split(",")] if text else []


# defaults per command; None means "required unless another option supplies it"
DEFAULTS: Dict[str, Dict[str, object]] = {
    "bounds": {"alpha": None, "beta": 0.0},
    "sos-verify": {"alpha": None, "beta": "0", "variant": "both", "mode": "exact", "grid": 0, "seed": 0,
                   "certificate": None},
    "simulate": {"theta": None, "mu": None, "case": None},
    "robustness": {"case": None, "alpha": None, "beta": None, "theta": None, "mu": None,
                   "grid": None, "points": 11, "inequality": False},
    "randomness": {"case": None, "alpha": None, "beta": None, "theta": None, "mu": None,
                   "grid": None, "points": 11, "inequality": False, "input_pair": "0,0"},
    "bound-curve": {"mu": None, "tan_mu": None, "beta_min": 0.0, "beta_max": 1.2, "points": 25,
                    "all_rows": False},
    "app-params": {"theta": None, "protocol": "QKD"},
}
GLOBAL_DEFAULTS = {"out": None, "tol": 1e-8, "threads": 1}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--tol", type=float, help="solver / verification tolerance")
    common.add_argument("--threads", type=int, help="parallel workers for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tiltedchsh", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("bounds", parents=[common], help="classical/quantum bounds and self-tested angles")
    s.add_argument("--alpha")
    s.add_argument("--beta")

    s = sub.add_parser("sos-verify", parents=[common], help="check the SOS certificates")
    s.add_argument("--alpha")
    s.add_argument("--beta")
    s.add_argument("--variant", choices=["SOS1", "SOS2", "both"])
    s.add_argument("--mode", choices=["exact", "float"])
    s.add_argument("--grid", type=int, help="float mode: number of random feasible points")
    s.add_argument("--seed", type=int)
    s.add_argument("--certificate", help="verify a certificate JSON file instead")

    s = sub.add_parser("simulate", parents=[common], help="ideal realization: behavior, Bell value, fidelity")
    s.add_argument("--theta")
    s.add_argument("--mu")
    s.add_argument("--case")

    for name in ("robustness", "randomness"):
        s = sub.add_parser(name, parents=[common], help=f"{name} curve over normalized violations")
        s.add_argument("--case", help="chsh, biased, tilted, generalized or standard-tilted")
        for opt in ("alpha", "beta", "theta", "mu"):
            s.add_argument(f"--{opt}")
        s.add_argument("--grid", help="comma separated normalized violations V")
        s.add_argument("--points", type=int, help="evenly spaced V in [0, 1]")
        s.add_argument("--inequality", action="store_true", default=None,
                       help="constrain the Bell value from below instead of fixing it")
        if name == "randomness":
            s.add_argument("--input-pair", dest="input_pair")

    s = sub.add_parser("bound-curve", parents=[common], help="alpha(beta) at fixed mu with both bounds")
    s.add_argument("--mu")
    s.add_argument("--tan-mu", dest="tan_mu")
    s.add_argument("--beta-min", dest="beta_min")
    s.add_argument("--beta-max", dest="beta_max")
    s.add_argument("--points", type=int)
    s.add_argument("--all-rows", dest="all_rows", action="store_true", default=None,
                   help="keep rows with alpha < 1")

    s = sub.add_parser("app-params", parents=[common], help="operator parameters for QKD or QPQ")
    s.add_argument("--theta")
    s.add_argument("--protocol", choices=["QKD", "QPQ", "qkd", "qpq"])
    return p


def resolve(args: argparse.Namespace) -> Dict[str, object]:
    """Merge flags > config file > defaults."""
    cfg_file = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg_file = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
    out = {}
    defaults = {**GLOBAL_DEFAULTS, **{k.replace("-", "_"): v for k, v in DEFAULTS[args.command].items()}}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg_file.get(key, default)
    return out


# commands ------------------------------------------------------------------

def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def cmd_bounds(cfg) -> dict:
    _require(cfg, "alpha")
    fam = BellFamily(_num(cfg["alpha"]), _num(cfg["beta"]))
    try:
        theta, mu = fam.theta, fam.mu
    except bell.ProductStateBoundary:
        theta = mu = None
    return {
        "alpha": fmt(fam.alpha),
        "beta": fmt(fam.beta),
        "classical": fmt(fam.classical_bound),
        "quantum": fmt(fam.quantum_bound),
        "theta": fmt(theta),
        "mu": fmt(mu),
    }


def _certificate_from_json(data: dict) -> sos.SosCertificate:
    fam = BellFamily(Fraction(data["alpha"]), Fraction(data["beta"]))
    terms = tuple((Fraction(t["scale"]), NcPolynomial.from_text(t["poly"])) for t in data["terms"])
    return sos.SosCertificate(NcPolynomial.from_text(data["shift"]), terms, data["variant"], fam)


def _sos_report(cert: sos.SosCertificate, tol: float) -> dict:
    res = sos.verify_certificate(cert)
    worst = 0.0 if res.is_zero() else res.max_abs_coefficient()
    exact = res.is_zero()
    return {
        "variant": str(getattr(cert.variant, "value", cert.variant)),
        "alpha": str(cert.family.alpha),
        "beta": str(cert.family.beta),
        "exact_zero": exact,
        "residual_max_coefficient": fmt(worst),
        "passed": exact or worst <= tol,
        "residual": None if exact else res.to_text(),
    }


def cmd_sos_verify(cfg) -> dict:
    tol = min(float(cfg["tol"]), sos.NUMERIC_TOL)
    if cfg["certificate"]:
        with open(cfg["certificate"]) as fh:
            cert = _certificate_from_json(json.load(fh))
        # an externally supplied certificate must verify exactly
        rep = _sos_report(cert, 0.0)
        return {"reports": [rep], "passed": rep["passed"]}
    variants = ["SOS1", "SOS2"] if cfg["variant"] == "both" else [cfg["variant"]]
    exact = cfg["mode"] == "exact"
    points = []
    if int(cfg["grid"] or 0) > 0:
        if exact:
            raise UsageError("--grid requires --mode float")
        rng = np.random.default_rng(int(cfg["seed"]))
        for _ in range(int(cfg["grid"])):
            a = rng.uniform(1, 3)
            points.append(BellFamily(a, rng.uniform(0, 2 / a)))
    else:
        _require(cfg, "alpha")
        fam = BellFamily(_num(cfg["alpha"], exact), _num(cfg["beta"], exact))
        if exact and not isinstance(fam.quantum_bound, Fraction):
            raise UsageError("exact mode needs rational alpha, beta with a rational quantum bound")
        points.append(fam)
    reports = [_sos_report(sos.build_certificate(f, v), 0.0 if exact else tol) for f in points for v in variants]
    return {"mode": cfg["mode"], "reports": reports, "passed": all(r["passed"] for r in reports)}


CASES: Dict[str, Callable[[], bell.Case]] = {
    "chsh": bell.chsh_case,
    "biased": lambda: bell.paper_cases()[0],
    "tilted": lambda: bell.paper_cases()[1],
    "generalized": lambda: bell.paper_cases()[2],
    "standard-tilted": lambda: bell.standard_tilted_case(math.pi / 6),
}


def _case(cfg) -> bell.Case:
    if cfg.get("case"):
        name = str(cfg["case"]).lower()
        if name not in CASES:
            raise UsageError(f"unknown case {name!r}; choose from {', '.join(CASES)}")
        return CASES[name]()
    _require(cfg, "alpha", "beta", "theta", "mu")
    fam = BellFamily(_num(cfg["alpha"]), _num(cfg["beta"]))
    return bell.Case("custom", fam, _num(cfg["theta"]), _num(cfg["mu"]))


def cmd_simulate(cfg) -> dict:
    if cfg.get("case"):
        case = _case(cfg)
        theta, mu, fam = case.theta, case.mu, case.family
    else:
        _require(cfg, "theta", "mu")
        theta, mu = _num(cfg["theta"]), _num(cfg["mu"])
        fam = bell.params_from_state(theta, mu)
    r = qsim.ideal_realization(theta, mu)
    beh = qsim.behavior_of(r).check()
    rep = qsim.verify_selftest_relations(r, fam)
    return {
        "theta": fmt(theta),
        "mu": fmt(mu),
        "alpha": fmt(fam.alpha),
        "beta": fmt(fam.beta),
        "behavior": {k: [[fmt(v) for v in row] for row in t] for k, t in json.loads(beh.to_json())["p"].items()},
        "bell_value": fmt(qsim.bell_value(r, fam)),
        "quantum_bound": fmt(fam.quantum_bound),
        "classical_bound": fmt(fam.classical_bound),
        "swap_fidelity": fmt(swap.swap_fidelity(r, theta, mu)),
        "z_residual": fmt(rep.z_residual),
        "x_residual": fmt(rep.x_residual),
    }


def _v_grid(cfg) -> List[float]:
    vs = _grid(cfg["grid"]) if cfg.get("grid") is not None else list(np.linspace(0, 1, int(cfg["points"])))
    for v in vs:
        if not -1e-12 <= v <= 1 + 1e-12:
            raise UsageError(f"normalized violation {v} outside [0, 1]")
    return vs


def _sweep(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{float(v):.12g}" for v in row])
    return buf.getvalue()


def cmd_robustness(cfg):
    case = _case(cfg)
    fam = case.family
    vs = _v_grid(cfg)

    def point(v):
        obs = fam.violation_from_normalized(v)
        return obs, v, npa.robustness_bound(fam, case.theta, case.mu, obs, bool(cfg["inequality"]), float(cfg["tol"]))

    rows = _sweep(point, vs, int(cfg["threads"]))
    _, basis, _ = npa._fidelity_setup(float(case.theta), float(case.mu), float(fam.alpha), float(fam.beta))
    meta = {"case": case.name, "basis": basis.labels(), "basis_size": len(basis)}
    return _csv(["violation", "V", "fidelity_bound"], rows), meta


def cmd_randomness(cfg):
    case = _case(cfg)
    fam = case.family
    vs = _v_grid(cfg)
    pair = tuple(int(v) for v in str(cfg["input_pair"]).split(","))
    if len(pair) != 2 or any(v not in (0, 1) for v in pair):
        raise UsageError("--input-pair must be x,y with x, y in {0, 1}")

    def point(v):
        obs = fam.violation_from_normalized(v)
        res = npa.randomness_bound(fam, obs, pair, inequality=bool(cfg["inequality"]), tol=float(cfg["tol"]))
        return obs, v, res.guess_probability, res.min_entropy

    rows = _sweep(point, vs, int(cfg["threads"]))
    basis = npa.build_basis()
    meta = {"case": case.name, "input_pair": list(pair), "basis": basis.labels(), "basis_size": len(basis)}
    return _csv(["violation", "V", "guess_prob", "entropy_bits"], rows), meta


def cmd_bound_curve(cfg):
    if cfg.get("mu") is None and cfg.get("tan_mu") is None:
        raise UsageError("give --mu or --tan-mu")
    mu = _num(cfg["mu"]) if cfg.get("mu") is not None else math.atan(_num(cfg["tan_mu"]))
    if not 0 < mu <= math.pi / 4 + 1e-15:
        raise InfeasibleParameters(f"mu must lie in (0, pi/4] (got {mu})")
    n = int(cfg["points"])
    grid = list(np.linspace(_num(cfg["beta_min"]), _num(cfg["beta_max"]), n)) if n > 0 else []
    rows = bell.bound_curve(mu, grid)
    return bell.bound_curve_csv(rows, feasible_only=not cfg["all_rows"]), {"mu": fmt(mu), "points": n}


def cmd_app_params(cfg) -> dict:
    _require(cfg, "theta")
    fam = bell.application_params(_num(cfg["theta"]), str(cfg["protocol"]))
    return {
        "protocol": str(cfg["protocol"]).upper(),
        "theta": fmt(_num(cfg["theta"])),
        "alpha": fmt(fam.alpha),
        "beta": fmt(fam.beta),
        "classical": fmt(fam.classical_bound),
        "quantum": fmt(fam.quantum_bound),
    }


COMMANDS = {
    "bounds": cmd_bounds,
    "sos-verify": cmd_sos_verify,
    "simulate": cmd_simulate,
    "robustness": cmd_robustness,
    "randomness": cmd_randomness,
    "bound-curve": cmd_bound_curve,
    "app-params": cmd_app_params,
}


def _write(text: str, path) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        result = COMMANDS[args.command](cfg)
    except (UsageError, InfeasibleParameters, npa.SuperQuantumValue, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (npa.SolverFailure, np.linalg.LinAlgError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL

    config = {k: v for k, v in cfg.items() if k != "out"}
    if isinstance(result, tuple):
        text, meta = result
        meta = {"command": args.command, "config": config, "tol": cfg["tol"], **meta}
        _write(text, cfg["out"])
        meta_text = json.dumps(meta, indent=2, sort_keys=True) + "\n"
        if cfg["out"]:
            _write(meta_text, str(cfg["out"]) + ".meta.json")
        return EXIT_OK
    result = {"command": args.command, "config": config, **result}
    _write(json.dumps(result, indent=2, sort_keys=True) + "\n", cfg["out"])
    if args.command == "sos-verify" and not result["passed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
