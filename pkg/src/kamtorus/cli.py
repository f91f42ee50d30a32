"""Command line front end: ``kamtorus {check-alpha,run,certificate,verify} --config FILE``.

Exit codes: 0 ok, 2 resonance, 3 divergence or failed verification,
4 precondition failure, 5 certificate failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings

import numpy as np

from . import series as fs
from .cohomology import check_diophantine, small_divisor_spectrum
from .config import ConfigError, ProblemConfig
from .exceptions import (
    AliasingError, DivergenceError, KAMError, PreconditionError, ResonanceError, SmallDivisorError,
)
from .group import GroupElement, pullback
from .scheme import abstract_fp_simulate, convergence_certificate, kam_run
from .verify import (
    TorusEscapeError, flow_check, invariance_residual, pointwise_conjugacy_residual, torus_embedding,
)

EXIT_OK = 0
EXIT_RESONANCE = 2
EXIT_DIVERGENCE = 3
EXIT_PRECONDITION = 4
EXIT_CERTIFICATE = 5
EXIT_USAGE = 64

log = logging.getLogger("kamtorus")


# ---------------------------------------------------------------------------
# deterministic JSON


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return "%.17g" % obj if math.isfinite(obj) else "null"
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if not any(isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with every float written with 17 significant digits."""
    return _encode(_plain(obj), indent, 0) + "\n"


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_check_alpha(cfg, args):
    kmax = cfg.kmax
    try:
        rep = check_diophantine(cfg.alpha, cfg.tau, kmax, cfg.convention)
        margin, argmin = rep.min_margin, rep.argmin_k
    except ResonanceError as exc:
        margin, argmin = 0.0, exc.k
    spectrum = small_divisor_spectrum(cfg.alpha, kmax, cfg.convention)
    n = cfg.n
    lines = [f"# min_margin={margin:.17g} argmin_k={list(argmin)} tau={cfg.tau:.17g} kmax={kmax} "
             f"convention={cfg.convention}",
             ",".join([f"k_{j + 1}" for j in range(n)] + ["divisor", "amplification"])]
    for k, d, amp in spectrum:
        lines.append(",".join([str(x) for x in k] + ["%.17g" % d, "inf" if math.isinf(amp) else "%.17g" % amp]))
    _emit("\n".join(lines) + "\n", args.out)
    log.info("min margin %.6g at k=%s", margin, argmin)
    return EXIT_OK if margin > 0 else EXIT_RESONANCE


def _verification(cfg, H, gamma, K=None, seed=0, torus_path=None):
    v = cfg.raw["verify"]
    emb = torus_embedding(gamma, int(v["grid_N"]) if cfg.n == 1 else min(int(v["grid_N"]), 64))
    if torus_path:
        emb.to_csv(torus_path)
    out = {"invariance_residual": invariance_residual(H, emb, cfg.alpha)}
    try:
        fc = flow_check(H, emb, cfg.alpha, T=float(v["T"]), dt=float(v["dt"]),
                        npoints=int(v["npoints"]), seed=seed, r_escape=float(v["r_escape"]))
        out["flow_check"] = fc.to_dict()
    except TorusEscapeError as exc:
        out["flow_check"] = {"escaped": True, "time": exc.time, "message": str(exc)}
    if K is not None:
        out["pointwise_conjugacy_residual"] = pointwise_conjugacy_residual(
            H, K, gamma, N=256 if cfg.n == 1 else 32)
    fcd = out["flow_check"]
    out["passed"] = bool(
        out["invariance_residual"] <= float(v["invariance"])
        and not fcd.get("escaped", False)
        and fcd["max_torus_distance"] <= float(v["max_torus_distance"])
        and fcd["rotation_error"] <= float(v["rotation_error"]))
    return out


def _maps_record(cfg, K, gamma, G):
    return {"kmax": cfg.kmax, "mmax": cfg.mmax, "gamma": gamma.to_record(), "G": G.to_record(),
            "K": fs.to_literal(K.assemble())}


def _classify(exc):
    if isinstance(exc, (ResonanceError, SmallDivisorError)):
        return EXIT_RESONANCE, "resonance"
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE, "diverged"
    if isinstance(exc, (PreconditionError, AliasingError)):
        return EXIT_PRECONDITION, "precondition_failed"
    return EXIT_DIVERGENCE, "failed"


def cmd_run(cfg, args):
    seed = cfg.seed if args.seed is None else args.seed
    sc = cfg.raw["scheme"]
    report = {"config_echo": cfg.raw, "seed": seed, "steps": [], "outcome": "pending",
              "fitted_exponent": None, "conjugacy_residual": None, "invariance_residual": None,
              "flow_check": None, "truncation_debt": 0.0}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            K0 = cfg.K0()
            H = cfg.hamiltonian(K0)
            K, gamma, G, rep = kam_run(
                H, K0, cfg.schedule(), gamma2=float(sc["gamma2"]), tau2=float(sc["tau2"]),
                oversample=cfg.oversample, alias_tol=sc["alias_tol"],
                progress=lambda r: log.info("step %d: defect %.3e", r.j, r.defect_norm))
    except KAMError as exc:
        code, outcome = _classify(exc)
        report.update(outcome=outcome, error=str(exc))
        if isinstance(exc, (PreconditionError, AliasingError)):
            report["failed_precondition"] = getattr(exc, "name", "aliasing")
        partial = getattr(exc, "report", None)
        if partial is not None:
            report["steps"] = partial.to_dict()["steps"]
            report["defects"] = partial.defects
        log.error("%s", exc)
        _emit(dumps(report), args.out)
        return code
    d = rep.to_dict()
    report.update(steps=d["steps"], defects=d["defects"], outcome=rep.outcome,
                  fitted_exponent=rep.fitted_exponent, exponent_ratios=rep.exponent_ratios,
                  conjugacy_residual=rep.conjugacy_residual, truncation_debt=rep.truncation_debt,
                  fitted_constants={"c": rep.fitted_c, "t": rep.fitted_t}, warnings=rep.warnings)
    ver = _verification(cfg, H, gamma, K.assemble(), seed, args.torus)
    report.update(invariance_residual=ver["invariance_residual"], flow_check=ver["flow_check"],
                  pointwise_conjugacy_residual=ver.get("pointwise_conjugacy_residual"),
                  verification_passed=ver["passed"])
    if args.maps:
        _emit(dumps(_maps_record(cfg, K, gamma, G)), args.maps)
    _emit(dumps(report), args.out)
    if rep.outcome != "converged" or not ver["passed"]:
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_certificate(cfg, args):
    got = cfg.certificate()
    if got is None:
        raise ConfigError("no 'certificate' block in the problem file")
    consts, sigma, y = got
    max_iters = int(cfg.raw["scheme"]["max_iters"])
    cert = convergence_certificate(consts, sigma, y, max_iters)
    sim = []
    if cert.ok:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sim = abstract_fp_simulate(consts, sigma, y, max_iters)
    out = {"ok": cert.ok, "q": cert.q, "sigma": sigma, "y_norm": y, "reason": cert.reason,
           "predicted": cert.predicted, "simulation": [{"x_drift": x, "y": yy} for x, yy in sim],
           "x_drift_within_C": bool(not sim or sim[-1][0] <= consts.C)}
    _emit(dumps(out), args.out)
    return EXIT_OK if cert.ok else EXIT_CERTIFICATE


def cmd_verify(cfg, args):
    if not args.maps:
        raise ConfigError("verify needs --maps with a serialized gamma")
    try:
        with open(args.maps) as fh:
            rec = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read maps file: {exc}") from None
    seed = cfg.seed if args.seed is None else args.seed
    gamma = GroupElement.from_record(rec["gamma"], int(rec.get("kmax", cfg.kmax)))
    H = cfg.hamiltonian()
    K = None
    if "K" in rec:
        K = fs.from_literal(rec["K"], cfg.n, int(rec.get("kmax", cfg.kmax)), int(rec.get("mmax", cfg.mmax)))
    ver = _verification(cfg, H, gamma, K, seed, args.torus)
    if K is not None:
        res = pullback(H, gamma, oversample=cfg.oversample, alias_tol=None) - K
        ver["conjugacy_residual"] = fs.majorant_norm(res, float(cfg.raw["strips"]["s"]))
    ver["seed"] = seed
    _emit(dumps(ver), args.out)
    return EXIT_OK if ver["passed"] else EXIT_DIVERGENCE


COMMANDS = {"check-alpha": cmd_check_alpha, "run": cmd_run, "certificate": cmd_certificate,
            "verify": cmd_verify}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="kamtorus", description="Newton iteration for Kolmogorov invariant tori.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in [("check-alpha", "scan small divisors of alpha"),
                           ("run", "run the Newton iteration and verify the torus"),
                           ("certificate", "evaluate the a-priori convergence certificate"),
                           ("verify", "re-verify a serialized conjugacy")]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="PATH", help="report destination (default stdout)")
        sp.add_argument("--torus", metavar="PATH", help="write the torus embedding as CSV")
        sp.add_argument("--maps", metavar="PATH", help="gamma/G serialization (written by run, read by verify)")
        sp.add_argument("--seed", type=int, default=None, help="verification sampling seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    threads = os.environ.get("KAM_THREADS")
    if threads:
        try:
            fs.set_threads(int(threads))
        except ValueError:
            sys.stderr.write("kamtorus: KAM_THREADS must be an integer\n")
            return EXIT_USAGE
    try:
        cfg = ProblemConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(f"kamtorus: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
