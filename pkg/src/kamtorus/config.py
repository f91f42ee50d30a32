"""Problem files: a YAML (or JSON) key tree describing H, K0 and the run settings.

Example::

    alpha: [0.6180339887498949]
    perturbation:
      - {k: [1], m: [0], re: 0.0005}
    strips: {s: 0.1, sigma: 0.2}

Series are lists of records ``{k, m, re, im}``; a record whose partner -k is
missing is completed by complex conjugation.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import series as fs
from .cohomology import Frequency
from .group import GroupElement, pullback
from .normalform import KolmogorovForm
from .scheme import CertificateConstants, ScheduleParams


class ConfigError(ValueError):
    """Malformed or incomplete problem file."""


DEFAULTS = {
    "tau": None,
    "divisor_convention": "rotation",
    "seed": 0,
    "K0": {"c": 0.0, "Q": None, "tail": []},
    "perturbation": [],
    "full_H": False,
    "conjugate_by": None,
    "truncation": {"kmax": None, "mmax": 4, "oversample": 2},
    "strips": {"s": 0.1, "sigma": 0.2},
    "scheme": {"defect_tol": 1e-13, "max_iters": 12, "gamma2": 1e-2, "tau2": None,
               "alias_tol": 1e-8},
    "verify": {"T": 100.0, "dt": 1e-3, "grid_N": 256, "npoints": 20, "r_escape": 0.1,
               "max_torus_distance": 1e-6, "rotation_error": 1e-5, "invariance": 1e-8},
    "certificate": None,
}

CERTIFICATE_KEYS = {"C": "C", "gamma": "gamma_cert", "tau": "tau_cert", "c": "c_cert", "t": "t_cert"}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if isinstance(out.get(key), dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


@dataclass
class ProblemConfig:
    """Fully defaulted problem description; ``raw`` is the echo written to reports."""

    n: int
    alpha: np.ndarray
    tau: float
    raw: dict = field(repr=False)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("problem file must be a mapping")
        if "alpha" not in data:
            raise ConfigError("missing field 'alpha'")
        cfg = _merge(DEFAULTS, data)
        try:
            alpha = np.atleast_1d(np.asarray(cfg["alpha"], float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"alpha: {exc}") from None
        n = int(cfg.get("n") or len(alpha))
        if alpha.ndim != 1 or len(alpha) != n:
            raise ConfigError(f"alpha must have n = {n} entries")
        cfg["n"] = n
        cfg["alpha"] = [float(a) for a in alpha]
        if cfg["tau"] is None:
            cfg["tau"] = float(n)
        tr = cfg["truncation"]
        if tr["kmax"] is None:
            tr["kmax"] = 64 if n == 1 else 32
        if int(tr["oversample"]) < 2:
            raise ConfigError("truncation.oversample must be >= 2")
        if cfg["scheme"]["tau2"] is None:
            cfg["scheme"]["tau2"] = float(cfg["tau"]) + 2.0
        if cfg["K0"]["Q"] is None:
            cfg["K0"]["Q"] = [[1.0 if i == j else 0.0 for j in range(i, n)] for i in range(n)]
        return cls(n=n, alpha=alpha, tau=float(cfg["tau"]), raw=cfg)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        return cls.from_dict(data)

    # -- accessors -------------------------------------------------------
    @property
    def kmax(self):
        return int(self.raw["truncation"]["kmax"])

    @property
    def mmax(self):
        return int(self.raw["truncation"]["mmax"])

    @property
    def oversample(self):
        return int(self.raw["truncation"]["oversample"])

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def convention(self):
        return self.raw["divisor_convention"]

    def series(self, records, mmax=None):
        try:
            return fs.from_literal(records or [], self.n, self.kmax, self.mmax if mmax is None else mmax)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad series literal: {exc}") from None

    def frequency(self):
        return Frequency(self.alpha, tau=self.tau)

    def K0(self):
        n = self.n
        k0 = self.raw["K0"]
        rows = k0["Q"]
        Q = [[None] * n for _ in range(n)]
        try:
            for i in range(n):
                for off, entry in enumerate(rows[i]):
                    j = i + off
                    q = fs.constant(n, float(entry), self.kmax) if np.isscalar(entry) \
                        else self.series(entry, mmax=0)
                    Q[i][j] = Q[j][i] = q
        except (IndexError, TypeError) as exc:
            raise ConfigError(f"K0.Q must be the upper triangle of an n x n matrix: {exc}") from None
        if any(q is None for row in Q for q in row):
            raise ConfigError("K0.Q is incomplete")
        return KolmogorovForm(float(k0["c"]), self.frequency(), Q, self.series(k0["tail"]),
                              kmax=self.kmax, mmax=self.mmax)

    def hamiltonian(self, K0=None):
        """H = K0 + perturbation (or the perturbation itself when ``full_H``), optionally pulled back."""
        pert = self.series(self.raw["perturbation"])
        H = pert if self.raw["full_H"] else (K0 or self.K0()).assemble() + pert
        conj = self.raw["conjugate_by"]
        if conj:
            H = pullback(H, GroupElement.from_record(conj, self.kmax), oversample=self.oversample,
                         alias_tol=None)
        return H

    def schedule(self):
        st, sc = self.raw["strips"], self.raw["scheme"]
        return ScheduleParams(s=float(st["s"]), sigma=float(st["sigma"]),
                              max_iters=int(sc["max_iters"]), defect_tol=float(sc["defect_tol"]))

    def certificate(self):
        """(constants, sigma, y_norm) or None if the file has no certificate block."""
        block = self.raw["certificate"]
        if not block:
            return None
        kw = {CERTIFICATE_KEYS[k]: float(v) for k, v in block.items() if k in CERTIFICATE_KEYS}
        consts = CertificateConstants(**kw)
        st = self.raw["strips"]
        sigma = float(block.get("sigma", st["sigma"]))
        if "y" in block:
            y = float(block["y"])
        else:
            y = fs.majorant_norm(self.hamiltonian() - self.K0().assemble(), float(st["s"]) + sigma)
        return consts, sigma, y


__all__ = ["ConfigError", "DEFAULTS", "ProblemConfig"]
