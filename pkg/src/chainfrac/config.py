"""Experiment configuration: JSON documents with a version field.

Lengths (ell, theta0, theta1) may be numbers or expressions in ``gamma``,
the minimizer of the effective potential, e.g. ``"2*gamma"``. Load
expressions may use ``gamma`` and ``ell`` as constants. Both are resolved
once the effective profile is known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .continuum import InfHOpts
from .discrete import MinimizeOpts
from .effective import SearchParams
from .errors import ChainFracError, ParseError, ValidationError
from .expressions import Expression, parse_number
from .potentials import LOAD_KINDS, load_from_dict, model_from_dict

CONFIG_VERSION = 1
_KEYS = {"version", "potential", "load", "ell", "theta0", "theta1", "n", "n_list", "solver",
         "effective", "continuum", "eps_list", "degenerate_measure", "output"}
_SOLVER = {"tol", "max_iter", "restarts", "seed", "gd_iters"}
_EFFECTIVE = {"scan_points", "tol", "grid_size", "margin", "z_max_factor"}
_CONTINUUM = {"resolutions", "tol", "max_iter", "quad_points"}


@dataclass
class ExperimentConfig:
    potential: dict
    load: dict
    ell: object
    theta0: object = "gamma"
    theta1: object = "gamma"
    n_list: list = field(default_factory=list)
    n: int | None = None
    solver: dict = field(default_factory=dict)
    effective: dict = field(default_factory=dict)
    continuum: dict = field(default_factory=dict)
    eps_list: list = field(default_factory=lambda: [0.05])
    degenerate_measure: float = 1e-3
    output: str | None = None
    version: int = CONFIG_VERSION

    def model(self):
        return model_from_dict(self.potential)

    def search_params(self):
        return SearchParams(**self.effective)

    def minimize_opts(self, **extra):
        return MinimizeOpts(**self.solver, **extra)

    def inf_h_opts(self):
        c = dict(self.continuum)
        if "resolutions" in c:
            c["resolutions"] = tuple(int(r) for r in c["resolutions"])
        return InfHOpts(**c)

    def lengths(self, gamma):
        """(ell, theta0, theta1) with ``gamma`` substituted; ValidationError if not positive."""
        errors, out = [], []
        for name in ("ell", "theta0", "theta1"):
            try:
                v = parse_number(getattr(self, name), {"gamma": gamma})
            except ChainFracError as exc:
                errors.append(f"{name}: {exc}")
                continue
            if not v > 0:
                errors.append(f"{name}: must be positive, got {v!r}")
            out.append(v)
        if errors:
            raise ValidationError(errors)
        return tuple(out)

    def build_load(self, gamma, ell):
        return load_from_dict(self.load, {"gamma": gamma, "ell": ell})

    def chain_n(self):
        if self.n is not None:
            return self.n
        if self.n_list:
            return self.n_list[0]
        raise ValidationError(["n: no chain size given (set 'n' or a non-empty 'n_list')"])

    def to_dict(self):
        return {"version": self.version, "potential": self.potential, "load": self.load,
                "ell": self.ell, "theta0": self.theta0, "theta1": self.theta1, "n": self.n,
                "n_list": self.n_list, "solver": self.solver, "effective": self.effective,
                "continuum": self.continuum, "eps_list": self.eps_list,
                "degenerate_measure": self.degenerate_measure, "output": self.output}


def _check_length(doc, name, errors):
    if name not in doc:
        return
    v = doc[name]
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        errors.append(f"{name}: expected a number or an expression in gamma, got {v!r}")
        return
    try:
        if isinstance(v, str):
            Expression(v, variables=(), constants={"gamma": 1.0})
        elif not v > 0:
            errors.append(f"{name}: must be positive, got {v!r}")
    except ChainFracError as exc:
        errors.append(f"{name}: {exc}")


def _check_section(doc, name, allowed, errors):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        errors.append(f"{name}: expected an object")
        return {}
    for k in sorted(set(sec) - allowed):
        errors.append(f"{name}.{k}: unknown option; allowed: {', '.join(sorted(allowed))}")
    return {k: v for k, v in sec.items() if k in allowed}


def validate(doc):
    """ExperimentConfig from a parsed document; ValidationError lists every problem."""
    errors = []
    if not isinstance(doc, dict):
        raise ValidationError(["<root>: expected a JSON object"])
    for k in sorted(set(doc) - _KEYS):
        errors.append(f"{k}: unknown field")
    if doc.get("version") != CONFIG_VERSION:
        errors.append(f"version: expected {CONFIG_VERSION}, got {doc.get('version')!r}")
    pot = doc.get("potential")
    if not isinstance(pot, dict):
        errors.append("potential: missing or not an object")
    else:
        try:
            model_from_dict(pot)
        except (ChainFracError, KeyError, TypeError, ValueError) as exc:
            errors.append(f"potential: {exc}")
    load = doc.get("load", {"kind": "zero"})
    if not isinstance(load, dict) or load.get("kind") not in LOAD_KINDS:
        kind = load.get("kind") if isinstance(load, dict) else load
        errors.append(f"load.kind: unknown load kind {kind!r}; supported kinds: {', '.join(LOAD_KINDS)}")
    else:
        try:
            load_from_dict(load, {"gamma": 1.0, "ell": 1.0})
        except (ChainFracError, KeyError) as exc:
            errors.append(f"load: {exc}")
    if "ell" not in doc:
        errors.append("ell: required")
    for name in ("ell", "theta0", "theta1"):
        _check_length(doc, name, errors)
    n_list = doc.get("n_list", [])
    if not isinstance(n_list, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in n_list):
        errors.append("n_list: expected a list of integers")
        n_list = []
    for i, n in enumerate(n_list):
        if n < 4:
            errors.append(f"n_list[{i}]: chain size must be >= 4, got {n}")
    n = doc.get("n")
    if n is not None and (not isinstance(n, int) or isinstance(n, bool) or n < 4):
        errors.append(f"n: chain size must be an integer >= 4, got {n!r}")
    eps = doc.get("eps_list", [0.05])
    if not isinstance(eps, list) or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
        errors.append("eps_list: expected a list of positive numbers")
    dm = doc.get("degenerate_measure", 1e-3)
    if not isinstance(dm, (int, float)) or not 0 < dm <= 1:
        errors.append(f"degenerate_measure: expected a number in (0, 1], got {dm!r}")
    solver = _check_section(doc, "solver", _SOLVER, errors)
    eff = _check_section(doc, "effective", _EFFECTIVE, errors)
    cont = _check_section(doc, "continuum", _CONTINUUM, errors)
    if errors:
        raise ValidationError(errors)
    return ExperimentConfig(
        potential=pot, load=load, ell=doc["ell"], theta0=doc.get("theta0", "gamma"),
        theta1=doc.get("theta1", "gamma"), n_list=list(n_list), n=n, solver=solver, effective=eff,
        continuum=cont, eps_list=[float(e) for e in eps], degenerate_measure=float(dm),
        output=doc.get("output"), version=doc["version"],
    )


def parse_config(path):
    """Read and validate a JSON config; ParseError carries the line of a syntax error."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError([f"{path}: {exc.strerror}"]) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return validate(doc)
