"""Experiment configuration files (YAML).

Operator fields sit at the top level, either as a builtin ``model`` name or
as explicit records::

    d: 1
    q: [2]
    hoppings:
      - {site: [0], axis: 1, re: 1.0, im: 0.0}
    potential:
      - {site: [1], value: 0.5}
    task:
      kind: bands
      N: [8]
    seed: 0

Axes in files are 1-based.  Omitted hoppings default to 1, omitted
potentials to 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml

from .lattice import PeriodicJacobiOperator
from .models import model_from_name

TASK_KINDS = ("bands", "evolve", "velocity", "verify")
SUITES = ("operator", "floquet", "bands", "dynamics", "velocity")


@dataclass(frozen=True)
class SchemaError:
    field: str
    reason: str
    line: int | None = None

    def __str__(self):
        where = f" (line {self.line})" if self.line else ""
        return f"{self.field}: {self.reason}{where}"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class OperatorSpec:
    d: int
    q: tuple
    hoppings: tuple  # ((site, axis), re, im) with 1-based axis
    potential: tuple  # (site, value)
    model: str | None = None

    def build(self) -> PeriodicJacobiOperator:
        if self.model is not None:
            return model_from_name(self.model)
        hop = {(site, axis - 1): complex(re, im) for (site, axis), re, im in self.hoppings}
        pot = {site: value for site, value in self.potential}
        return PeriodicJacobiOperator.from_records(self.q, hop, pot)

    @classmethod
    def from_operator(cls, op, model=None):
        hop = tuple(
            ((site, j + 1), float(op.hoppings[site + (j,)].real), float(op.hoppings[site + (j,)].imag))
            for site in op.cell_sites()
            for j in range(op.d)
        )
        pot = tuple((site, float(op.potential[site])) for site in op.cell_sites())
        return cls(op.d, tuple(op.q), hop, pot, model)


@dataclass(frozen=True)
class StateSpec:
    kind: str = "delta"
    site: tuple | None = None
    radius: int | None = None


@dataclass(frozen=True)
class BandsTask:
    N: tuple
    kind: str = "bands"


@dataclass(frozen=True)
class EvolveTask:
    geometry: str
    size: tuple
    state: StateSpec
    times: tuple
    h: float = 0.05
    kind: str = "evolve"


@dataclass(frozen=True)
class VelocityTask:
    N: tuple
    state: StateSpec
    times: tuple
    axes: tuple = (1,)
    L: tuple | None = None
    kind: str = "velocity"


@dataclass(frozen=True)
class VerifyTask:
    suites: tuple = SUITES
    seeds: tuple = (0, 1, 2)
    tolerances: tuple = ()
    kind: str = "verify"


@dataclass(frozen=True)
class ExperimentConfig:
    operator: OperatorSpec | None
    task: BandsTask | EvolveTask | VelocityTask | VerifyTask
    seed: int = 0
    output: str = "out"
    threads: int = 1
    warnings: tuple = field(default=(), compare=False)


# --------------------------------------------------------------------------
# parsing


class _Reader:
    """Collects schema errors with source line numbers."""

    def __init__(self, lines):
        self.lines = lines
        self.errors = []
        self.warnings = []

    def error(self, path, reason):
        self.errors.append(SchemaError(path, reason, self.lines.get(path)))

    def unknown(self, mapping, allowed, path):
        for key in mapping:
            if key not in allowed:
                where = f"{path}.{key}" if path else str(key)
                line = self.lines.get(where)
                self.warnings.append(f"unknown field {where!r}" + (f" (line {line})" if line else ""))

    def int_vector(self, value, path, length=None, minimum=1):
        if isinstance(value, int) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            self.error(path, "expected a list of integers")
            return None
        if length is not None and len(value) != length:
            self.error(path, f"expected {length} entries, got {len(value)}")
            return None
        if minimum is not None and any(v < minimum for v in value):
            self.error(path, f"entries must be >= {minimum}")
            return None
        return tuple(value)

    def number(self, value, path, positive=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(path, "expected a number")
            return None
        if positive and not value > 0:
            self.error(path, "must be positive")
            return None
        return float(value)


def _line_map(node, path="", out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            sub = f"{path}.{key.value}" if path else str(key.value)
            out[sub] = key.start_mark.line + 1
            _line_map(value, sub, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            sub = f"{path}[{i}]"
            out[sub] = item.start_mark.line + 1
            _line_map(item, sub, out)
    return out


def _parse_operator(doc, rd):
    if "model" in doc:
        if not isinstance(doc["model"], str):
            rd.error("model", "expected a model name such as 'ssh(1,2)'")
            return None
        try:
            op = model_from_name(doc["model"])
        except ValueError as exc:
            rd.error("model", str(exc))
            return None
        for key in ("d", "q", "hoppings", "potential"):
            if key in doc:
                rd.error(key, "not allowed together with 'model'")
        return OperatorSpec.from_operator(op, doc["model"])

    if "d" not in doc or "q" not in doc:
        if "d" not in doc:
            rd.error("d", "missing")
        if "q" not in doc:
            rd.error("q", "missing")
        return None
    d = doc["d"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        rd.error("d", "expected a positive integer")
        return None
    q = rd.int_vector(doc["q"], "q", length=d)
    if q is None:
        return None

    def site_of(rec, path):
        site = rd.int_vector(rec.get("site"), f"{path}.site", length=d, minimum=0)
        if site is not None and any(s >= n for s, n in zip(site, q)):
            rd.error(f"{path}.site", f"site {list(site)} lies outside the period cell {list(q)}")
            return None
        return site

    hop = {(site, j + 1): (1.0, 0.0) for site in np.ndindex(*q) for j in range(d)}
    seen = set()
    for i, rec in enumerate(doc.get("hoppings") or []):
        path = f"hoppings[{i}]"
        if not isinstance(rec, dict):
            rd.error(path, "expected a mapping {site, axis, re, im}")
            continue
        rd.unknown(rec, ("site", "axis", "re", "im"), path)
        site = site_of(rec, path)
        axis = rec.get("axis")
        if not isinstance(axis, int) or isinstance(axis, bool) or not 1 <= axis <= d:
            rd.error(f"{path}.axis", f"expected an axis in 1..{d}")
            continue
        re_ = rd.number(rec.get("re", 1.0), f"{path}.re")
        im_ = rd.number(rec.get("im", 0.0), f"{path}.im")
        if site is None or re_ is None or im_ is None:
            continue
        if (site, axis) in seen:
            rd.error(path, f"duplicate hopping for site {list(site)}, axis {axis}")
            continue
        seen.add((site, axis))
        if re_ == 0 and im_ == 0:
            rd.error(path, "hopping must be nonzero")
        hop[(site, axis)] = (re_, im_)

    pot = {site: 0.0 for site in np.ndindex(*q)}
    seen = set()
    for i, rec in enumerate(doc.get("potential") or []):
        path = f"potential[{i}]"
        if not isinstance(rec, dict):
            rd.error(path, "expected a mapping {site, value}")
            continue
        rd.unknown(rec, ("site", "value"), path)
        site = site_of(rec, path)
        value = rd.number(rec.get("value"), f"{path}.value")
        if site is None or value is None:
            continue
        if site in seen:
            rd.error(path, f"duplicate potential for site {list(site)}")
            continue
        seen.add(site)
        pot[site] = value

    return OperatorSpec(
        d,
        q,
        tuple((key, re_, im_) for key, (re_, im_) in hop.items()),
        tuple(pot.items()),
    )


def _parse_state(value, rd, path, d):
    if value is None:
        return StateSpec("delta", (0,) * (d or 1))
    if not isinstance(value, dict):
        rd.error(path, "expected a mapping")
        return None
    rd.unknown(value, ("kind", "site", "radius"), path)
    kind = value.get("kind", "delta")
    if kind == "delta":
        site = rd.int_vector(value.get("site", [0] * (d or 1)), f"{path}.site", length=d, minimum=None)
        return None if site is None else StateSpec("delta", site)
    if kind == "random":
        r = value.get("radius", 0)
        if not isinstance(r, int) or isinstance(r, bool) or r < 0:
            rd.error(f"{path}.radius", "expected a non-negative integer")
            return None
        return StateSpec("random", None, r)
    rd.error(f"{path}.kind", "expected 'delta' or 'random'")
    return None


def _parse_times(value, rd, path):
    if not isinstance(value, list) or not value:
        rd.error(path, "expected a non-empty list of times")
        return None
    out = []
    for i, t in enumerate(value):
        t = rd.number(t, f"{path}[{i}]")
        if t is None:
            return None
        out.append(t)
    if any(b < a for a, b in zip(out, out[1:])):
        rd.error(path, "times must be ascending")
        return None
    return tuple(out)


def _parse_task(doc, rd, d):
    task = doc.get("task")
    if not isinstance(task, dict):
        rd.error("task", "missing or not a mapping")
        return None
    kind = task.get("kind")
    if kind not in TASK_KINDS:
        rd.error("task.kind", f"expected one of {', '.join(TASK_KINDS)}")
        return None
    if kind == "bands":
        rd.unknown(task, ("kind", "N"), "task")
        N = rd.int_vector(task.get("N"), "task.N", length=d, minimum=2)
        return None if N is None else BandsTask(N)
    if kind == "evolve":
        rd.unknown(task, ("kind", "geometry", "state", "times", "h"), "task")
        geo = task.get("geometry")
        if not isinstance(geo, dict) or geo.get("kind") not in ("box", "torus"):
            rd.error("task.geometry", "expected {kind: box, L: [...]} or {kind: torus, N: [...]}")
            return None
        rd.unknown(geo, ("kind", "L", "N"), "task.geometry")
        key = "L" if geo["kind"] == "box" else "N"
        size = rd.int_vector(geo.get(key), f"task.geometry.{key}", length=d)
        state = _parse_state(task.get("state"), rd, "task.state", d)
        times = _parse_times(task.get("times"), rd, "task.times")
        h = rd.number(task.get("h", 0.05), "task.h", positive=True)
        if None in (size, state, times, h):
            return None
        return EvolveTask(geo["kind"], size, state, times, h)
    if kind == "velocity":
        rd.unknown(task, ("kind", "N", "L", "state", "times", "axes"), "task")
        N = rd.int_vector(task.get("N"), "task.N", length=d, minimum=2)
        L = None
        if task.get("L") is not None:
            L = rd.int_vector(task["L"], "task.L", length=d)
        state = _parse_state(task.get("state"), rd, "task.state", d)
        times = _parse_times(task.get("times"), rd, "task.times")
        axes = rd.int_vector(task.get("axes", [1]), "task.axes")
        if axes is not None and d is not None and any(a > d for a in axes):
            rd.error("task.axes", f"axes must lie in 1..{d}")
            return None
        if times is not None and any(t <= 0 for t in times):
            rd.error("task.times", "velocity reports need positive times")
            return None
        if None in (N, state, times, axes) or (task.get("L") is not None and L is None):
            return None
        return VelocityTask(N, state, times, axes, L)
    rd.unknown(task, ("kind", "suites", "seeds", "tolerances"), "task")
    suites = task.get("suites", list(SUITES))
    if not isinstance(suites, list) or any(s not in SUITES for s in suites):
        rd.error("task.suites", f"expected a list drawn from {', '.join(SUITES)}")
        return None
    seeds = rd.int_vector(task.get("seeds", [0, 1, 2]), "task.seeds", minimum=0)
    tol = task.get("tolerances") or {}
    if not isinstance(tol, dict):
        rd.error("task.tolerances", "expected a mapping name -> value")
        return None
    tolerances = []
    for name, value in sorted(tol.items()):
        value = rd.number(value, f"task.tolerances.{name}", positive=True)
        if value is not None:
            tolerances.append((str(name), value))
    if seeds is None:
        return None
    return VerifyTask(tuple(suites), seeds, tuple(tolerances))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML configuration; raises :class:`ConfigError`."""
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError([SchemaError("<document>", str(exc).splitlines()[0], mark.line + 1 if mark else None)])
    if not isinstance(doc, dict):
        raise ConfigError([SchemaError("<document>", "expected a mapping at top level")])
    rd = _Reader(_line_map(node))
    rd.unknown(doc, ("model", "d", "q", "hoppings", "potential", "task", "seed", "output", "threads"), "")

    needs_operator = not (isinstance(doc.get("task"), dict) and doc["task"].get("kind") == "verify")
    operator = None
    if needs_operator or any(k in doc for k in ("model", "d", "q")):
        operator = _parse_operator(doc, rd)
    d = operator.d if operator else (doc.get("d") if isinstance(doc.get("d"), int) else None)
    task = _parse_task(doc, rd, d)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        rd.error("seed", "expected a non-negative integer")
    threads = doc.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        rd.error("threads", "expected a positive integer")
    output = doc.get("output", "out")
    if not isinstance(output, str):
        rd.error("output", "expected a path")

    if operator is not None:
        try:
            operator.build()
        except ValueError as exc:
            rd.error("operator", str(exc))
    if rd.errors:
        raise ConfigError(rd.errors)
    for w in rd.warnings:
        warnings.warn(w, stacklevel=2)
    return ExperimentConfig(operator, task, seed, output, threads, tuple(rd.warnings))


# --------------------------------------------------------------------------
# emission


def _state_doc(state):
    if state.kind == "delta":
        return {"kind": "delta", "site": list(state.site)}
    return {"kind": "random", "radius": state.radius}


def config_to_dict(config: ExperimentConfig) -> dict:
    doc = {}
    op = config.operator
    if op is not None:
        if op.model is not None:
            doc["model"] = op.model
        else:
            doc["d"] = op.d
            doc["q"] = list(op.q)
            doc["hoppings"] = [
                {"site": list(site), "axis": axis, "re": re_, "im": im_} for (site, axis), re_, im_ in op.hoppings
            ]
            doc["potential"] = [{"site": list(site), "value": value} for site, value in op.potential]
    t = config.task
    if isinstance(t, BandsTask):
        task = {"kind": "bands", "N": list(t.N)}
    elif isinstance(t, EvolveTask):
        key = "L" if t.geometry == "box" else "N"
        task = {
            "kind": "evolve",
            "geometry": {"kind": t.geometry, key: list(t.size)},
            "state": _state_doc(t.state),
            "times": list(t.times),
            "h": t.h,
        }
    elif isinstance(t, VelocityTask):
        task = {"kind": "velocity", "N": list(t.N), "state": _state_doc(t.state),
                "times": list(t.times), "axes": list(t.axes)}
        if t.L is not None:
            task["L"] = list(t.L)
    else:
        task = {"kind": "verify", "suites": list(t.suites), "seeds": list(t.seeds),
                "tolerances": dict(t.tolerances)}
    doc["task"] = task
    doc["seed"] = config.seed
    doc["output"] = config.output
    doc["threads"] = config.threads
    return doc


def emit_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)
