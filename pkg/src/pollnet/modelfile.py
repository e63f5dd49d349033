"""JSON model files.

Schema::

    {
      "name": "optional label",
      "n": 3,
      "arrival_weights": [1, 10, 0],
      "service":    [{"kind": "deterministic", "value": 1}, ...],
      "switchover": [{"kind": "exponential", "mean": 2}, ...],
      "routing":    [[0, 0, 1], [0, 0, 1], [0, 0, 0]]
    }

Distribution objects: ``deterministic`` (value), ``exponential`` (mean),
``uniform`` (lower, upper), ``gamma`` (shape, rate). ``routing`` may be
omitted for a plain polling system. ``switchover[i]`` is the time to move
from queue ``i`` to queue ``i + 1``.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .model import DistributionSpec, ModelError, NetworkModel, Violation, validate


class ModelFileError(ValueError):
    """Unreadable or invalid model file; ``problems`` holds one line per issue."""

    def __init__(self, path, problems):
        self.path = str(path)
        self.problems = list(problems)
        super().__init__(f"{self.path}: " + "; ".join(self.problems))


def _line_of(text: str, where: str) -> int | None:
    key = re.match(r"[A-Za-z_]+", where or "")
    if not key:
        return None
    hit = re.search(rf'"{key.group(0)}"\s*:', text)
    return text.count("\n", 0, hit.start()) + 1 if hit else None


def model_from_dict(d: dict) -> tuple[NetworkModel, list[Violation]]:
    """Build a model from parsed JSON, returning schema-level violations alongside."""
    problems: list[Violation] = []
    weights = d.get("arrival_weights")
    if not isinstance(weights, list):
        raise ModelError([Violation("schema", "arrival_weights must be a list", "arrival_weights")])
    n = d.get("n", len(weights))
    if n != len(weights):
        problems.append(Violation("dimension", f"n={n} but {len(weights)} arrival weights", "n"))

    def dists(field):
        raw = d.get(field)
        if not isinstance(raw, list):
            problems.append(Violation("schema", f"{field} must be a list", field))
            return ()
        out = []
        for i, item in enumerate(raw):
            try:
                out.append(DistributionSpec.from_dict(item))
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                problems.append(Violation("distribution", f"bad distribution ({exc})", f"{field}[{i}]"))
                out.append(DistributionSpec.deterministic(1.0))
        return tuple(out)

    service = dists("service")
    switchover = dists("switchover")
    routing = d.get("routing")
    try:
        p = np.zeros((len(weights), len(weights))) if routing is None else np.array(routing, dtype=float)
        if p.ndim != 2:
            raise ValueError("not a matrix")
    except (TypeError, ValueError) as exc:
        problems.append(Violation("schema", f"routing must be an n x n matrix ({exc})", "routing"))
        p = np.zeros((len(weights), len(weights)))
    try:
        w = np.array(weights, dtype=float)
    except (TypeError, ValueError):
        problems.append(Violation("schema", "arrival weights must be numbers", "arrival_weights"))
        w = np.ones(len(weights))
    model = NetworkModel(w, service, switchover, p, name=str(d.get("name", "")))
    return model, problems


def parse_model(text: str, path="<string>") -> NetworkModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(path, [f"line {exc.lineno} col {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ModelFileError(path, ["top level must be an object"])
    try:
        model, problems = model_from_dict(data)
    except ModelError as exc:
        problems, model = exc.violations, None
    if model is not None:
        problems = problems + [v for v in validate(model) if v not in problems]
    if problems:
        lines = []
        for v in problems:
            ln = _line_of(text, v.where)
            loc = f"line {ln} ({v.where})" if ln else v.where or "model"
            lines.append(f"{loc}: {v.code}: {v.message}")
        raise ModelFileError(path, lines)
    return model


def load_model(path) -> NetworkModel:
    """Read and validate a model file; bundled models may be named without a path (``katayama``)."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("pollnet") / "data" / f"{p.stem}.json"
        if p.parent == Path(".") and bundled.is_file():
            return parse_model(bundled.read_text(), str(bundled))
        raise ModelFileError(path, ["file not found"])
    return parse_model(p.read_text(), str(p))


def model_to_dict(model: NetworkModel) -> dict:
    out = {"n": model.n, "arrival_weights": model.arrival_weights.tolist()}
    if model.name:
        out = {"name": model.name, **out}
    out["service"] = [s.to_dict() for s in model.service]
    out["switchover"] = [s.to_dict() for s in model.switchover]
    out["routing"] = model.routing.tolist()
    return out


def dump_model(model: NetworkModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def katayama() -> NetworkModel:
    return load_model("katayama")
