"""
JSON file formats and canonical JSON output.

Input files:

- SeqFile: ``{"name": str, "rows": N, "cols": d, "data": [[...], ...]}``
- cost file: a SeqFile, ``{"cost": [[...]], "alpha": [...], "beta": [...]}``
  or a bare nested list (uniform marginals when alpha/beta are absent)
- BundleFile: ``{"label": str, "embeddings": SeqFile, "hiddens": SeqFile}``
- QuadFile: ``{"s_raw", "s_cot", "t_raw", "t_cot"}`` BundleFiles plus an
  optional ``"projections": {"embedding": SeqFile, "hidden": SeqFile}``

Every loader raises InputFileError naming the offending field.

Output is written by ``canonical_json``: keys in insertion order and
floats with 17 significant digits, so identical results serialize to
identical bytes.
"""

from __future__ import annotations

import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from otalign.core.alignment import ReprBundle
from otalign.core.cost import Projection
from otalign.core.numerics import Matrix
from otalign.core.objective import CoTQuad, ProjectionSet
from otalign.core.transport import EmpiricalMeasure, TransportPlan, marginal_violation
from otalign.exceptions import InputFileError, OTAlignError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PLAN_TOL = 1e-6


# =============================================================================
# Canonical output
# =============================================================================

def _emit(value: Any, parts: list) -> None:
    if value is None:
        parts.append("null")
    elif isinstance(value, (bool, np.bool_)):
        parts.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        parts.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            parts.append("null")
        else:
            text = format(x, ".17g")
            if not any(c in text for c in ".eE"):
                text += ".0"
            parts.append(text)
    elif isinstance(value, str):
        parts.append(json.dumps(value))
    elif isinstance(value, dict):
        parts.append("{")
        for k, (key, item) in enumerate(value.items()):
            if k:
                parts.append(", ")
            parts.append(json.dumps(str(key)))
            parts.append(": ")
            _emit(item, parts)
        parts.append("}")
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for k, item in enumerate(value):
            if k:
                parts.append(", ")
            _emit(item, parts)
        parts.append("]")
    elif isinstance(value, np.ndarray):
        _emit(value.tolist(), parts)
    else:
        raise TypeError(f"Cannot serialize {type(value).__name__}")


def canonical_json(value: Any) -> str:
    """
    Serialize to JSON with 17 significant digits per float.

    Non-finite floats become null.
    """
    parts: list = []
    _emit(value, parts)
    return "".join(parts)


# =============================================================================
# Loading
# =============================================================================

def load_json(path: PathLike) -> Any:
    """Parse a JSON file; ``-`` reads stdin."""
    name = str(path)
    try:
        if name == "-":
            return json.load(sys.stdin)
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise InputFileError(name, "<file>", "does not exist") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(name, "<root>", f"is not valid JSON ({exc.msg} at line {exc.lineno})") from exc


def parse_matrix(obj: Any, path: str, field: str) -> Tuple[str, Matrix]:
    """
    Read a SeqFile object or a bare nested list into (name, matrix).

    Raises:
        InputFileError: If shapes disagree with rows/cols, rows are ragged,
            or an entry is not a finite number
    """
    name = ""
    rows = cols = None
    data = obj
    prefix = f"{field}." if field else ""
    if isinstance(obj, dict):
        if "data" not in obj:
            raise InputFileError(path, field or "<root>", "is missing 'data'")
        name = str(obj.get("name", ""))
        rows, cols = obj.get("rows"), obj.get("cols")
        data = obj["data"]
        field = f"{field}.data" if field else "data"

    if not isinstance(data, list) or not data:
        raise InputFileError(path, field or "<root>", "must be a non-empty list of rows")
    width = None
    for i, row in enumerate(data):
        if not isinstance(row, list) or not row:
            raise InputFileError(path, f"{field}[{i}]", "must be a non-empty list of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputFileError(path, f"{field}[{i}]", f"has {len(row)} entries, expected {width}")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise InputFileError(path, f"{field}[{i}][{j}]", f"must be a finite number, got {x!r}")

    matrix = np.array(data, dtype=np.float64)
    if rows is not None and rows != matrix.shape[0]:
        raise InputFileError(path, f"{prefix}rows", f"is {rows} but data has {matrix.shape[0]} rows")
    if cols is not None and cols != matrix.shape[1]:
        raise InputFileError(path, f"{prefix}cols", f"is {cols} but data has {matrix.shape[1]} columns")
    return name, matrix


def seq_file_dict(name: str, matrix: Matrix) -> Dict[str, Any]:
    """SeqFile object for a matrix."""
    m = np.asarray(matrix, dtype=np.float64)
    return {"name": name, "rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": m.tolist()}


def load_seq_file(path: PathLike) -> Tuple[str, Matrix]:
    """Load a SeqFile (or a bare nested list) from disk."""
    return parse_matrix(load_json(path), str(path), "")


def _measure(obj: Any, path: str, field: str, size: int) -> EmpiricalMeasure:
    if not isinstance(obj, list) or len(obj) != size:
        raise InputFileError(path, field, f"must be a list of {size} weights")
    try:
        return EmpiricalMeasure.from_weights(obj)
    except (OTAlignError, TypeError, ValueError) as exc:
        raise InputFileError(path, field, str(exc)) from exc


@dataclass
class CostProblem:
    """A cost matrix with optional explicit marginals."""

    cost: Matrix
    alpha: Optional[EmpiricalMeasure] = None
    beta: Optional[EmpiricalMeasure] = None


def load_cost_file(path: PathLike) -> CostProblem:
    """Load a cost matrix file for the sinkhorn and oracle commands."""
    name = str(path)
    obj = load_json(path)
    if isinstance(obj, dict) and "cost" in obj:
        _, cost = parse_matrix(obj["cost"], name, "cost")
        n, m = cost.shape
        alpha = _measure(obj["alpha"], name, "alpha", n) if "alpha" in obj else None
        beta = _measure(obj["beta"], name, "beta", m) if "beta" in obj else None
        return CostProblem(cost, alpha, beta)
    _, cost = parse_matrix(obj, name, "")
    return CostProblem(cost)


def parse_bundle(obj: Any, path: str, field: str = "") -> ReprBundle:
    """Read a BundleFile object into a ReprBundle."""
    prefix = f"{field}." if field else ""
    if not isinstance(obj, dict):
        raise InputFileError(path, field or "<root>", "must be an object with embeddings and hiddens")
    for key in ("embeddings", "hiddens"):
        if key not in obj:
            raise InputFileError(path, f"{prefix}{key}", "is missing")
    _, emb = parse_matrix(obj["embeddings"], path, f"{prefix}embeddings")
    _, hid = parse_matrix(obj["hiddens"], path, f"{prefix}hiddens")
    try:
        return ReprBundle(emb, hid, str(obj.get("label", field)))
    except OTAlignError as exc:
        raise InputFileError(path, field or "<root>", str(exc)) from exc


def load_bundle_file(path: PathLike) -> ReprBundle:
    return parse_bundle(load_json(path), str(path))


def load_quad_file(path: PathLike) -> Tuple[CoTQuad, Optional[ProjectionSet]]:
    """Load a QuadFile into a CoTQuad and its optional projections."""
    name = str(path)
    obj = load_json(path)
    if not isinstance(obj, dict):
        raise InputFileError(name, "<root>", "must be an object")
    bundles = {}
    for key in ("s_raw", "s_cot", "t_raw", "t_cot"):
        if key not in obj:
            raise InputFileError(name, key, "is missing")
        bundles[key] = parse_bundle(obj[key], name, key)
    try:
        quad = CoTQuad(**bundles)
    except OTAlignError as exc:
        raise InputFileError(name, "<root>", str(exc)) from exc

    projections = None
    if "projections" in obj:
        raw = obj["projections"]
        if not isinstance(raw, dict):
            raise InputFileError(name, "projections", "must be an object")
        projections = ProjectionSet()
        for key in ("embedding", "hidden"):
            if key in raw:
                _, weights = parse_matrix(raw[key], name, f"projections.{key}")
                setattr(projections, key, Projection(weights))
    return quad, projections


def plan_from_dict(data: Dict[str, Any], path: str = "<plan>", tol: float = PLAN_TOL) -> TransportPlan:
    """
    Re-read an emitted plan and check it is a feasible coupling.

    Marginals default to uniform when the object carries none.

    Raises:
        InputFileError: If the plan is malformed, negative, or off its marginals
    """
    if not isinstance(data, dict) or "plan" not in data:
        raise InputFileError(path, "plan", "is missing")
    _, plan = parse_matrix(data["plan"], path, "plan")
    n, m = plan.shape
    alpha = np.asarray(data.get("alpha", np.full(n, 1.0 / n)), dtype=np.float64)
    beta = np.asarray(data.get("beta", np.full(m, 1.0 / m)), dtype=np.float64)
    if np.any(plan < 0):
        raise InputFileError(path, "plan", "has negative entries")
    err = marginal_violation(plan, alpha, beta)
    if err > tol:
        raise InputFileError(path, "plan", f"violates its marginals by {err:.3e}")
    return TransportPlan(
        plan=plan,
        cost=float(data.get("cost", float("nan"))),
        iterations=int(data.get("iterations", 0)),
        converged=bool(data.get("converged", True)),
        marginal_err=err,
        method=str(data.get("method", "sinkhorn-log")),
        alpha=alpha,
        beta=beta,
    )


__all__ = [
    "CostProblem",
    "canonical_json",
    "load_json",
    "parse_matrix",
    "seq_file_dict",
    "load_seq_file",
    "load_cost_file",
    "parse_bundle",
    "load_bundle_file",
    "load_quad_file",
    "plan_from_dict",
]
