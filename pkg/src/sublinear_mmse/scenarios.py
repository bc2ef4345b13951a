"""Problem instances: the worked examples, the binomial tree, and JSON files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .ambiguity import AmbiguitySet, hull_residual, pasting_construct, rho
from .space import Partition, SampleSpace, as_variable

SCENARIO_SCHEMA_ID = "mmse-scenario/1"
REPORT_SCHEMA_ID = "mmse-report/1"
FILE_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Scenario:
    space: SampleSpace
    partition: Partition
    ambiguity: AmbiguitySet
    xi: np.ndarray
    name: str = ""
    description: str = ""
    filtration: Optional[list] = None

    def __post_init__(self):
        if self.ambiguity.space != self.space:
            raise ValueError("ambiguity set lives on a different sample space")
        if self.partition.size != self.space.size:
            raise ValueError("partition size does not match the atom count")
        xi = as_variable(self.space, self.xi).copy()
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        if self.filtration is not None:
            for f in self.filtration:
                if f.size != self.space.size:
                    raise ValueError("filtration partition size does not match the atom count")

    def with_xi(self, xi) -> "Scenario":
        return Scenario(self.space, self.partition, self.ambiguity, xi, self.name, self.description, self.filtration)


# -- worked examples ---------------------------------------------------------

def example_41(base_weights=None) -> Scenario:
    """Two atoms, no information, hull of (1/3, 2/3) and (2/3, 1/3), xi = (2, 6).

    The minimax estimator is 4 with worst case (1/2, 1/2) while rho(xi) = 14/3.
    """
    base = np.array([0.5, 0.5]) if base_weights is None else np.asarray(base_weights, dtype=float)
    space = SampleSpace(("w1", "w2"), base)
    a = AmbiguitySet(space, np.array([[1 / 3, 2 / 3], [2 / 3, 1 / 3]]))
    return Scenario(space, Partition.trivial(2), a, np.array([2.0, 6.0]), "ex41",
                    "two-point segment, trivial information")


@dataclass(frozen=True)
class Ex42Closure:
    """Closed-form stationarity solution for the truncated geometric example."""

    N: int
    lambda_star: float
    p: tuple  # p_i for i = 2..N
    F_value: float
    tail_bound: float  # bound on the omitted tail of rho(xi)
    tail_mass: float  # mass removed from P1 by truncation (P2 loses less)
    rho_series: float  # 2/3 + sum_{n=2}^N (2/3^n)(2^n/n^4)
    sign_value: float  # -1/6 + sum_{n=2}^N (1/n^4 - 2^{n+1}/(3^n n^4)); negative
    feasible: bool  # lambda_star in [0, 1]
    hull_residual: float  # distance of the candidate measure from the segment


def ex42_xi(N: int) -> np.ndarray:
    n = np.arange(1, N + 1, dtype=float)
    xi = 2.0**n / n**4
    xi[0] = 1.0  # the example lists xi(1) = 1, not 2/1
    return xi


def example_42_truncated(N: int = 40) -> tuple[Scenario, Ex42Closure]:
    """Truncation at N atoms of the geometric two-vertex example.

    Vertices ``P1(n) ~ 1/2^n`` and ``P2(n) ~ 2/3^n`` are renormalized after
    truncation. ``P0`` is uniform: the barycenter would put atoms below the
    1e-12 floor for N >= 39, and the estimator does not depend on ``P0``.
    """
    if not 5 <= N <= 60:
        raise ValueError("N must lie in [5, 60]")
    n = np.arange(1, N + 1, dtype=float)
    p1 = 0.5**n
    p2 = 2.0 / 3.0**n
    xi = ex42_xi(N)
    space = SampleSpace.uniform([str(i) for i in range(1, N + 1)])
    a = AmbiguitySet(space, np.stack([p1 / p1.sum(), p2 / p2.sum()]))
    scen = Scenario(space, Partition.trivial(N), a, xi, f"ex42-N{N}",
                    "geometric segment truncated at N atoms, trivial information")

    m = n >= 2
    x = xi - 1.0
    d = p1 - p2
    t_sum = float(np.sum(d[m] * x[m] ** 2))
    b_sum = float(np.sum(d[m] * x[m]))
    a_sum = float(np.sum(p2[m] * x[m]))
    F = t_sum / (2.0 * b_sum)
    lam = (F - a_sum) / b_sum
    p = lam / 2.0 ** n[m] + 2.0 * (1.0 - lam) / 3.0 ** n[m]
    candidate = np.concatenate([[1.0 - p.sum()], p])
    res, _ = hull_residual(a, candidate / space.base_weights)
    tail_bound = 6.0 * (2.0 / 3.0) ** (N + 1) / (N + 1) ** 4
    closure = Ex42Closure(
        N=N,
        lambda_star=lam,
        p=tuple(p.tolist()),
        F_value=F,
        tail_bound=tail_bound,
        tail_mass=0.5**N,
        rho_series=2.0 / 3.0 + float(np.sum(p2[m] * xi[m])),
        sign_value=-1.0 / 6.0 + float(np.sum(1.0 / n[m] ** 4 - 2.0 ** (n[m] + 1) / (3.0 ** n[m] * n[m] ** 4))),
        feasible=bool(0.0 <= lam <= 1.0),
        hull_residual=res,
    )
    return scen, closure


def segment_slope(scen: Scenario, lam: float) -> float:
    """d/dlam of Var_{lam P1 + (1-lam) P2}(xi), valid for any real lam.

    Only meaningful for two-vertex sets under trivial information, where the
    variance is a quadratic in ``lam``.
    """
    P1, P2 = scen.ambiguity.weights
    xi = scen.xi
    a = float(P2 @ xi)
    b = float((P1 - P2) @ xi)
    t = float((P1 - P2) @ xi**2)
    return t - 2.0 * b * (a + lam * b)


def segment_kkt_residual(scen: Scenario, lam: float) -> float:
    """Projected-gradient residual on [0, 1] plus distance to feasibility."""
    if lam < 0 or lam > 1:
        return max(-lam, lam - 1.0) + abs(segment_slope(scen, lam))
    s = segment_slope(scen, lam)
    if lam >= 1.0:
        return max(0.0, -s)
    if lam <= 0.0:
        return max(0.0, s)
    return abs(s)


def ex42_discrepancy(N: int, lambda_hat: float) -> dict:
    """Compare the solver's lambda with the closed-form stationary point."""
    scen, closure = example_42_truncated(N)
    agree = abs(lambda_hat - closure.lambda_star) <= 1e-5
    return {
        "N": N,
        "lambda_hat": lambda_hat,
        "lambda_star": closure.lambda_star,
        "agree": agree,
        "formula_feasible": closure.feasible,
        "formula_unconstrained_slope": segment_slope(scen, closure.lambda_star),
        "formula_kkt_residual": segment_kkt_residual(scen, closure.lambda_star),
        "solver_kkt_residual": segment_kkt_residual(scen, lambda_hat),
        "formula_hull_residual": closure.hull_residual,
    }


def example_43_tree(depth: int = 2, tilt: float = 0.5, xi=None, t: int = 1) -> tuple[Scenario, list]:
    """Binomial tree with node-wise drift ambiguity; information is the path up to time ``t``.

    ``xi`` defaults to the terminal value of the +-1 walk.
    """
    if not 2 <= depth <= 4:
        raise ValueError("depth must lie in [2, 4]")
    tree = pasting_construct(depth, tilt)
    if xi is None:
        xi = tree.steps.sum(axis=1).astype(float)
    scen = Scenario(tree.space, tree.filtration[t], tree.ambiguity, xi, f"tree-d{depth}",
                    f"binomial tree, depth {depth}, tilt {tilt!r}, information F_{t}",
                    list(tree.filtration))
    return scen, list(tree.filtration)


def _check_filtration(c_list) -> None:
    for coarse, fine in zip(c_list, c_list[1:]):
        if not fine.refines(coarse):
            raise ValueError("partition list is not a filtration (each must refine the previous)")


def conditional_sublinear(xi, a: AmbiguitySet, c_list) -> list:
    """Block-wise ess sup over vertices of E_P[xi | F_t], one variable per partition."""
    _check_filtration(c_list)
    xi = np.asarray(xi, dtype=float)
    out = []
    for c in c_list:
        ind = c.indicator
        cond = ((a.weights * xi) @ ind) / (a.weights @ ind)  # vertices x blocks
        out.append(cond.max(axis=0)[c.labels])
    return out


def backward_recursion(xi, a: AmbiguitySet, c_list) -> list:
    """Dynamic-programming version: V_t = ess sup_P E_P[V_{t+1} | F_t], starting from xi."""
    _check_filtration(c_list)
    value = np.asarray(xi, dtype=float)
    out = []
    for c in reversed(c_list):
        ind = c.indicator
        cond = ((a.weights * value) @ ind) / (a.weights @ ind)
        value = cond.max(axis=0)[c.labels]
        out.append(value)
    return out[::-1]


# -- files ---------------------------------------------------------------------

class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""


_DECIMALS = {"type": "array", "items": {"type": "number"}}
_BLOCKS = {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema", "atoms", "base_weights", "partition", "vertices", "xi"],
    "properties": {
        "schema": {"const": SCENARIO_SCHEMA_ID},
        "atoms": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "base_weights": _DECIMALS,
        "partition": _BLOCKS,
        "vertices": {"type": "array", "items": _DECIMALS, "minItems": 1},
        "xi": _DECIMALS,
        "filtration": {"type": "array", "items": _BLOCKS},
        "meta": {"type": "object", "additionalProperties": {"type": "string"}},
    },
    "additionalProperties": False,
}


def _field(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _check_weights(values, where: str) -> None:
    for i, v in enumerate(values):
        if not math.isfinite(v):
            raise ScenarioError(f"{where}[{i}]: weight must be finite")
        if v < 0:
            raise ScenarioError(f"{where}[{i}]: negative weight {v!r}")
    total = math.fsum(values)
    if abs(total - 1.0) > FILE_SUM_TOL:
        raise ScenarioError(f"{where}: weights sum to {total!r}, not 1 within {FILE_SUM_TOL:g}")


def _normalized(values):
    total = math.fsum(values)
    arr = np.array(values, dtype=float)
    return arr if abs(total - 1.0) <= 1e-13 else arr / total


def _partition(blocks, n: int, where: str) -> Partition:
    try:
        return Partition(tuple(tuple(b) for b in blocks), n)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def scenario_from_dict(doc: dict) -> Scenario:
    errors = sorted(jsonschema.Draft7Validator(SCENARIO_SCHEMA).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        raise ScenarioError(f"{_field(e.absolute_path)}: {e.message}")
    n = len(doc["atoms"])
    for key in ("base_weights", "xi"):
        if len(doc[key]) != n:
            raise ScenarioError(f"{key}: expected {n} entries (one per atom), got {len(doc[key])}")
    for j, v in enumerate(doc["vertices"]):
        if len(v) != n:
            raise ScenarioError(f"vertices[{j}]: expected {n} entries, got {len(v)}")
    _check_weights(doc["base_weights"], "base_weights")
    for j, v in enumerate(doc["vertices"]):
        _check_weights(v, f"vertices[{j}]")
        if any(x == 0 for x in v):
            raise ScenarioError(f"vertices[{j}]: null atom; every vertex must be equivalent to P0")
    try:
        space = SampleSpace(tuple(doc["atoms"]), _normalized(doc["base_weights"]))
    except ValueError as exc:
        raise ScenarioError(f"base_weights: {exc}") from None
    partition = _partition(doc["partition"], n, "partition")
    filtration = None
    if "filtration" in doc:
        filtration = [_partition(f, n, f"filtration[{t}]") for t, f in enumerate(doc["filtration"])]
    a = AmbiguitySet(space, np.stack([_normalized(v) for v in doc["vertices"]]))
    meta = doc.get("meta", {})
    return Scenario(space, partition, a, np.array(doc["xi"], dtype=float),
                    meta.get("name", ""), meta.get("description", ""), filtration)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return scenario_from_dict(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def scenario_to_dict(scen: Scenario) -> dict:
    doc = {
        "schema": SCENARIO_SCHEMA_ID,
        "atoms": list(scen.space.atoms),
        "base_weights": scen.space.base_weights.tolist(),
        "partition": [list(b) for b in scen.partition.blocks],
        "vertices": scen.ambiguity.weights.tolist(),
        "xi": scen.xi.tolist(),
    }
    if scen.filtration is not None:
        doc["filtration"] = [[list(b) for b in f.blocks] for f in scen.filtration]
    meta = {k: v for k, v in (("name", scen.name), ("description", scen.description)) if v}
    if meta:
        doc["meta"] = meta
    return doc


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""

    def enc(x, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(x[k], level + 1)}" for k in sorted(x)]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(x, (list, tuple)):
            if not x:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple)) for v in x):
                return "[" + ", ".join(enc(v, level + 1) for v in x) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in x) + "\n" + end + "]"
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if x is None:
            return "null"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            if not math.isfinite(x):
                raise ValueError("non-finite number in report")
            return format(float(x), ".17g")
        if isinstance(x, str):
            return json.dumps(x)
        if isinstance(x, np.ndarray):
            return enc(x.tolist(), level)
        raise TypeError(f"cannot serialize {type(x).__name__}")

    return enc(obj, 0) + "\n"


def save_scenario(path, scen: Scenario) -> None:
    Path(path).write_text(dumps(scenario_to_dict(scen)), encoding="utf-8")


def solution_report(scen: Scenario, sol, saddle=None, tol=None, max_iter=None) -> dict:
    """Machine-readable summary of a solve, suitable for :func:`save_report`."""
    rep = {
        "schema": REPORT_SCHEMA_ID,
        "tool_version": __version__,
        "scenario": scen.name,
        "blocks": [list(b) for b in scen.partition.blocks],
        "eta_hat": sol.eta_blocks.tolist(),
        "w_hat": np.asarray(sol.w_hat).tolist(),
        "alpha": sol.alpha,
        "gap": sol.gap,
        "rho_residual_sq": sol.upper,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "rho_xi": rho(scen.xi, scen.ambiguity)[0],
    }
    if saddle is not None:
        rep["saddle"] = {
            "passed": saddle.passed,
            "left_margin": saddle.left_margin,
            "right_margin": saddle.right_margin,
            "center": saddle.center,
        }
    if tol is not None:
        rep["tolerance"] = tol
    if max_iter is not None:
        rep["max_iter"] = max_iter
    return rep


def save_report(path, report: dict) -> None:
    Path(path).write_text(dumps(report), encoding="utf-8")


def load_report(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    for key in ("eta_hat", "w_hat", "alpha", "gap"):
        if key not in doc:
            raise ScenarioError(f"{path}: report lacks field {key!r}")
    return doc
