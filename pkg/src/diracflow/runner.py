"""Scenario runner: loads declarative scenario descriptions, executes the
verification computations (boundary flow, cylinder theorem, cobordism,
heat-trace sweeps, half-cylinder checks), and produces append-only records
suitable for JSON/CSV emission.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import circle as circ
from . import cylinder as cyl
from . import getzler as gz
from . import halfline as hl

# Global sign conventions, calibrated once on the k=1 scenarios and frozen:
# SIGMA1 relates boundary flow to winding, SIGMA2 fixes the sign of the
# half-difference on the right side of the main identity.
SIGMA1 = 1
SIGMA2 = 1

KINDS = (
    "circle_sf",
    "cylinder_theorem",
    "cobordism",
    "getzler_sweep",
    "halfcyl_checks",
    "gamma_check",
)


class ScenarioError(ValueError):
    """Invalid scenario description (configuration error, not a check failure)."""


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    params: dict
    expected: float | None = None
    tolerance: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if not isinstance(self.params, dict):
            raise ScenarioError("params must be a mapping")

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        try:
            return cls(
                name=str(doc["name"]),
                kind=str(doc["kind"]),
                params=dict(doc.get("params", {})),
                expected=doc.get("expected"),
                tolerance=float(doc.get("tolerance", 0.0)),
                seed=doc.get("seed"),
            )
        except KeyError as exc:
            raise ScenarioError(f"scenario missing required field {exc}") from exc


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    kind: str
    values: dict
    passed: bool
    wall_time: float
    resolution: dict
    conventions: dict = field(
        default_factory=lambda: {"sigma1": SIGMA1, "sigma2": SIGMA2}
    )

    def canonical(self) -> dict:
        """Deterministic content: everything except wall time."""
        return {
            "scenario": self.scenario,
            "kind": self.kind,
            "values": self.values,
            "passed": self.passed,
            "resolution": self.resolution,
            "conventions": self.conventions,
        }

    def as_dict(self) -> dict:
        d = self.canonical()
        d["wall_time"] = self.wall_time
        return d


def _require(params: dict, key: str, default=None):
    if key in params:
        return params[key]
    if default is not None:
        return default
    raise ScenarioError(f"missing parameter {key!r}")


def _gauge_from_params(grid: circ.CircleGrid, spec) -> circ.GaugeMap:
    """Gauge description: {"k": int} scalar winding, {"diag_k": [ints]} for a
    diagonal gauge, or the full Fourier-term JSON schema."""
    if isinstance(spec, int):
        return circ.GaugeMap.exp_winding(grid, spec)
    if not isinstance(spec, dict):
        raise ScenarioError("gauge must be an integer winding or a mapping")
    if "terms" in spec:
        return circ.load_gauge_json(grid, spec)
    if "diag_k" in spec:
        parts = [circ.GaugeMap.exp_winding(grid, int(k)) for k in spec["diag_k"]]
        return circ.GaugeMap.diagonal(*parts)
    if "k" in spec:
        return circ.GaugeMap.exp_winding(grid, int(spec["k"]))
    raise ScenarioError(f"unrecognized gauge description {spec!r}")


def _expected_ok(scenario: Scenario, value: float) -> bool:
    if scenario.expected is None:
        return True
    return abs(value - float(scenario.expected)) <= scenario.tolerance


def _run_circle_sf(s: Scenario) -> tuple[dict, bool, dict]:
    grid = circ.CircleGrid(int(_require(s.params, "n_theta", 33)))
    g = _gauge_from_params(grid, _require(s.params, "gauge"))
    B = circ.build_boundary_dirac(grid, g.fiber_dim)
    sf = circ.boundary_sf(B, g)
    wind = circ.winding_number(g)
    values = {"sf": sf, "winding": wind, "predicted": SIGMA1 * wind}
    ok = sf == SIGMA1 * wind and _expected_ok(s, sf)
    return values, ok, {"n_theta": grid.n_theta, "fiber_dim": g.fiber_dim}


def _run_getzler_sweep(s: Scenario) -> tuple[dict, bool, dict]:
    grid = circ.CircleGrid(int(_require(s.params, "n_theta", 65)))
    g = _gauge_from_params(grid, _require(s.params, "gauge"))
    eps_grid = [float(e) for e in s.params.get("eps_grid", [1, 4, 9, 16, 25])]
    B = circ.build_boundary_dirac(grid, g.fiber_dim)
    sf = circ.boundary_sf(B, g)
    V = circ.analytic_gauge_commutator(B, g)
    est = gz.eps_sweep(B.op, V, eps_grid)
    pv = est.plateau_value
    values = {
        "sf": sf,
        "plateau_value": pv,
        "sf_estimate": est.sf_estimate,
        "sweep": [[e, v] for e, v in est.sweep],
    }
    ok = pv is not None and abs(pv - sf) < 0.05 and _expected_ok(s, sf)
    return values, ok, {"n_theta": grid.n_theta, "fiber_dim": g.fiber_dim}


def _boundary_component_flows(grid, fiber_dim, Fv, g, orientation):
    """Flows of the full, positive-part, and negative-part boundary operators
    on one boundary component with its orientation folded in."""
    B = circ.build_boundary_dirac(grid, fiber_dim, orientation=orientation)
    split = circ.boundary_splitting_from_F(Fv)
    Bp, Bm = circ.split_by_F(B, split, product_flag=True)
    return (
        circ.boundary_sf(B, g),
        circ.boundary_sf(Bp, g),
        circ.boundary_sf(Bm, g),
    )


def _cylinder_setup(s: Scenario):
    grid = circ.CircleGrid(int(_require(s.params, "n_theta", 33)))
    interval = cyl.IntervalGrid(
        int(_require(s.params, "n_x", 32)), float(s.params.get("L", 1.0))
    )
    g = _gauge_from_params(grid, _require(s.params, "gauge"))
    f = g.fiber_dim
    F0 = s.params.get("F0", 1)
    FL = s.params.get("FL", -1)
    F0v = cyl._expand_F(F0, grid.n_theta, f)
    FLv = cyl._expand_F(FL, grid.n_theta, f)
    bvp = cyl.assemble(grid, interval, f, F0v, FLv, product_flag=True)
    return grid, interval, g, F0v, FLv, bvp


def _run_cylinder_theorem(s: Scenario) -> tuple[dict, bool, dict]:
    grid, interval, g, F0v, FLv, bvp = _cylinder_setup(s)
    lhs = cyl.cylinder_sf(bvp, g).value
    # boundary orientation: outward at x=0, reversed at x=L
    full0, p0, m0 = _boundary_component_flows(grid, g.fiber_dim, F0v, g, +1)
    fullL, pL, mL = _boundary_component_flows(grid, g.fiber_dim, FLv, g, -1)
    sf_plus = p0 + pL
    sf_minus = m0 + mL
    rhs2 = SIGMA2 * (sf_plus - sf_minus)
    if rhs2 % 2 != 0:
        raise RuntimeError("half-difference is not an integer")
    rhs = rhs2 // 2
    values = {
        "lhs": lhs,
        "rhs": rhs,
        "sf_plus_total": sf_plus,
        "sf_minus_total": sf_minus,
        "sf_plus_components": [p0, pL],
        "sf_minus_components": [m0, mL],
        "sf_full_components": [full0, fullL],
        "corollary_sum": sf_plus + sf_minus,
        "theorem33_prime": [lhs, sf_plus, -sf_minus],
    }
    ok = (
        lhs == rhs
        and sf_plus + sf_minus == 0
        and lhs == sf_plus == -sf_minus
        and _expected_ok(s, lhs)
    )
    res = {
        "n_theta": grid.n_theta,
        "n_x": interval.n_x,
        "L": interval.length,
        "fiber_dim": g.fiber_dim,
        "dim": bvp.dim,
    }
    return values, ok, res


def _run_cobordism(s: Scenario) -> tuple[dict, bool, dict]:
    params = dict(s.params)
    params.setdefault("F0", 1)
    params.setdefault("FL", 1)
    s = Scenario(s.name, s.kind, params, s.expected, s.tolerance, s.seed)
    grid, interval, g, F0v, FLv, bvp = _cylinder_setup(s)
    full0, _, _ = _boundary_component_flows(grid, g.fiber_dim, F0v, g, +1)
    fullL, _, _ = _boundary_component_flows(grid, g.fiber_dim, FLv, g, -1)
    total = full0 + fullL
    lhs = cyl.cylinder_sf(bvp, g).value
    floor = cyl.path_spectral_floor(bvp, g)
    values = {
        "cylinder_sf": lhs,
        "boundary_total": total,
        "boundary_components": [full0, fullL],
        "spectral_floor": floor,
    }
    ok = total == 0 and lhs == 0 and floor >= 0.05
    res = {"n_theta": grid.n_theta, "n_x": interval.n_x, "dim": bvp.dim}
    return values, ok, res


def _run_gamma_check(s: Scenario) -> tuple[dict, bool, dict]:
    grid, interval, g, _, _, bvp = _cylinder_setup(s)
    rep = cyl.gamma_deformation_check(bvp, g)
    values = {
        "u_values": list(rep.u_values),
        "min_singular_values": list(rep.min_singular_values),
        "interior_anticommutator": rep.interior_anticommutator,
        "full_anticommutator_defect": rep.full_anticommutator_defect,
        "gamma_squared_defect": rep.gamma_squared_defect,
    }
    ok = rep.all_positive
    res = {"n_theta": grid.n_theta, "n_x": interval.n_x, "dim": bvp.dim}
    return values, ok, res


def _run_halfcyl_checks(s: Scenario) -> tuple[dict, bool, dict]:
    grid = circ.CircleGrid(int(_require(s.params, "n_theta", 33)))
    g = _gauge_from_params(grid, _require(s.params, "gauge"))
    f = g.fiber_dim
    Fv = cyl._expand_F(s.params.get("F", 1 if f == 1 else np.diag([1.0] * (f - 1) + [-1.0])), grid.n_theta, f)
    B = circ.build_boundary_dirac(grid, f)
    model = hl.HalfCylModel(boundary=B, splitting=circ.boundary_splitting_from_F(Fv))

    eps_list = [float(e) for e in s.params.get("eps", [0.01, 0.02, 0.04])]
    cut = hl.CutoffPair(0.5, 1.0)
    half = {repr(e): hl.half_trace_integral(e, cut) for e in eps_list}
    half_dev = max(abs(v - 0.5) for v in half.values())

    uid = hl.verify_U_identities(model.boundary.op.entries, model.F_matrix())
    semi = hl.image_kernel_semigroup_defect(
        0.02, 0.03, -1, [(0.1, 0.2), (0.5, 0.5), (1.0, 0.3)]
    )
    mixed = hl.verify_mixed_domain(0.02, betas=[0.0, 1.0, 2.0])
    mixed_dev = max(c.max_deviation for c in mixed)
    fact = hl.factorized_boundary_term(model, g, eps=0.5)

    values = {
        "half_trace": half,
        "half_trace_max_deviation": half_dev,
        "u_identity_residual": uid.max_residual(),
        "semigroup_defect": semi,
        "mixed_domain_max_deviation": mixed_dev,
        "factorized_value": fact.value,
        "factorized_split_value": fact.split_value,
    }
    ok = (
        half_dev <= 1e-10
        and uid.max_residual() <= 1e-11
        and semi <= 1e-8
        and mixed_dev <= 1e-6
    )
    return values, ok, {"n_theta": grid.n_theta, "fiber_dim": f}


_DISPATCH = {
    "circle_sf": _run_circle_sf,
    "cylinder_theorem": _run_cylinder_theorem,
    "cobordism": _run_cobordism,
    "getzler_sweep": _run_getzler_sweep,
    "halfcyl_checks": _run_halfcyl_checks,
    "gamma_check": _run_gamma_check,
}


def run(scenario: Scenario) -> RunRecord:
    t0 = time.perf_counter()
    try:
        values, passed, resolution = _DISPATCH[scenario.kind](scenario)
    except ScenarioError:
        raise
    except Exception as exc:
        raise RuntimeError(f"scenario {scenario.name!r} failed: {exc}") from exc
    if scenario.seed is not None:
        resolution = {**resolution, "seed": scenario.seed}
    return RunRecord(
        scenario=scenario.name,
        kind=scenario.kind,
        values=values,
        passed=passed,
        wall_time=time.perf_counter() - t0,
        resolution=resolution,
    )


def load_suite(source) -> list[Scenario]:
    """Suite file: {"scenarios": [scenario, ...]}."""
    if isinstance(source, (str, bytes)):
        doc = json.loads(source)
    else:
        doc = source
    if "scenarios" not in doc:
        raise ScenarioError("suite file must contain a 'scenarios' list")
    return [Scenario.from_dict(d) for d in doc["scenarios"]]


def run_suite(scenarios: list[Scenario], workers: int = 1) -> list[RunRecord]:
    """Run scenarios in parallel up to a worker cap; results keep file order."""
    if workers < 1:
        raise ScenarioError(f"workers must be >= 1, got {workers}")
    if workers == 1:
        return [run(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, scenarios))


def emit_json(records: list[RunRecord]) -> str:
    return json.dumps([r.as_dict() for r in records], indent=2, sort_keys=True)


def emit_csv(records: list[RunRecord]) -> str:
    """Suite summary: scenario, lhs, rhs, pass (lhs/rhs blank when a scenario
    kind has no two-sided identity)."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["scenario", "lhs", "rhs", "pass"])
    for r in records:
        lhs = r.values.get("lhs", r.values.get("sf", r.values.get("cylinder_sf", "")))
        rhs = r.values.get(
            "rhs", r.values.get("predicted", r.values.get("boundary_total", ""))
        )
        w.writerow([r.scenario, lhs, rhs, int(r.passed)])
    return buf.getvalue()


def emit(records: list[RunRecord], fmt: str, out_path: str | None = None) -> str:
    if fmt == "json":
        text = emit_json(records)
    elif fmt == "csv":
        text = emit_csv(records)
    else:
        raise ScenarioError(f"unknown format {fmt!r}")
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(text)
    return text
