"""
Task dispatch shared by the command line and the Streamlit page.

Each task reads the scenario (p, family, point) plus its own ``key=value``
parameters and returns a TaskResult. NoMap becomes status "no-map",
NoSolution becomes "fail"; usage errors propagate to the caller, and float
overflow surfaces as EvaluationError.
"""
import logging
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from config import Settings, load_settings
from errors import EvaluationError, InvariantError, NoMap, NoSolution, ScenarioError, WorkbenchError
from exprs import Y, coordinates
from geometry import (build_metric, check_bianchi, check_closed_form, check_pair_symmetries,
                      is_at_most_quadratic, is_symmetric_space, weyl_report)
from invariants import PsiProfile, alpha, classify, verify_alpha_as_curvature
from models import (affine_dim, affine_model, extract_model, normalize_to_standard, standard_model,
                    verify_isomorphism)
from scenario import Family, Report, ScenarioConfig, TaskResult, TaskSpec
from stabilizer import (check_bracket_closure, construct_orbit_map, expected_affine_stabilizer_dim,
                        expected_model_stabilizer_dim, jacobi_form, manifold_isometry_dims, okp_dim,
                        okp_formula, orbit_dichotomy_sweep, orbit_tangent_dim, s_functional,
                        stabilizer_dim)

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


# ----------------------------------------------------------------------
# Parameters
# ----------------------------------------------------------------------
def _int_param(task: TaskSpec, name: str, default: Optional[int] = None) -> int:
    raw = task.params.get(name)
    if raw is None:
        if default is None:
            raise ScenarioError(f"task {task.name} needs {name}=<integer>")
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ScenarioError(f"task {task.name}: {name} must be an integer, got {raw!r}") from e


def _int_list(task: TaskSpec, name: str, default: List[int]) -> List[int]:
    raw = task.params.get(name)
    if raw is None:
        return default
    try:
        return [int(piece) for piece in raw.split(",") if piece]
    except ValueError as e:
        raise ScenarioError(f"task {task.name}: {name} must be a comma-separated integer list") from e


def _flag(task: TaskSpec, name: str) -> bool:
    raw = task.params.get(name, "false").lower()
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ScenarioError(f"task {task.name}: {name} must be true or false, got {raw!r}")


def _order(config: ScenarioConfig, task: TaskSpec) -> int:
    default = config.k
    if default is None and config.family is Family.NPSI:
        default = config.p + 2
    return _int_param(task, "k", default)


def _xi(config: ScenarioConfig, task: TaskSpec) -> List[Fraction]:
    """The vector given by ``xi.<coord>=<rational>`` parameters, on the affine span."""
    n = affine_dim(config.p)
    names = [c.name for c in coordinates(config.p)[:n]]
    xi = [Fraction(0)] * n
    for key, raw in task.params.items():
        if not key.startswith("xi."):
            continue
        name = key[len("xi."):]
        if name not in names:
            raise ScenarioError(f"task {task.name}: {name} is not an affine coordinate for p={config.p}")
        try:
            xi[names.index(name)] = Fraction(raw)
        except (ValueError, ZeroDivisionError) as e:
            raise ScenarioError(f"task {task.name}: bad value {raw!r} for {name}") from e
    return xi


def _profile(config: ScenarioConfig) -> PsiProfile:
    return PsiProfile(config.p, config.profile())


def _status(passed: bool) -> str:
    return "ok" if passed else "fail"


# ----------------------------------------------------------------------
# Tasks
# ----------------------------------------------------------------------
def _curvature(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    order = _int_param(task, "order", 0)
    F = config.metric_function()
    g = build_metric(config.p, F)
    tower = g.tower(order)
    top = tower[order]
    at = {top.label(index): value for index, value in top.evaluate(config.evaluation_point()).items() if value != 0}
    values = {"F": F.to_text(), "order": order, "components": [len(t) for t in tower], "at": at}
    residuals = {}
    passed = True
    if _flag(task, "check-closed-form"):
        report = check_closed_form(config.p, F, order)
        values["closed_form"] = [row.model_dump() for row in report.rows]
        passed = report.passed
    if _flag(task, "identities"):
        failures = [check_pair_symmetries(g), check_bianchi(g)]
        residuals["identities"] = [failure for failure in failures if failure]
        passed = passed and not residuals["identities"]
    return TaskResult(task=task.name, status=_status(passed), values=values, residuals=residuals)


def _weyl(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    report = weyl_report(build_metric(config.p, config.metric_function()))
    values = {row.name: row.value for row in report.rows}
    return TaskResult(task=task.name, status=_status(report.passed), values=values)


def _symmetric(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    F = config.metric_function()
    symmetric = is_symmetric_space(config.p, F)
    quadratic = is_at_most_quadratic(F)
    return TaskResult(task=task.name, status=_status(symmetric == quadratic),
                      values={"symmetric": symmetric, "at_most_quadratic": quadratic})


def _model(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    g = build_metric(config.p, config.metric_function())
    m = extract_model(g, config.evaluation_point(), k)
    values = {"k": k, "dim": m.dim, "exact": m.exact, "components": [len(t) for t in m.tensors]}
    return TaskResult(task=task.name, values=values)


def _normalize(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    g = build_metric(config.p, config.metric_function())
    m = extract_model(g, config.evaluation_point(), k)
    phi, report = normalize_to_standard(m, config.p, k, settings.tolerance)
    values = {"k": k, "exact": report.exact, "a": report.a, "s": report.s}
    if _flag(task, "matrix"):
        values["matrix"] = phi.matrix
    return TaskResult(task=task.name, values=values, residuals={"isomorphism": report.residual})


def _stabdim(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    if _flag(task, "affine"):
        result = stabilizer_dim(affine_model(config.p, k))
        expected = expected_affine_stabilizer_dim(config.p, k)
    else:
        result = stabilizer_dim(standard_model(config.p, k))
        expected = expected_model_stabilizer_dim(config.p, k)
    values = {"dim": result.dim, "expected": expected, "constraint_rank": result.constraint_rank}
    passed = result.dim == expected
    if _flag(task, "brackets"):
        values["brackets_closed"] = check_bracket_closure(result)
        passed = passed and values["brackets_closed"]
    return TaskResult(task=task.name, status=_status(passed), values=values)


def _isometry_dims(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    table = manifold_isometry_dims(config.p)
    return TaskResult(task=task.name, status=_status(table.passed),
                      values={"p": config.p, "rows": [row.model_dump() for row in table.rows]})


def _alpha(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    profile = _profile(config)
    point = config.evaluation_point()
    values, residuals = {}, {}
    passed = True
    for nu in _int_list(task, "nu", [2]):
        values[f"alpha_{nu}"] = alpha(profile, nu).at(point[Y])
        if _flag(task, "skip-curvature"):
            continue
        check = verify_alpha_as_curvature(profile, nu, point, settings, allow_excluded=_flag(task, "allow-excluded"))
        values[f"curvature_{nu}"] = check.observed
        residuals[f"alpha_{nu}"] = check.relative_error
        passed = passed and check.passed
    return TaskResult(task=task.name, status=_status(passed), values=values, residuals=residuals)


def _classify_psi(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    classification = classify(_profile(config), settings)
    return TaskResult(task=task.name, values=classification.model_dump(mode="json"))


def _orbit_map(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    g = construct_orbit_map(config.p, k, _xi(config, task), _flag(task, "double-isotropy"), settings.tolerance)
    am = affine_model(config.p, k)
    check = verify_isomorphism(g, am, am, settings.tolerance)
    return TaskResult(task=task.name, values={"k": k, "matrix": g.matrix}, residuals={"isomorphism": check.residual})


def _okp(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    formula = okp_formula(config.p, k)
    try:
        dim = okp_dim(config.p, k)
    except InvariantError as e:
        return TaskResult(task=task.name, status="fail", values={"formula": formula, "reason": str(e)})
    values = {"dim": dim, "formula": formula, "orbit_tangent": orbit_tangent_dim(config.p, k)}
    return TaskResult(task=task.name, values=values)


def _orbit_sweep(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    rng = np.random.default_rng(settings.seed)
    sweep = orbit_dichotomy_sweep(config.p, k, rng, _int_param(task, "samples", 100), settings.tolerance)
    values = sweep.model_dump()
    values["seed"] = settings.seed
    return TaskResult(task=task.name, status=_status(sweep.passed), values=values)


def _jacobi(config: ScenarioConfig, task: TaskSpec, settings: Settings) -> TaskResult:
    k = _order(config, task)
    am = affine_model(config.p, k)
    xi = _xi(config, task)
    form = jacobi_form(am, xi)
    values = {"rank": form.rank, "signature": list(form.signature), "x_component": xi[0]}
    if k >= 1:
        values["s"] = s_functional(am, xi)
    return TaskResult(task=task.name, status=_status((form.rank >= 2) == (xi[0] != 0)), values=values)


_HANDLERS: Dict[str, Callable[[ScenarioConfig, TaskSpec, Settings], TaskResult]] = {
    "curvature": _curvature,
    "weyl": _weyl,
    "symmetric": _symmetric,
    "model": _model,
    "normalize": _normalize,
    "stabdim": _stabdim,
    "isometry-dims": _isometry_dims,
    "alpha": _alpha,
    "classify-psi": _classify_psi,
    "orbit-map": _orbit_map,
    "orbit-sweep": _orbit_sweep,
    "okp": _okp,
    "jacobi": _jacobi,
}


def run_task(config: ScenarioConfig, task: TaskSpec, settings: Optional[Settings] = None) -> TaskResult:
    """Run one task; usage errors (bad parameters, out-of-range k) propagate."""
    settings = settings or load_settings()
    logger.info("Task %d: %s (p=%d)", task.index, task.name, config.p)
    try:
        return _HANDLERS[task.name](config, task, settings)
    except NoMap as e:
        return TaskResult(task=task.name, status="no-map", values={"reason": str(e)})
    except NoSolution as e:
        return TaskResult(task=task.name, status="fail", values={"reason": str(e)})
    except ArithmeticError as e:
        raise EvaluationError(f"task {task.name} left the float range: {e}") from e


def run_scenario(config: ScenarioConfig, settings: Optional[Settings] = None) -> Report:
    """Run every task in index order; a failing task is reported with status "error"."""
    settings = settings or load_settings()
    report = Report(scenario=config.name)
    for task in sorted(config.tasks, key=lambda t: t.index):
        try:
            result = run_task(config, task, settings)
        except WorkbenchError as e:
            logger.error("Task %d (%s) failed: %s", task.index, task.name, e)
            result = TaskResult(task=task.name, status="error", values={"error": str(e)})
        report.results.append(result)
    return report
