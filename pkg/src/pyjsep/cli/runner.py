"""Execution of scenario analyses."""

from __future__ import annotations

import logging
import time
import warnings
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable

import numpy as np

from pyjsep import __version__
from pyjsep.cli.report import AnalysisResult, ReportRecord, Series, to_payload
from pyjsep.cli.scenario import Scenario, load_scenario
from pyjsep.cone_field import check_separation_along_orbit
from pyjsep.errors import IntegrityWarning, JSepError, NotSeparated
from pyjsep.flow_engine import Section, find_equilibria, find_periodic_orbit, lyapunov_exponents
from pyjsep.jsep_analysis import (
    MonotonicityLevel,
    check_separation,
    composition_bounds,
    kuhne_bounds,
    monotonicity_from_spectrum,
    polar_decompose,
    reversed_separation,
    sigma_d,
)
from pyjsep.pseudo_metric import as_form
from pyjsep.verifiers import (
    homogeneity_report,
    star_certificate,
    verify_dominated_splitting,
    verify_hyperbolic_orbit,
    verify_partial_hyperbolicity,
    verify_volume_expansion,
    wojtkowski_bounds_check,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from pyjsep.cone_field import QuadraticFormField
    from pyjsep.models import VectorFieldModel

__all__ = ["ANALYSES", "run_scenario"]

logger = logging.getLogger(__name__)

# Failures recorded against a single analysis; anything else is a bug and propagates.
RECOVERABLE = (JSepError, ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError)

UNITS = {"time": "model time", "rate": "1/time", "log": "dimensionless"}

Outcome = tuple[Any, dict, "Series | None"]


class _Context:
    """Model, form field and tolerances shared by the analyses of a run."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.model: VectorFieldModel = scenario.build_model()
        self.tol = scenario.tolerances
        self.seed = scenario.seed
        self._field: QuadraticFormField | None = None

    @property
    def form_field(self) -> QuadraticFormField:
        if self._field is None:
            self._field = self.scenario.build_form_field(self.model)
        return self._field

    def locate(self, spec: Mapping[str, Any]) -> tuple[list, list, list[str]]:
        """Equilibria from ``seeds`` and orbits from ``orbits``; failures are collected."""
        errors = []
        equilibria: list = []
        if spec.get("seeds"):
            equilibria, failures = find_equilibria(
                self.model,
                spec["seeds"],
                tol=self.tol.newton,
                dedup_radius=self.tol.dedup_radius,
                spectral_tol=self.tol.spectral,
                return_failures=True,
            )
            errors += [_seed_failure(seed, residual) for seed, residual in failures]
        orbits = []
        for j, orbit_spec in enumerate(spec.get("orbits", [])):
            try:
                orbits.append(_shoot(self, orbit_spec))
            except RECOVERABLE as exc:
                logger.warning("Orbit %d not located: %s", j, exc)
                errors.append(f"orbit[{j}]: {type(exc).__name__}: {exc}")
        return equilibria, orbits, errors


def _shoot(ctx: _Context, spec: Mapping[str, Any], **kwargs):
    section = Section(**spec["section"])
    return find_periodic_orbit(
        ctx.model,
        section,
        spec["guess_point"],
        spec["guess_period"],
        tol=ctx.tol.newton,
        trivial_window=ctx.tol.trivial_window,
        **kwargs,
    )


def _seed_failure(seed, residual: float) -> str:
    return f"seed {np.asarray(seed).tolist()}: Newton residual {residual:.3e}"


def _equilibrium_payload(eq) -> dict:
    return {
        "point": eq.point,
        "eigenvalues": eq.eigenvalues,
        "index": eq.index,
        "hyperbolic": eq.hyperbolic,
        "residual": eq.residual,
    }


def _orbit_payload(orbit) -> dict:
    return {
        "anchor": orbit.anchor,
        "period": orbit.period,
        "multipliers": orbit.multipliers,
        "index": orbit.index,
        "hyperbolic": orbit.hyperbolic,
        "residual": orbit.residual,
        "suspect": orbit.suspect,
    }


def _operator_check(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    form = as_form(spec.get("form") or ctx.scenario.form_matrix)
    operator = np.asarray(spec["operator"], dtype=float)
    tol = ctx.tol.separation
    verdict = check_separation(form, operator, tol=tol, seed=ctx.seed)
    backward = reversed_separation(form, operator, tol=tol, seed=ctx.seed)
    payload: dict[str, Any] = {
        "index": form.index_q,
        "separation": verdict,
        "reversed_separation": backward.level,
        "monotonicity": MonotonicityLevel.NOT_MONOTONE,
    }
    if verdict.is_separated:
        try:
            polar = polar_decompose(form, operator, tol=tol)
        except NotSeparated as exc:
            payload["polar"] = None
            payload["polar_error"] = str(exc)
        else:
            payload["polar"] = {
                "r_minus": polar.r_minus,
                "r_plus": polar.r_plus,
                "r_lower": polar.r_lower,
                "r_upper": polar.r_upper,
                "residuals": polar.residuals,
            }
            payload["monotonicity"] = monotonicity_from_spectrum(
                polar.r_lower, polar.r_upper, ctx.tol.monotone
            )
            if "d" in spec:
                payload["sigma_d"] = sigma_d(form, operator, spec["d"])
    if "bilinear" in spec:
        payload["kuhne"] = kuhne_bounds(form, spec["bilinear"], tol=tol, seed=ctx.seed)
    if "second" in spec:
        report = composition_bounds(form, operator, spec["second"])
        payload["composition"] = {**to_payload(report), "holds": report.holds()}
    return verdict.level, payload, None


def _equilibria(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    equilibria, failures = find_equilibria(
        ctx.model,
        spec["seeds"],
        tol=ctx.tol.newton,
        dedup_radius=ctx.tol.dedup_radius,
        damping=spec.get("damping", 1.0),
        max_iter=spec.get("max_iter", 50),
        spectral_tol=ctx.tol.spectral,
        return_failures=True,
    )
    payload = {
        "equilibria": [_equilibrium_payload(eq) for eq in equilibria],
        "element_errors": [_seed_failure(seed, residual) for seed, residual in failures],
    }
    verdict = "hyperbolic" if all(eq.hyperbolic for eq in equilibria) else "nonhyperbolic"
    return verdict, payload, None


def _periodic_orbit(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    orbit = _shoot(ctx, spec, max_iter=spec.get("max_iter", 40))
    report = verify_hyperbolic_orbit(orbit)
    payload = {**_orbit_payload(orbit), "rate": report.rate, "constant": report.constant}
    return report.verdict, payload, None


def _orbit_check(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    report = check_separation_along_orbit(
        ctx.form_field,
        ctx.model,
        spec["x0"],
        spec["T"],
        times=spec.get("times"),
        density=spec.get("density", 8.0),
        tol=ctx.tol.separation,
        seed=ctx.seed,
        **ctx.tol.integrator,
    )
    payload = {
        "times": report.times,
        "margins": report.margins,
        "levels": [v.level for v in report.verdicts],
        "witness_interval": report.witness_interval,
        "witness": report.witness,
        "reversal_consistent": report.reversal_consistent,
        "grid_converged": report.grid_converged,
    }
    series = None
    if len(report.verdicts):
        series = Series.from_arrays(
            [("t", UNITS["time"]), ("margin", UNITS["log"])], report.times[1:], report.margins
        )
    return report.level, payload, series


def _star_check(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    equilibria, orbits, errors = ctx.locate(spec)
    cert = star_certificate(
        ctx.model, equilibria, orbits, forms=spec.get("forms"), seed=ctx.seed
    )
    payload = {
        "equilibria": [_equilibrium_payload(eq) for eq in equilibria],
        "orbits": [_orbit_payload(orbit) for orbit in orbits],
        "elements": cert.elements,
        "element_errors": errors,
    }
    return cert.verdict, payload, None


def _lyapunov(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    spectrum = lyapunov_exponents(
        ctx.model,
        spec["x0"],
        spec["T"],
        k=spec.get("k"),
        seed=ctx.seed,
        qr_interval=spec.get("qr_interval", 0.5),
        transient=spec.get("transient", 0.0),
        tolerance=spec.get("tolerance", 0.01),
        **ctx.tol.integrator,
    )
    payload = {
        "exponents": spectrum.exponents,
        "sum": float(np.sum(spectrum.exponents)),
        "drift": spectrum.drift,
        "converged": spectrum.converged,
    }
    k = len(spectrum.exponents)
    columns = [("t", UNITS["time"])] + [(f"chi_{i + 1}", UNITS["rate"]) for i in range(k)]
    series = Series.from_arrays(columns, spectrum.times, spectrum.running)
    verdict = "converged" if spectrum.converged else "not_converged"
    return verdict, payload, series


def _bounds_check(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    report = wojtkowski_bounds_check(
        ctx.form_field,
        ctx.model,
        spec["x0"],
        spec["T"],
        spec["k1"],
        spec["k2"],
        dt=spec.get("dt", 0.1),
        seed=ctx.seed,
        **ctx.tol.integrator,
    )
    holds = report.holds
    verdict = "not_converged" if holds is None else ("holds" if holds else "violated")
    return verdict, to_payload(report), None


def _domination(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    report = verify_dominated_splitting(
        ctx.model,
        spec["x0"],
        spec["T"],
        np.asarray(spec["E"], dtype=float).T,
        np.asarray(spec["F"], dtype=float).T,
        n_samples=spec.get("n_samples", 41),
        refine_time=spec.get("refine_time", 0.0),
        **ctx.tol.integrator,
    )
    payload = to_payload(report)
    del payload["times"], payload["log_ratio"]
    series = Series.from_arrays(
        [("t", UNITS["time"]), ("log_ratio", UNITS["log"])], report.times, report.log_ratio
    )
    return report.verdict, payload, series


def _volume_expansion(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    report = verify_volume_expansion(
        ctx.model,
        spec["x0"],
        spec["T"],
        np.asarray(spec["F"], dtype=float).T,
        p=spec.get("p"),
        n_samples=spec.get("n_samples", 41),
        **ctx.tol.integrator,
    )
    payload = to_payload(report)
    del payload["times"], payload["log_volume"]
    series = Series.from_arrays(
        [("t", UNITS["time"]), ("log_volume", UNITS["log"])], report.times, report.log_volume
    )
    return report.verdict, payload, series


def _partial_hyperbolicity(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    report = verify_partial_hyperbolicity(
        ctx.form_field,
        ctx.model,
        [(s["x0"], s["T"]) for s in spec["segments"]],
        density=spec.get("density", 8.0),
        tol=ctx.tol.separation,
        seed=ctx.seed,
    )
    payload = {
        "stable_dimension": report.stable_dimension,
        "direction": report.direction.classification,
        "direction_minimum": report.direction.minimum,
        "n_singular": report.direction.n_singular,
        "segments": [
            {"level": r.level, "witness_interval": r.witness_interval} for r in report.segments
        ],
    }
    return report.verdict, payload, None


def _homogeneity(ctx: _Context, spec: Mapping[str, Any]) -> Outcome:
    equilibria, orbits, errors = ctx.locate(spec)
    report = homogeneity_report(
        ctx.model, equilibria, orbits, declared_index=spec.get("declared_index")
    )
    payload = {**to_payload(report), "element_errors": errors}
    verdict = "homogeneous" if report.consistent else "not_homogeneous"
    return verdict, payload, None


ANALYSES: dict[str, Callable[[_Context, Mapping[str, Any]], Outcome]] = {
    "operator-check": _operator_check,
    "equilibria": _equilibria,
    "periodic-orbit": _periodic_orbit,
    "orbit-check": _orbit_check,
    "star-check": _star_check,
    "lyapunov": _lyapunov,
    "bounds-check": _bounds_check,
    "domination": _domination,
    "volume-expansion": _volume_expansion,
    "partial-hyperbolicity": _partial_hyperbolicity,
    "homogeneity": _homogeneity,
}


def _integrity_messages(caught: list) -> list[str]:
    return [str(w.message) for w in caught if issubclass(w.category, IntegrityWarning)]


def _run_one(ctx: _Context, spec: Mapping[str, Any]) -> AnalysisResult:
    analysis_id, kind = spec["id"], spec["kind"]
    logger.info("%s: running %s (%s)", ctx.scenario.name, analysis_id, kind)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrityWarning)
        try:
            verdict, payload, series = ANALYSES[kind](ctx, spec)
        except RECOVERABLE as exc:
            logger.warning("%s: %s failed: %s", ctx.scenario.name, analysis_id, exc)
            return AnalysisResult(
                analysis_id=analysis_id,
                kind=kind,
                status="error",
                error=f"{type(exc).__name__}: {exc}",
                warnings=_integrity_messages(caught),
            )
    payload = to_payload(payload)
    status = "error" if payload.get("element_errors") else "ok"
    logger.info("%s: %s finished with %s", ctx.scenario.name, analysis_id, to_payload(verdict))
    return AnalysisResult(
        analysis_id=analysis_id,
        kind=kind,
        status=status,
        verdict=to_payload(verdict),
        payload=payload,
        series=series,
        error="; ".join(payload["element_errors"]) if status == "error" else None,
        warnings=_integrity_messages(caught),
    )


def run_scenario(
    source: str | Path | Scenario,
    seed: int | None = None,
    tol_overrides: Mapping[str, float] | None = None,
    kinds: Iterable[str] | None = None,
) -> ReportRecord:
    """Run the analyses of a scenario in order.

    An analysis that raises is recorded with status ``"error"`` and the run
    continues with the next one.

    Parameters
    ----------
    source:
        Scenario file or an already validated scenario
    seed:
        Overrides the scenario seed
    tol_overrides:
        Overrides scenario tolerances by name
    kinds:
        Only run analyses of these kinds

    Returns
    -------
    ReportRecord:
        Verdicts, payloads and provenance

    """
    scenario = source if isinstance(source, Scenario) else load_scenario(source)
    scenario = scenario.with_overrides(seed=seed, tolerances=tol_overrides)
    if kinds is not None:
        scenario = scenario.select(kinds)
    start = time.perf_counter()
    ctx = _Context(scenario)
    results = [_run_one(ctx, spec) for spec in scenario.analyses]
    provenance = {
        "version": __version__,
        "seed": scenario.seed,
        "tolerances": to_payload(scenario.tolerances),
        "model": {"family": scenario.model_family, "parameters": scenario.model_parameters},
        "form": scenario.form,
        "units": UNITS,
        "wall_time": time.perf_counter() - start,
    }
    return ReportRecord(scenario=scenario.name, analyses=results, provenance=provenance)
