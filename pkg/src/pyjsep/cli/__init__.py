"""Scenario-driven command-line front end."""

from pyjsep.cli.report import AnalysisResult, ReportRecord, emit_series
from pyjsep.cli.runner import run_scenario
from pyjsep.cli.scenario import Scenario, Tolerances, load_scenario

__all__ = [
    "AnalysisResult",
    "ReportRecord",
    "Scenario",
    "Tolerances",
    "emit_series",
    "load_scenario",
    "run_scenario",
]
