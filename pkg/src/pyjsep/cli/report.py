"""Report records and plot-ready series."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from monty.json import MSONable, jsanitize
from monty.serialization import dumpfn, loadfn

from pyjsep.errors import NoSeries

__all__ = ["AnalysisResult", "ReportRecord", "Series", "emit_series", "to_payload"]


def to_payload(obj: Any) -> Any:
    """Convert results into plain JSON data.

    MSONable objects lose their ``@`` bookkeeping keys, complex numbers become
    ``[re, im]`` pairs and everything else goes through :func:`jsanitize`.

    """
    if isinstance(obj, MSONable):
        obj = {k: v for k, v in obj.as_dict().items() if not k.startswith("@")}
    if isinstance(obj, dict):
        return {str(k): to_payload(v) for k, v in obj.items() if not str(k).startswith("@")}
    if isinstance(obj, (list, tuple)):
        return [to_payload(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_payload(np.stack([obj.real, obj.imag], axis=-1))
        return jsanitize(obj, strict=True)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, Enum):
        return obj.value
    return jsanitize(obj, strict=True)


@dataclass
class Series(MSONable):
    """Columnar time series attached to an analysis.

    Attributes
    ----------
    columns: list[str]
        Column names, time first.
    units: list[str]
        Unit of each column.
    rows: list[list[float]]
        One row per sample time, ascending.

    """

    columns: list
    units: list
    rows: list

    def __post_init__(self):
        """Check that units and row widths match the columns."""
        if len(self.columns) != len(self.units):
            raise ValueError("Every column needs a unit")
        if any(len(row) != len(self.columns) for row in self.rows):
            raise ValueError("Row width does not match the columns")

    @classmethod
    def from_arrays(cls, columns: list[tuple[str, str]], times: Any, *values: Any) -> Series:
        """Build from a time vector and value arrays (1D, or 2D with one column per series)."""
        parts = [np.asarray(times, dtype=float).reshape(-1, 1)]
        for value in values:
            arr = np.asarray(value, dtype=float)
            parts.append(arr.reshape(len(parts[0]), -1))
        table = np.hstack(parts)
        return cls(
            columns=[name for name, _ in columns],
            units=[unit for _, unit in columns],
            rows=table.tolist(),
        )

    def to_text(self) -> str:
        """Tab-separated text with a header row of ``name [unit]`` labels."""
        buf = io.StringIO()
        header = "\t".join(f"{c} [{u}]" for c, u in zip(self.columns, self.units))
        np.savetxt(buf, np.asarray(self.rows, dtype=float).reshape(-1, len(self.columns)),
                   fmt="%.12g", delimiter="\t", header=header, comments="")
        return buf.getvalue()


@dataclass
class AnalysisResult(MSONable):
    """Outcome of one analysis of a scenario.

    Attributes
    ----------
    analysis_id: str
        Identifier from the scenario.
    kind: str
        Analysis kind.
    status: str
        ``"ok"``, or ``"error"`` when the analysis (or one of its elements)
        raised. A failing verdict is still ``"ok"``.
    verdict: str | None
        Verdict of the analysis.
    payload: dict
        Numeric results as plain JSON data.
    series: Series | None
        Time series for plotting.
    error: str | None
        Error message when ``status`` is ``"error"``.
    warnings: list[str]
        Integrity warnings raised while running.

    """

    analysis_id: str
    kind: str
    status: str = "ok"
    verdict: str | None = None
    payload: dict = field(default_factory=dict)
    series: Series | None = None
    error: str | None = None
    warnings: list = field(default_factory=list)

    @property
    def errored(self) -> bool:
        """True when the analysis raised."""
        return self.status == "error"


@dataclass
class ReportRecord(MSONable):
    """Everything one scenario run produced.

    Attributes
    ----------
    scenario: str
        Scenario name.
    analyses: list[AnalysisResult]
        Results in execution order.
    provenance: dict
        Tool version, tolerances, seed, model, units and wall time.

    """

    scenario: str
    analyses: list
    provenance: dict = field(default_factory=dict)

    @property
    def errored(self) -> bool:
        """True when any analysis raised."""
        return any(a.errored for a in self.analyses)

    def result(self, analysis_id: str) -> AnalysisResult:
        """Return the result of the analysis with the given identifier."""
        for a in self.analyses:
            if a.analysis_id == analysis_id:
                return a
        raise KeyError(f"No analysis {analysis_id!r} in {self.scenario!r}")

    def payload(self) -> dict:
        """The serialized record without the wall time."""
        d = to_payload(self)
        d["provenance"].pop("wall_time", None)
        return d

    def summary(self) -> list[str]:
        """One line per analysis."""
        lines = []
        for a in self.analyses:
            outcome = f"ERROR {a.error}" if a.errored else (a.verdict or "done")
            lines.append(f"{self.scenario}: {a.analysis_id} ({a.kind}) {outcome}")
        return lines

    def to_file(self, path: str | Path):
        """Write the record as indented JSON with sorted keys."""
        dumpfn(self, str(path), indent=2, sort_keys=True)

    @classmethod
    def from_file(cls, path: str | Path) -> ReportRecord:
        """Read a record written by :meth:`to_file`."""
        record = loadfn(str(path))
        if isinstance(record, dict):
            record = cls.from_dict(record)
        return record


def emit_series(record: ReportRecord, analysis_id: str) -> str:
    """Columnar text of an analysis series.

    Parameters
    ----------
    record:
        A report record
    analysis_id:
        Identifier of the analysis

    Returns
    -------
    str:
        Header row naming columns and units, then one tab-separated row per
        sample in time order

    Raises
    ------
    NoSeries:
        When the analysis produced no series

    """
    result = record.result(analysis_id)
    if result.series is None:
        raise NoSeries(f"Analysis {analysis_id!r} ({result.kind}) has no time series")
    return result.series.to_text()
