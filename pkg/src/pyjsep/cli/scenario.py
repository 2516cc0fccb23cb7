"""Scenario files: schema, validation and tolerances.

A scenario is a YAML document (JSON works too)::

    name: lorenz_star
    seed: 7
    model:
      family: lorenz
      parameters: {sigma: 10, rho: 28, beta: 2.6666666666666665}
    form:
      adapted: {point: [0, 0, 0]}
    tolerances:
      newton: 1.0e-10
    analyses:
      - kind: star-check
        seeds: [[0, 0, 0], [8, 8, 27], [-8, -8, 27]]

Every key is checked against a fixed schema before anything is computed;
unknown keys raise :class:`~pyjsep.errors.ConfigInvalid` with the dotted key
path and the line of the offending key.

"""

from __future__ import annotations

import difflib
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, NoReturn

import numpy as np
from monty.json import MSONable
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from pyjsep.cone_field import (
    ConstantFormField,
    CylindricalFormField,
    QuadraticFormField,
    adapted_form_search,
)
from pyjsep.errors import ConfigInvalid
from pyjsep.models import MODEL_FAMILIES, VectorFieldModel, model_from_spec

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

__all__ = [
    "ANALYSIS_KINDS",
    "FORM_FAMILIES",
    "Scenario",
    "Tolerances",
    "load_scenario",
    "parse_overrides",
]

logger = logging.getLogger(__name__)

FORM_FAMILIES: dict[str, type[QuadraticFormField]] = {"cylindrical": CylindricalFormField}

# Analyses that draw random samples and therefore need a seed.
STOCHASTIC_KINDS = frozenset(
    {
        "operator-check",
        "orbit-check",
        "star-check",
        "lyapunov",
        "bounds-check",
        "partial-hyperbolicity",
    }
)

# Analyses that read the scenario form field.
FORM_KINDS = frozenset({"orbit-check", "bounds-check", "partial-hyperbolicity"})


@dataclass(frozen=True)
class Tolerances(MSONable):
    """Numerical tolerances shared by every analysis of a scenario.

    Attributes
    ----------
    rtol, atol:
        Integrator tolerances.
    newton:
        Residual tolerance of Newton refinement and shooting.
    separation:
        Relative band of the separation oracle.
    monotone:
        Band around 1 of the monotonicity classification.
    dedup_radius:
        Distance below which two equilibria are merged.
    trivial_window:
        Distance from 1 within which a Floquet multiplier counts as trivial.
    spectral:
        Band around the imaginary axis for equilibrium hyperbolicity.

    """

    rtol: float = 1e-9
    atol: float = 1e-12
    newton: float = 1e-10
    separation: float = 1e-9
    monotone: float = 1e-9
    dedup_radius: float = 1e-6
    trivial_window: float = 1e-4
    spectral: float = 1e-8

    @property
    def integrator(self) -> dict[str, float]:
        """Keyword arguments for the integrating functions."""
        return {"rtol": self.rtol, "atol": self.atol}

    def updated(self, overrides: Mapping[str, Any], origin: str = "--tol-override") -> Tolerances:
        """Return a copy with some values replaced.

        Raises
        ------
        ConfigInvalid:
            For unknown names and non-positive values.

        """
        known = [f.name for f in fields(self)]
        values = {}
        for key, value in overrides.items():
            path = f"{origin}.{key}"
            if key not in known:
                raise ConfigInvalid(f"Unknown tolerance {key!r}{_suggest(key, known)}", field=path)
            try:
                number = float(value)
            except (TypeError, ValueError):
                raise ConfigInvalid(
                    f"Tolerance {key!r} must be a number, got {value!r}", field=path
                ) from None
            if not number > 0:
                raise ConfigInvalid(f"Tolerance {key!r} must be positive", field=path)
            values[key] = number
        return replace(self, **values)


def parse_overrides(items: Iterable[str]) -> dict[str, float]:
    """Parse ``key=value`` strings into a dictionary of floats."""
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigInvalid(f"Expected key=value, got {item!r}", field="--tol-override")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ConfigInvalid(
                f"Tolerance {key.strip()!r} must be a number, got {value!r}", field="--tol-override"
            ) from None
    return out


def _suggest(key: str, known: Iterable[str]) -> str:
    close = difflib.get_close_matches(str(key), list(known), n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


# -- schema --------------------------------------------------------------------


class _Reader:
    """Validates a loaded document and remembers where each key was."""

    def __init__(self):
        self.lines: dict[str, int] = {}

    def fail(self, message: str, path: str) -> NoReturn:
        raise ConfigInvalid(message, field=path, line=self.lines.get(path))

    def note(self, node: Any, key: Any, path: str, fallback: str):
        """Record the line of ``node[key]``; ruamel lines are zero-based."""
        try:
            if isinstance(node, list):
                self.lines[path] = node.lc.item(key)[0] + 1
            else:
                self.lines[path] = node.lc.key(key)[0] + 1
        except (AttributeError, KeyError, IndexError, TypeError):
            if fallback in self.lines:
                self.lines[path] = self.lines[fallback]


Check = Callable[[_Reader, Any, str], Any]


def _number(reader: _Reader, value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        reader.fail(f"Expected a number, got {value!r}", path)
    return float(value)


def _positive(reader: _Reader, value: Any, path: str) -> float:
    number = _number(reader, value, path)
    if not number > 0:
        reader.fail(f"Expected a positive number, got {value!r}", path)
    return number


def _nonnegative(reader: _Reader, value: Any, path: str) -> float:
    number = _number(reader, value, path)
    if number < 0:
        reader.fail(f"Expected a non-negative number, got {value!r}", path)
    return number


def _integer(reader: _Reader, value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        reader.fail(f"Expected an integer, got {value!r}", path)
    return int(value)


def _direction(reader: _Reader, value: Any, path: str) -> int:
    number = _integer(reader, value, path)
    if number not in (-1, 0, 1):
        reader.fail(f"Crossing direction must be -1, 0 or 1, got {number}", path)
    return number


def _string(reader: _Reader, value: Any, path: str) -> str:
    if not isinstance(value, str):
        reader.fail(f"Expected a string, got {value!r}", path)
    return str(value)


def _boolean(reader: _Reader, value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        reader.fail(f"Expected true or false, got {value!r}", path)
    return bool(value)


def _anything(reader: _Reader, value: Any, path: str) -> Any:
    if isinstance(value, dict):
        return {str(k): _anything(reader, v, f"{path}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_anything(reader, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, bool):
        return bool(value)
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        return float(value)
    if value is None:
        return None
    return str(value)


def _vector(reader: _Reader, value: Any, path: str) -> list[float]:
    if not isinstance(value, list) or not value:
        reader.fail(f"Expected a non-empty list of numbers, got {value!r}", path)
    return [_number(reader, v, f"{path}[{i}]") for i, v in enumerate(value)]


def _matrix(reader: _Reader, value: Any, path: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        reader.fail(f"Expected a non-empty list of rows, got {value!r}", path)
    rows = []
    for i, row in enumerate(value):
        reader.note(value, i, f"{path}[{i}]", path)
        rows.append(_vector(reader, row, f"{path}[{i}]"))
    if len({len(row) for row in rows}) != 1:
        reader.fail("Rows have different lengths", path)
    return rows


def _list_of(check: Check) -> Check:
    def read(reader: _Reader, value: Any, path: str) -> list:
        if not isinstance(value, list):
            reader.fail(f"Expected a list, got {value!r}", path)
        out = []
        for i, item in enumerate(value):
            reader.note(value, i, f"{path}[{i}]", path)
            out.append(check(reader, item, f"{path}[{i}]"))
        return out

    return read


def _free_mapping(check: Check) -> Check:
    def read(reader: _Reader, value: Any, path: str) -> dict:
        if not isinstance(value, dict):
            reader.fail(f"Expected a mapping, got {value!r}", path)
        out = {}
        for key, item in value.items():
            sub = f"{path}.{key}"
            reader.note(value, key, sub, path)
            out[str(key)] = check(reader, item, sub)
        return out

    return read


def _read_mapping(
    reader: _Reader, node: Any, schema: Mapping[str, tuple[Check, bool]], path: str
) -> dict:
    if not isinstance(node, dict):
        reader.fail(f"Expected a mapping, got {node!r}", path or "<root>")
    prefix = f"{path}." if path else ""
    for key in node:
        reader.note(node, key, f"{prefix}{key}", path)
        if key not in schema:
            reader.fail(f"Unknown key {key!r}{_suggest(key, schema)}", f"{prefix}{key}")
    out = {}
    for key, (check, required) in schema.items():
        if key not in node:
            if required:
                reader.fail(f"Missing required key {key!r}", f"{prefix}{key}")
            continue
        out[key] = check(reader, node[key], f"{prefix}{key}")
    return out


def _record(schema: Mapping[str, tuple[Check, bool]]) -> Check:
    def read(reader: _Reader, value: Any, path: str) -> dict:
        return _read_mapping(reader, value, schema, path)

    return read


_SECTION = _record(
    {
        "normal": (_vector, True),
        "offset": (_number, False),
        "direction": (_direction, False),
    }
)
_ORBIT = _record(
    {
        "section": (_SECTION, True),
        "guess_point": (_vector, True),
        "guess_period": (_positive, True),
    }
)
_SEGMENT = _record({"x0": (_vector, True), "T": (_positive, True)})

ANALYSIS_KINDS: dict[str, dict[str, tuple[Check, bool]]] = {
    "operator-check": {
        "operator": (_matrix, True),
        "form": (_matrix, False),
        "second": (_matrix, False),
        "bilinear": (_matrix, False),
        "d": (_integer, False),
    },
    "equilibria": {
        "seeds": (_matrix, True),
        "damping": (_positive, False),
        "max_iter": (_integer, False),
    },
    "periodic-orbit": {
        "section": (_SECTION, True),
        "guess_point": (_vector, True),
        "guess_period": (_positive, True),
        "max_iter": (_integer, False),
    },
    "orbit-check": {
        "x0": (_vector, True),
        "T": (_nonnegative, True),
        "density": (_positive, False),
        "times": (_vector, False),
    },
    "star-check": {
        "seeds": (_matrix, False),
        "orbits": (_list_of(_ORBIT), False),
        "forms": (_free_mapping(_matrix), False),
    },
    "lyapunov": {
        "x0": (_vector, True),
        "T": (_positive, True),
        "k": (_integer, False),
        "transient": (_nonnegative, False),
        "qr_interval": (_positive, False),
        "tolerance": (_positive, False),
    },
    "bounds-check": {
        "x0": (_vector, True),
        "T": (_positive, True),
        "k1": (_integer, True),
        "k2": (_integer, True),
        "dt": (_positive, False),
    },
    "domination": {
        "x0": (_vector, True),
        "T": (_positive, True),
        "E": (_matrix, True),
        "F": (_matrix, True),
        "n_samples": (_integer, False),
        "refine_time": (_nonnegative, False),
    },
    "volume-expansion": {
        "x0": (_vector, True),
        "T": (_positive, True),
        "F": (_matrix, True),
        "p": (_integer, False),
        "n_samples": (_integer, False),
    },
    "partial-hyperbolicity": {
        "segments": (_list_of(_SEGMENT), True),
        "density": (_positive, False),
    },
    "homogeneity": {
        "seeds": (_matrix, False),
        "orbits": (_list_of(_ORBIT), False),
        "declared_index": (_integer, False),
    },
}

_COMMON = {"kind": (_string, True), "id": (_string, False)}


def _analysis(reader: _Reader, value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        reader.fail(f"Expected a mapping, got {value!r}", path)
    if "kind" not in value:
        reader.fail("Missing required key 'kind'", f"{path}.kind")
    kind = value["kind"]
    reader.note(value, "kind", f"{path}.kind", path)
    if kind not in ANALYSIS_KINDS:
        reader.fail(
            f"Unknown analysis kind {kind!r}{_suggest(kind, ANALYSIS_KINDS)}", f"{path}.kind"
        )
    return _read_mapping(reader, value, {**_COMMON, **ANALYSIS_KINDS[kind]}, path)


_MODEL = _record({"family": (_string, True), "parameters": (_free_mapping(_anything), False)})
_FORM = _record(
    {
        "matrix": (_matrix, False),
        "family": (_string, False),
        "parameters": (_free_mapping(_anything), False),
        "adapted": (_record({"point": (_vector, True), "index": (_integer, False)}), False),
    }
)
_TOLERANCES = _record({f.name: (_positive, False) for f in fields(Tolerances)})
_OUTPUT = _record({"dir": (_string, False), "series": (_boolean, False)})

_TOP = {
    "name": (_string, False),
    "seed": (_integer, False),
    "model": (_MODEL, True),
    "form": (_FORM, False),
    "tolerances": (_TOLERANCES, False),
    "analyses": (_list_of(_analysis), True),
    "output": (_OUTPUT, False),
}


# -- scenario ------------------------------------------------------------------


@dataclass
class Scenario(MSONable):
    """A validated scenario.

    Attributes
    ----------
    name: str
        Identifier used for report file names.
    model_family: str
        Builtin model family.
    model_parameters: dict
        Model constructor arguments.
    analyses: list[dict]
        Analysis specifications in execution order, each with ``kind`` and ``id``.
    seed: int | None
        Seed of every random sampler; mandatory for sampling analyses.
    form: dict | None
        Form-field specification: one of ``matrix``, ``family`` (with
        ``parameters``) or ``adapted`` (``point`` and optional ``index``).
    tolerances: Tolerances
        Numerical tolerances.
    output: dict
        Output options (``dir``, ``series``).

    """

    name: str
    model_family: str
    model_parameters: dict
    analyses: list
    seed: int | None = None
    form: dict | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> Scenario:
        """Load and validate a scenario file."""
        return load_scenario(path)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], name: str = "scenario") -> Scenario:
        """Validate an already loaded document."""
        return _build(_Reader(), data, name)

    def build_model(self) -> VectorFieldModel:
        """Instantiate the model."""
        return model_from_spec(self.model_family, self.model_parameters)

    @property
    def form_matrix(self) -> list | None:
        """The constant form matrix, when the form is given as one."""
        return None if self.form is None else self.form.get("matrix")

    def build_form_field(self, model: VectorFieldModel) -> QuadraticFormField:
        """Instantiate the form field.

        An ``adapted`` request searches for a constant form adapted to the
        linearization at ``point``; its index defaults to the number of
        eigenvalues with negative real part there.

        """
        if self.form is None:
            raise ConfigInvalid("The scenario declares no form", field="form")
        if "matrix" in self.form:
            return ConstantFormField(self.form["matrix"])
        if "family" in self.form:
            return FORM_FAMILIES[self.form["family"]](**self.form.get("parameters", {}))
        request = self.form["adapted"]
        operator = model.jacobian(np.asarray(request["point"], dtype=float))
        index = request.get("index")
        if index is None:
            index = int(np.sum(np.linalg.eigvals(operator).real < 0))
        logger.debug("Searching an adapted form of index %d at %s", index, request["point"])
        return ConstantFormField(adapted_form_search(operator, index))

    def with_overrides(
        self, seed: int | None = None, tolerances: Mapping[str, float] | None = None
    ) -> Scenario:
        """Apply command-line overrides."""
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if tolerances:
            out = replace(out, tolerances=out.tolerances.updated(tolerances))
        return out

    def select(self, kinds: Iterable[str]) -> Scenario:
        """Keep only the analyses of the given kinds."""
        wanted = set(kinds)
        return replace(self, analyses=[a for a in self.analyses if a["kind"] in wanted])


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file.

    Parameters
    ----------
    path:
        YAML or JSON scenario file

    Returns
    -------
    Scenario:
        The validated scenario; its name defaults to the file stem

    Raises
    ------
    ConfigInvalid:
        When the file does not parse or does not match the schema

    """
    path = Path(path)
    yaml = YAML(typ="rt")
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.load(fh)
    except YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = None if mark is None else mark.line + 1
        raise ConfigInvalid(f"{path} does not parse: {exc}", line=line) from exc
    if data is None:
        raise ConfigInvalid(f"{path} is empty")
    logger.debug("Loaded scenario file %s", path)
    return _build(_Reader(), data, path.stem.removesuffix(".scenario"))


def _build(reader: _Reader, data: Any, default_name: str) -> Scenario:
    doc = _read_mapping(reader, data, _TOP, "")
    model = doc["model"]
    family = model["family"]
    if family not in MODEL_FAMILIES:
        reader.fail(
            f"Unknown model family {family!r}{_suggest(family, MODEL_FAMILIES)}", "model.family"
        )
    try:
        built = model_from_spec(family, model.get("parameters"))
    except ValueError as exc:
        reader.fail(str(exc), "model.parameters")
    dim = built.dim

    form = doc.get("form")
    if form is not None:
        _check_form(reader, form, dim)

    analyses = doc["analyses"]
    seen: set[str] = set()
    counts: dict[str, int] = {}
    for a in analyses:
        counts[a["kind"]] = counts.get(a["kind"], 0) + 1
    for i, a in enumerate(analyses):
        path = f"analyses[{i}]"
        if "id" not in a:
            a["id"] = a["kind"] if counts[a["kind"]] == 1 else f"{a['kind']}-{i}"
        if a["id"] in seen:
            reader.fail(f"Duplicate analysis id {a['id']!r}", f"{path}.id")
        seen.add(a["id"])
        _check_analysis(reader, a, path, dim, form)

    seed = doc.get("seed")
    if seed is None:
        stochastic = sorted({a["kind"] for a in analyses} & STOCHASTIC_KINDS)
        if stochastic:
            reader.fail(f"A seed is mandatory for {', '.join(stochastic)}", "seed")

    tolerances = Tolerances().updated(doc.get("tolerances", {}), origin="tolerances")
    return Scenario(
        name=doc.get("name", default_name),
        model_family=family,
        model_parameters=model.get("parameters", {}),
        analyses=analyses,
        seed=seed,
        form=form,
        tolerances=tolerances,
        output=doc.get("output", {}),
    )


def _check_form(reader: _Reader, form: dict, dim: int):
    given = [key for key in ("matrix", "family", "adapted") if key in form]
    if len(given) != 1:
        reader.fail("Give exactly one of 'matrix', 'family' or 'adapted'", "form")
    if "parameters" in form and "family" not in form:
        reader.fail("'parameters' only applies to a named family", "form.parameters")
    if "family" in form and form["family"] not in FORM_FAMILIES:
        reader.fail(
            f"Unknown form family {form['family']!r}{_suggest(form['family'], FORM_FAMILIES)}",
            "form.family",
        )
    if "matrix" in form:
        _check_square(reader, form["matrix"], "form.matrix", dim)
    if "adapted" in form:
        _check_length(reader, form["adapted"]["point"], "form.adapted.point", dim)


def _check_length(reader: _Reader, vector: list, path: str, dim: int):
    if len(vector) != dim:
        reader.fail(f"Expected {dim} entries, got {len(vector)}", path)


def _check_square(reader: _Reader, matrix: list, path: str, dim: int):
    if len(matrix) != dim or len(matrix[0]) != dim:
        reader.fail(f"Expected a {dim}x{dim} matrix", path)


def _check_analysis(reader: _Reader, a: dict, path: str, dim: int, form: dict | None):
    kind = a["kind"]
    for key in ("x0", "guess_point"):
        if key in a:
            _check_length(reader, a[key], f"{path}.{key}", dim)
    for key in ("seeds", "E", "F"):
        for j, row in enumerate(a.get(key, [])):
            _check_length(reader, row, f"{path}.{key}[{j}]", dim)
    if "section" in a:
        _check_length(reader, a["section"]["normal"], f"{path}.section.normal", dim)
    for j, orbit in enumerate(a.get("orbits", [])):
        _check_length(reader, orbit["guess_point"], f"{path}.orbits[{j}].guess_point", dim)
        _check_length(reader, orbit["section"]["normal"], f"{path}.orbits[{j}].section.normal", dim)
    for j, segment in enumerate(a.get("segments", [])):
        _check_length(reader, segment["x0"], f"{path}.segments[{j}].x0", dim)
    for key, matrix in a.get("forms", {}).items():
        _check_square(reader, matrix, f"{path}.forms.{key}", dim)
    if kind in FORM_KINDS and form is None:
        reader.fail(f"Analysis {kind!r} needs a scenario 'form'", f"{path}.kind")
    if kind == "operator-check" and "form" not in a and (form is None or "matrix" not in form):
        reader.fail("operator-check needs a 'form' matrix here or in the scenario", f"{path}.form")
