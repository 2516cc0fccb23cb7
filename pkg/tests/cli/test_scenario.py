import pytest

from pyjsep.cli.scenario import Scenario, Tolerances, load_scenario, parse_overrides
from pyjsep.errors import ConfigInvalid

LINEAR = {"family": "linear", "parameters": {"matrix": [[-1.0, 0.0], [0.0, 1.0]]}}


def test_load_scenario(test_dir):
    scenario = load_scenario(test_dir / "operator_check.scenario.yaml")
    assert scenario.name == "operator_check"
    assert scenario.seed == 3
    assert [a["id"] for a in scenario.analyses] == ["operator-check", "rotation"]
    assert scenario.form_matrix == [[-1.0, 0.0], [0.0, 1.0]]
    assert scenario.tolerances == Tolerances()
    assert scenario.build_model().dim == 2


def test_unknown_key(test_dir):
    with pytest.raises(ConfigInvalid, match="modle") as exc:
        load_scenario(test_dir / "unknown_key.scenario.yaml")
    assert exc.value.field == "modle"
    assert exc.value.line == 2
    assert "did you mean 'model'" in str(exc.value)


def test_missing_seed(test_dir):
    with pytest.raises(ConfigInvalid, match="seed is mandatory") as exc:
        load_scenario(test_dir / "missing_seed.scenario.yaml")
    assert exc.value.field == "seed"


def test_bad_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("model: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigInvalid, match="does not parse"):
        load_scenario(path)
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ConfigInvalid, match="empty"):
        load_scenario(empty)


def test_nested_key_line(tmp_path):
    path = tmp_path / "nested.yaml"
    path.write_text(
        "seed: 1\n"
        "model:\n"
        "  family: lorenz\n"
        "analyses:\n"
        "  - kind: lyapunov\n"
        "    x0: [1.0, 1.0, 1.0]\n"
        "    T: 1.0\n"
        "    transeint: 2.0\n",
        encoding="utf-8",
    )
    with pytest.raises(ConfigInvalid, match="transient") as exc:
        load_scenario(path)
    assert exc.value.field == "analyses[0].transeint"
    assert exc.value.line == 8


@pytest.mark.parametrize(
    ("document", "field"),
    [
        ({"model": {"family": "duffing"}, "analyses": []}, "model.family"),
        ({"model": {"family": "lorenz", "parameters": {"r": 1}}, "analyses": []}, "model.parameters"),
        ({"model": LINEAR, "analyses": [{"kind": "lyapnov"}]}, "analyses[0].kind"),
        (
            {"model": LINEAR, "analyses": [{"kind": "equilibria", "seeds": [[0.0, 0.0, 0.0]]}]},
            "analyses[0].seeds[0]",
        ),
        (
            {"seed": 1, "model": LINEAR, "analyses": [{"kind": "orbit-check", "x0": [1.0, 0.0], "T": 1.0}]},
            "analyses[0].kind",
        ),
        ({"model": LINEAR, "form": {"matrix": [[1.0]]}, "analyses": []}, "form.matrix"),
        (
            {"model": LINEAR, "form": {"matrix": [[1.0, 0.0], [0.0, -1.0]], "family": "cylindrical"}, "analyses": []},
            "form",
        ),
        ({"model": LINEAR, "tolerances": {"rtol": -1.0}, "analyses": []}, "tolerances.rtol"),
        ({"model": LINEAR, "seed": 1.5, "analyses": []}, "seed"),
        (
            {
                "model": LINEAR,
                "analyses": [
                    {"kind": "equilibria", "id": "a", "seeds": [[0.0, 0.0]]},
                    {"kind": "equilibria", "id": "a", "seeds": [[1.0, 0.0]]},
                ],
            },
            "analyses[1].id",
        ),
    ],
)
def test_schema_errors(document, field):
    with pytest.raises(ConfigInvalid) as exc:
        Scenario.from_mapping(document)
    assert exc.value.field == field


def test_generated_ids():
    scenario = Scenario.from_mapping(
        {
            "model": LINEAR,
            "analyses": [
                {"kind": "equilibria", "seeds": [[0.0, 0.0]]},
                {"kind": "equilibria", "seeds": [[1.0, 0.0]]},
                {"kind": "volume-expansion", "x0": [1.0, 1.0], "T": 1.0, "F": [[0.0, 1.0]]},
            ],
        },
        name="ids",
    )
    assert [a["id"] for a in scenario.analyses] == ["equilibria-0", "equilibria-1", "volume-expansion"]
    assert [a["kind"] for a in scenario.select(["volume-expansion"]).analyses] == ["volume-expansion"]


def test_tolerance_overrides():
    tol = Tolerances().updated({"rtol": 1e-6, "separation": 1e-7})
    assert tol.rtol == 1e-6 and tol.separation == 1e-7
    assert tol.integrator == {"rtol": 1e-6, "atol": 1e-12}
    with pytest.raises(ConfigInvalid, match="did you mean 'rtol'"):
        Tolerances().updated({"rtoll": 1e-6})
    with pytest.raises(ConfigInvalid, match="positive"):
        Tolerances().updated({"atol": 0.0})

    assert parse_overrides(["rtol=1e-8", " atol = 1e-10"]) == {"rtol": 1e-8, "atol": 1e-10}
    with pytest.raises(ConfigInvalid):
        parse_overrides(["rtol"])
    with pytest.raises(ConfigInvalid):
        parse_overrides(["rtol=small"])


def test_with_overrides(test_dir):
    scenario = load_scenario(test_dir / "operator_check.scenario.yaml")
    changed = scenario.with_overrides(seed=9, tolerances={"newton": 1e-8})
    assert changed.seed == 9
    assert changed.tolerances.newton == 1e-8
    assert scenario.seed == 3


def test_form_fields(test_dir, lorenz):
    scenario = load_scenario(test_dir / "limit_cycle.scenario.yaml")
    field = scenario.build_form_field(scenario.build_model())
    assert field.index_q == 2

    adapted = Scenario.from_mapping(
        {"model": {"family": "lorenz"}, "form": {"adapted": {"point": [0.0, 0.0, 0.0]}}, "analyses": []}
    )
    assert adapted.build_form_field(lorenz).index_q == 2

    bare = Scenario.from_mapping({"model": {"family": "lorenz"}, "analyses": []})
    with pytest.raises(ConfigInvalid):
        bare.build_form_field(lorenz)
