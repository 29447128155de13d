import json

import numpy as np
import pytest

from conftest import load_scenario, make_scenario
from sff.errors import SchemaError, ScenarioValidationError
from sff.scenario import scenario_from_dict


def test_scenario1_regions(scenario1):
    boxes = {k: r.box for k, r in scenario1.regions.items()}
    assert boxes["o1"] == ((1, 4), (3, 5))
    assert boxes["o2"] == ((4, 7), (6, 10))
    assert boxes["o3"] == ((7, 9), (2, 4))
    assert boxes["g1"] == ((1, 2), (9, 10))
    assert boxes["g2"] == ((3, 4), (1, 2))
    assert boxes["g3"] == ((8, 9), (7, 8))
    assert boxes["school"] == ((7, 10), (6, 7))
    assert boxes["construction"] == ((4, 5), (0, 6))
    assert boxes["start"] == ((9, 10), (0, 1))
    assert scenario1.horizon == 1800 and scenario1.dt == 30


def test_scenario1_windows(scenario1):
    school, construction = scenario1.regions["school"], scenario1.regions["construction"]
    assert all(school.blocked_at(t) for t in np.linspace(0, scenario1.horizon, 7))
    assert not any(construction.blocked_at(t) for t in np.linspace(0, scenario1.horizon, 7))


def test_scenario3_contents(scenario3):
    assert {"O1", "g1", "g2", "rd1", "rd2", "t1", "Left", "Right"} <= set(scenario3.regions)
    assert scenario3.horizon == 30
    left, right = scenario3.region("Left"), scenario3.region("Right")
    p = np.array([1.0, 5.0])
    assert left.robustness(p) > 0 > right.robustness(p)


def test_scenario2_topology(scenario2):
    g2, r1 = scenario2.region("g2"), scenario2.region("r1")
    (gx, gy), (rx, ry) = g2.box, r1.box
    disjoint_x = gx[1] < rx[0] or rx[1] < gx[0]
    disjoint_y = gy[1] < ry[0] or ry[1] < gy[0]
    assert disjoint_x or disjoint_y


def test_missing_x0_pointer(tmp_path):
    doc = make_scenario().to_json()
    del doc["x0"]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as info:
        load_scenario(path)
    assert info.value.pointer == "/x0"


def test_bad_region_pointer():
    with pytest.raises(SchemaError) as info:
        make_scenario(regions={"a": {"kind": "goal", "box": "wide"}})
    assert info.value.pointer.startswith("/regions/a")


@pytest.mark.parametrize("kw", [
    {"x0": [11.0, 1.0]},
    {"regions": {"a": {"box": [9, 12, 0, 1]}}},
    {"dt_s": 0.3, "horizon_s": 1.0},
    {"x0": [1.0, 1.0, 1.0]},
])
def test_validation_errors(kw):
    with pytest.raises(ScenarioValidationError):
        make_scenario(**kw)


def test_unknown_model_is_schema_error():
    with pytest.raises(SchemaError):
        make_scenario(dynamics={"model": "unicycle"})


def test_round_trip(scenario1):
    back = scenario_from_dict(scenario1.to_json())
    assert back.regions == scenario1.regions
    assert np.array_equal(back.x0, scenario1.x0) and back.grid_points == scenario1.grid_points


def test_invalid_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(SchemaError):
        load_scenario(path)
