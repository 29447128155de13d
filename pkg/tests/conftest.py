import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sff.scenario import load_scenario, scenario_from_dict  # noqa: E402


def make_scenario(**kw):
    """Small 2-D single-integrator scenario; keyword arguments override fields."""
    doc = {
        "name": "test",
        "workspace": [[0, 10], [0, 10]],
        "regions": {},
        "dynamics": {"model": "single_integrator_2d", "params": {"v_max": 1.0}},
        "x0": [1.0, 1.0],
        "horizon_s": 10,
        "dt_s": 1,
        "grid": [41, 41],
    }
    doc.update(kw)
    return scenario_from_dict(doc)


def line_scenario(**kw):
    """1-D single integrator on ``[-10, 10]`` with ``x >= c`` style predicates."""
    doc = {
        "name": "line",
        "workspace": [[-10, 10]],
        "regions": {},
        "predicates": {},
        "dynamics": {"model": "single_integrator_1d", "params": {"v_max": 2.0}},
        "x0": [0.0],
        "horizon_s": 3,
        "dt_s": 1,
        "grid": [41],
    }
    doc.update(kw)
    return scenario_from_dict(doc)


@pytest.fixture(scope="session")
def scenario1():
    return load_scenario("scenario1")


@pytest.fixture(scope="session")
def scenario2():
    return load_scenario("scenario2")


@pytest.fixture(scope="session")
def scenario3():
    return load_scenario("scenario3")


S3_MISSION = ("G[0,30](!O1 & !Right) & F[0,30](Left & g1) & F[0,30](Left & g2) "
              "& (!t1 U[0,30] g2) & G[0,30]((Left & rd1) | rd2)")
S2_MISSION = "(!t1 U[0,30] g1) & (!t2 U[0,30] g2) & G[0,30](r1 | r2) & G[0,30](!O1 & !O2 & !O3)"
S2_MODIFIED = ("F[0,30] g1 & F[0,30](g2 & r1) & G[0,30] !t1 & G[0,30] !t2 & G[0,30](r1 | r2) "
               "& G[0,30] !O1 & G[0,30] !O2 & G[0,30] !O3")
