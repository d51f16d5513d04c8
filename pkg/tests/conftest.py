import math

import numpy as np
import pytest

from schemas.report import ExperimentReport, Relation, ReportRow
from services.field import disk_mask, make_grid


@pytest.fixture
def unit_grid():
    #odd n puts a node on the origin
    return make_grid(half_width=1.0, n=65)


@pytest.fixture
def unit_disk(unit_grid):
    return disk_mask(unit_grid, (0.0, 0.0), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def passing_report():
    return ExperimentReport(experiment="demo", rows=[
        ReportRow(experiment="demo", quantity="mass", value=8 * math.pi, target=8 * math.pi,
                  tolerance=0.01, relation=Relation.REL),
        ReportRow(experiment="demo", param_name="delta", param_value=4.0, quantity="neck", value=0.5),
    ])


@pytest.fixture
def failing_report():
    return ExperimentReport(experiment="demo", rows=[
        ReportRow(experiment="demo", quantity="mass", value=20.0, target=8 * math.pi,
                  tolerance=0.01, relation=Relation.REL),
    ])
