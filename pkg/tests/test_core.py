import json
import logging

import pytest
from pydantic import ValidationError

from core.config import Settings, settings
from core.exceptions import ConfigError, GeometryError, LabError, NumericError, ToleranceError
from core.logger import ColoredFormatter, JSONFormatter, get_logger, setup_logging


def test_settings_defaults():
    s = Settings()
    assert s.riesz_padding_factor >= 2
    assert s.singular_rule in ("cell-average", "polar-local")
    assert s.tail_lattice_points % 2 == 1


@pytest.mark.parametrize("field, value", [
    ("environment", "moon"),
    ("log_level", "chatty"),
    ("singular_rule", "trapezoid"),
    ("tail_lattice_points", 32),
    ("riesz_padding_factor", 1),
    ("log_format", "xml"),
])
def test_settings_rejects(field, value):
    with pytest.raises(ValidationError):
        Settings(**{field: value})


def test_settings_normalizes_case():
    s = Settings(environment="Production", log_level="debug", singular_rule="CELL-AVERAGE")
    assert s.is_production
    assert s.log_level == "DEBUG"
    assert s.singular_rule == "cell-average"


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("MAX_WORKERS", "4")
    assert Settings().max_workers == 4


@pytest.mark.parametrize("exc, code", [
    (LabError, 3),
    (ConfigError, 2),
    (GeometryError, 2),
    (NumericError, 3),
    (ToleranceError, 1),
])
def test_exit_codes(exc, code):
    err = exc("boom")
    assert err.exit_code == code
    assert err.message == "boom"


def test_config_errors_are_value_errors():
    assert issubclass(GeometryError, ValueError)
    assert not issubclass(NumericError, ValueError)


def _record(**extra):
    record = logging.LogRecord("lab", logging.WARNING, __file__, 10, "mass %s", ("low",), None)
    for k, v in extra.items():
        setattr(record, k, v)
    return record


def test_json_formatter_carries_experiment():
    data = json.loads(JSONFormatter().format(_record(experiment="rigged")))
    assert data["level"] == "WARNING"
    assert data["message"] == "mass low"
    assert data["experiment"] == "rigged"


def test_colored_formatter_restores_levelname():
    record = _record()
    text = ColoredFormatter(fmt="%(levelname)s %(message)s").format(record)
    assert "mass low" in text
    assert record.levelname == "WARNING"


def test_colored_formatter_tags_experiment():
    text = ColoredFormatter(fmt="%(message)s").format(_record(experiment="quantization"))
    assert text.endswith("[quantization]")


def test_setup_logging_writes_json_file(monkeypatch, tmp_path):
    path = tmp_path / "lab.log"
    monkeypatch.setattr(settings, "log_file", str(path))
    monkeypatch.setattr(settings, "log_format", "json")
    root = logging.getLogger()
    saved = (root.level, list(root.handlers))
    try:
        setup_logging("DEBUG")
        get_logger("tests").info("sweep done", extra={"experiment": "rigged", "k": 8})
        for handler in root.handlers:
            handler.flush()
        lines = [json.loads(line) for line in path.read_text().splitlines()]
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers[:] = saved[1]
        root.setLevel(saved[0])
    record = next(r for r in lines if r["message"] == "sweep done")
    assert record["experiment"] == "rigged" and record["k"] == 8
    assert record["logger"] == "tests"
