from __future__ import annotations

import json
import logging

import numpy as np

from maxlow.logging_config import JsonFormatter, setup_logging


def test_json_formatter_includes_extra_fields():
    record = logging.makeLogRecord(
        {"name": "maxlow.test", "levelname": "INFO", "msg": "kappa_h computed", "kappa": 0.14}
    )

    payload = json.loads(JsonFormatter().format(record))

    assert payload["message"] == "kappa_h computed"
    assert payload["logger"] == "maxlow.test"
    assert payload["kappa"] == 0.14
    assert "msg" not in payload


def test_setup_logging_respects_settings(settings_overrides):
    settings_overrides(log_format="json", log_level="debug")

    setup_logging()

    root = logging.getLogger()
    assert root.level == logging.DEBUG
    assert isinstance(root.handlers[0].formatter, JsonFormatter)


def test_json_formatter_converts_numpy_values():
    record = logging.makeLogRecord(
        {"msg": "patch done", "value": np.float64(0.5), "anchor": np.int64(3), "dofs": np.ones(2)}
    )

    payload = json.loads(JsonFormatter().format(record))

    assert payload["value"] == 0.5
    assert payload["anchor"] == 3
    assert payload["dofs"] == [1.0, 1.0]


def test_text_format_appends_context(settings_overrides):
    settings_overrides(log_format="text", log_level="info")
    setup_logging()
    record = logging.makeLogRecord({"msg": "step completed", "stage": "evp", "level": 2})

    line = logging.getLogger().handlers[0].format(record)

    assert line.endswith("step completed [stage=evp level=2]")
