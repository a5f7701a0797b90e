import io
import json
import logging

import pytest

from helix_ilos import logger as logger_mod
from helix_ilos import slack
from helix_ilos.guidance import GuidanceParams, default_certificate
from helix_ilos.logger import ROOT_LOGGER, JsonFormatter, SlackLogHandler, get_logger, setup_logging
from helix_ilos.slack import format_run_table, format_table, send_slack_message


class _FakeResponse:
    def __init__(self, status_code: int = 200, text: str = "ok") -> None:
        self.status_code = status_code
        self.text = text


@pytest.fixture
def posts(monkeypatch):
    sent = []

    def fake_post(url, json=None, timeout=None):
        sent.append((url, json))
        return _FakeResponse()

    monkeypatch.setattr(slack.requests, "post", fake_post)
    return sent


def test_json_logs_carry_run_context():
    stream = io.StringIO()
    setup_logging("DEBUG", json_logs=True, stream=stream)
    get_logger("sim").info("[sim] done", extra={"scenario": "study_ilos", "grid_point": {"alpha_d": 600.0}})
    record = json.loads(stream.getvalue().splitlines()[-1])
    assert record["level"] == "INFO"
    assert record["name"] == "helix_ilos.sim"
    assert record["message"] == "[sim] done"
    assert record["scenario"] == "study_ilos"
    assert record["grid_point"] == {"alpha_d": 600.0}
    assert "run_id" not in record


def test_level_filtering():
    stream = io.StringIO()
    setup_logging("WARNING", stream=stream)
    log = get_logger("cli")
    log.info("hidden")
    log.warning("shown")
    out = stream.getvalue()
    assert "hidden" not in out and "shown" in out
    logger_mod.set_level("DEBUG")
    log.debug("now visible")
    assert "now visible" in stream.getvalue()


def test_certify_log_keeps_arguments_unformatted():
    stream = io.StringIO()
    setup_logging("DEBUG", json_logs=True, stream=stream)
    records = []

    class _Keep(logging.Handler):
        def emit(self, record):
            records.append(record)

    keep = _Keep()
    logging.getLogger(ROOT_LOGGER).addHandler(keep)
    try:
        default_certificate(GuidanceParams(alpha_d=600.0, sigma0=0.01, k_d=0.15, delta_los=0.75e-3))
    finally:
        logging.getLogger(ROOT_LOGGER).removeHandler(keep)
    rec = next(r for r in records if r.msg.startswith("[certify]"))
    # 포맷은 핸들러가 출력할 때만 한다
    assert "%" in rec.msg and len(rec.args) == 5
    messages = [json.loads(line)["message"] for line in stream.getvalue().splitlines()]
    assert any(m.startswith("[certify] lambda_min") and "ges=False" in m for m in messages)


def test_slack_handler_threshold_and_flag(posts):
    handler = SlackLogHandler("https://hooks.example/x", min_level="ERROR")
    log = logging.getLogger("helix_ilos.test_slack")
    log.propagate = False
    log.setLevel(logging.DEBUG)
    log.addHandler(handler)
    try:
        log.warning("quiet")
        log.error("loud")
        log.info("flagged", extra={"notify_slack": True})
    finally:
        log.removeHandler(handler)
    assert [p[1]["text"] for p in posts] == ["loud", "flagged"]
    assert posts[0][0] == "https://hooks.example/x"


def test_slack_handler_rate_limit(posts):
    handler = SlackLogHandler("https://hooks.example/x", min_level="INFO", rate_limit_per_minute=2)
    for i in range(5):
        handler.emit(logging.LogRecord("helix_ilos", logging.ERROR, __file__, 1, f"m{i}", None, None))
    assert len(posts) == 2


def test_slack_handler_without_url_is_silent(posts):
    handler = SlackLogHandler(None)
    handler.emit(logging.LogRecord("helix_ilos", logging.ERROR, __file__, 1, "x", None, None))
    assert posts == []


def test_send_slack_message(posts, monkeypatch):
    assert send_slack_message("hi")["ok"] is False
    monkeypatch.setenv("SLACK_WEBHOOK_URL", "https://hooks.example/env")
    result = send_slack_message("hi", username="helix-ilos")
    assert result == {"ok": True, "status": 200, "error": None}
    assert posts[-1] == ("https://hooks.example/env", {"text": "hi", "username": "helix-ilos"})


def test_send_slack_message_reports_http_errors(monkeypatch):
    calls = []

    def failing_post(url, json=None, timeout=None):
        calls.append(url)
        return _FakeResponse(500, "boom")

    monkeypatch.setattr(slack.requests, "post", failing_post)
    result = send_slack_message("hi", webhook_url="https://hooks.example/x", retries=2)
    assert not result["ok"]
    assert "status=500" in result["error"]
    assert len(calls) == 3


def test_table_formatting():
    rows = [{"run": "a", "eps": 0.123456789}, {"run": "bb", "eps": 2.0}]
    table = format_table(["run", "eps"], rows)
    assert table.splitlines() == ["run  eps     ", "a    0.123457", "bb   2       "]
    assert format_run_table("t", rows, ["run", "eps"]).startswith("*t*\n```\n")
