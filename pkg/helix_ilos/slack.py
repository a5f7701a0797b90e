import os
from typing import Any, Dict, Iterable, Mapping, Optional

import requests


def send_slack_message(
    text: str,
    *,
    webhook_url: Optional[str] = None,
    username: Optional[str] = None,
    icon_emoji: Optional[str] = None,
    timeout_seconds: float = 5.0,
    retries: int = 0,
) -> Dict[str, Any]:
    """
    Slack Incoming Webhook 으로 텍스트 메시지를 전송합니다.
    긴 스윕/재현 실행이 끝났을 때, 또는 발산 같은 ERROR 로그를 알릴 때 쓴다.

    Arguments:
        text: 전송할 텍스트
        webhook_url: 지정하지 않으면 환경변수 `SLACK_WEBHOOK_URL` 사용
        username: 메시지 발신자 이름(옵션)
        icon_emoji: 아이콘 이모지(옵션)
        timeout_seconds: 요청 타임아웃(초)
        retries: 실패 시 재시도 횟수

    Returns:
        {"ok": bool, "status": int, "error": Optional[str]}
    """
    url = webhook_url or os.getenv("SLACK_WEBHOOK_URL")
    if not url:
        return {"ok": False, "status": 0, "error": "SLACK_WEBHOOK_URL not set"}

    payload: Dict[str, Any] = {"text": text}
    if username:
        payload["username"] = username
    if icon_emoji:
        payload["icon_emoji"] = icon_emoji

    attempt = 0
    last_error: Optional[str] = None
    while attempt <= max(0, retries):
        try:
            resp = requests.post(url, json=payload, timeout=timeout_seconds)
            if 200 <= resp.status_code < 300:
                return {"ok": True, "status": resp.status_code, "error": None}
            last_error = f"status={resp.status_code} body={resp.text[:300]}"
        except Exception as e:  # pragma: no cover - network/runtime error path
            last_error = str(e)

        attempt += 1

    return {"ok": False, "status": 0, "error": last_error}


def format_table(columns: Iterable[str], rows: Iterable[Mapping[str, Any]]) -> str:
    """고정폭 텍스트 표. float 는 유효숫자 6자리."""
    cols = list(columns)

    def cell(v: Any) -> str:
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    body = [[cell(row.get(c, "")) for c in cols] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in body]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in body]
    return "\n".join(lines)


def format_run_table(title: str, rows: Iterable[Mapping[str, Any]], columns: Iterable[str]) -> str:
    """메트릭 행들을 Slack 코드 블록용 표로 만든다."""
    return f"*{title}*\n```\n" + format_table(columns, rows) + "\n```"


def notify_run_table(
    title: str,
    rows: Iterable[Mapping[str, Any]],
    columns: Iterable[str],
    *,
    webhook_url: Optional[str],
) -> Dict[str, Any]:
    if not webhook_url:
        return {"ok": False, "status": 0, "error": "webhook not configured"}
    return send_slack_message(
        format_run_table(title, rows, columns),
        webhook_url=webhook_url,
        username="helix-ilos",
        icon_emoji=":microscope:",
    )
