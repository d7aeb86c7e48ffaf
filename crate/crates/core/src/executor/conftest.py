"""pytest plugin that writes the restbench JSON report.

Every collected test starts out as an error ("not executed") and the report is
rewritten after each test, so a run that is killed part way still leaves a
usable report. HTTP traffic made through requests is captured per test.
"""

import hashlib
import json
import os
from urllib.parse import urlsplit

import pytest

try:
    import requests
except ImportError:  # scripts that do not use requests still get outcomes
    requests = None

_state = {"report": None, "current": None}
_cases = {}
_order = []


def pytest_addoption(parser):
    parser.addoption("--restbench-report", action="store", default=None)


def _write():
    path = _state["report"]
    if not path:
        return
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump([_cases[name] for name in _order], handle)
    os.replace(tmp, path)


def _install_capture():
    original = requests.Session.request

    def request(self, method, url, *args, **kwargs):
        response = original(self, method, url, *args, **kwargs)
        current = _state["current"]
        if current is not None and current in _cases:
            sent = getattr(response, "request", None)
            target = getattr(sent, "url", None) or url
            _cases[current]["responses"].append(
                {
                    "method": str(method).upper(),
                    "path": urlsplit(target).path or "/",
                    "status": response.status_code,
                    "body_digest": hashlib.sha256(response.content or b"").hexdigest(),
                }
            )
        return response

    requests.Session.request = request


def pytest_configure(config):
    _state["report"] = config.getoption("--restbench-report")
    if requests is not None:
        _install_capture()


def pytest_collection_finish(session):
    for item in session.items:
        _order.append(item.nodeid)
        _cases[item.nodeid] = {
            "name": item.nodeid,
            "outcome": "error",
            "message": "not executed",
            "responses": [],
        }
    _write()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_protocol(item, nextitem):
    _state["current"] = item.nodeid
    if item.nodeid in _cases:
        _cases[item.nodeid]["message"] = "not finished"
    yield
    _state["current"] = None
    _write()


def _is_transport_error(excinfo):
    if requests is None or excinfo is None:
        return False
    return excinfo.errisinstance(
        (requests.exceptions.ConnectionError, requests.exceptions.Timeout)
    )


def _message(excinfo, report):
    if excinfo is not None:
        text = excinfo.exconly()
    else:
        text = str(report.longrepr or "")
    return text.strip()[:2000] or "failed"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    case = _cases.get(item.nodeid)
    if case is None:
        return
    if report.when == "call":
        if report.passed:
            case["outcome"] = "passed"
            case["message"] = ""
        elif report.skipped:
            case["outcome"] = "error"
            case["message"] = "skipped"
        else:
            case["outcome"] = "error" if _is_transport_error(call.excinfo) else "failed"
            case["message"] = _message(call.excinfo, report)
    elif report.failed and case["outcome"] != "failed":
        case["outcome"] = "error"
        case["message"] = _message(call.excinfo, report)
    elif report.when == "setup" and report.skipped:
        case["outcome"] = "error"
        case["message"] = "skipped"
