import pytest

CRITERIA = {
    1: "ML-I closed form: residual and integration agreement",
    2: "ML-I energy formula and total-energy drift",
    3: "axis energy varies while total energy is conserved",
    4: "superintegrability witnesses along the reference orbit",
    5: "transform round trip and invariance identity",
    6: "mapped-orbit deviation is stable under refinement",
    7: "ML-II conserved quantity and frequency forms",
    8: "ML-III residual and zero-shift reduction",
    9: "isotonic Ermakov-Pinney referee and verbatim diagnostic",
    10: "constant-mass degeneration of every model and transform",
    11: "byte-identical verify reports for equal seeds",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    if hasattr(rep, "wasxfail"):
        state = "xfail" if rep.skipped else "xpass"
    elif rep.passed:
        state = "pass"
    elif rep.skipped:
        state = "skip"
    else:
        state = "xpass" if "XPASS" in str(rep.longrepr) else "fail"
    _outcomes.setdefault(marker.args[0], []).append((item.name, state))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            continue
        states = [s for _, s in results]
        if "fail" in states or "xpass" in states:
            verdict = "FAIL"
        elif "xfail" in states:
            verdict = "FAIL (documented, strict xfail)"
        else:
            verdict = "PASS"
        known = [name for name, s in results if s == "xfail"]
        extra = f"  unattainable parts: {', '.join(known)}" if known else ""
        tr.write_line(f"criterion {n:2d}: {verdict:32s} {title} [{states.count('pass')}/{len(states)} parts]{extra}")
