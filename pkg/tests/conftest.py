import pytest

from sacre.reqmodel import Operationalization

CTX1 = "perclos>=0.15 AND hbpm<=0.6 AND hbpm>=0.56"
CTX2 = "perclos>=0.21 AND facePosition=1 AND hbpm<=0.55 AND hbpm>=0.46"
CTX3 = "perclos>0.3 AND facePosition=1 AND hbpm<=0.45 AND hosw<1"


@pytest.fixture
def ctx_ops():
    return {rid: Operationalization.parse(t) for rid, t in
            (("cr1", CTX1), ("cr2", CTX2), ("cr3", CTX3))}


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    def record(number, title, ok, detail=""):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        ACCEPTANCE_LINES.append(line + (f" ({detail})" if detail else ""))
        assert ok, f"{title}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
