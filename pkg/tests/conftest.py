import pytest

_RESULTS: list[tuple[str, bool, str]] = []


class Criterion:
    def __init__(self, name: str) -> None:
        self.name = name
        self.detail = ""

    def note(self, detail: str) -> None:
        self.detail = detail


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(marker.args[0] if marker else request.node.name)
    yield c
    failed = getattr(request.node, "rep_call", None)
    ok = failed is not None and failed.passed
    _RESULTS.append((c.name, ok, c.detail))


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _RESULTS:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
