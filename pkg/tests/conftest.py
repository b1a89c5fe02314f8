import numpy as np
import pytest

from shapharmony.data import Kind, encode, load_bundled, split


@pytest.fixture(scope="session")
def iris():
    return load_bundled("iris")


@pytest.fixture(scope="session")
def iris_split(iris):
    return split(iris, 0.2, seed=0)


def make_toy(n=40, seed=0, extra=None, name="toy"):
    """Three informative continuous features, two classes.

    ``extra`` maps added column names to callables ``(rng, X) -> column``.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    logits = 1.5 * X[:, 0] - 1.0 * X[:, 1] + 0.5 * X[:, 2]
    y = np.where(logits + 0.3 * rng.normal(size=n) > 0, "pos", "neg")
    raw = {f"x{j}": X[:, j] for j in range(3)}
    kinds = {f"x{j}": Kind.CONTINUOUS for j in range(3)}
    for col, fn in (extra or {}).items():
        raw[col] = fn(rng, X)
        kinds[col] = Kind.CONTINUOUS
    return encode(name, raw, kinds, y.tolist())


@pytest.fixture
def toy():
    return make_toy()


_CRITERIA: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, text = marker.args
    passed = report.passed if report.when == "call" else False
    prev = _CRITERIA.get(number, (text, True))
    _CRITERIA[number] = (text, prev[1] and passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, passed = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}")
