import numpy as np
import pytest

from rkhsball import KernelFamily


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ALL_FAMILIES = {
    "gaussian": {"family": "gaussian", "domain": [0, 2.0]},
    "laplacian": {"family": "laplacian", "domain": [0, 2.0]},
    "matern": {"family": "matern", "domain": [0, 3.0]},
    "inverse_multiquadric": {"family": "inverse_multiquadric", "domain": [0.5, 50.0]},
    "product_cauchy": {"family": "product_cauchy", "domain": [0.5, 50.0]},
    "spline": {"family": "spline", "domain": [0, 4.0]},
    "rbf_mixture": {"family": "rbf_mixture", "domain": [0, 2.0],
                    "aux": {"weights": [0.3, 0.7], "atoms": [0.5, 3.0]}},
}


def family(tag, dim=1):
    return KernelFamily.from_spec({**ALL_FAMILIES[tag], "dim": dim})


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(capsys):
    """``record(k, ok, detail)`` prints ``ACCEPTANCE k: PASS|FAIL detail`` uncaptured."""

    def record(k, ok, detail=""):
        line = f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
