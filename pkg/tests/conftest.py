import math

import numpy as np
import pytest

from haircut import CORP_A_5_10Y, SPX_6P, DejdParams, LossSetup

DAY = 1.0 / 252.0
TEN_DAYS = 10.0 / 252.0


@pytest.fixture(scope="session")
def spx6():
    return SPX_6P.to_model()


@pytest.fixture(scope="session")
def corp():
    return CORP_A_5_10Y.to_model()


@pytest.fixture(scope="session")
def setup10():
    return LossSetup(10)


def lognormal_params(sigma=0.2):
    """Pure diffusion with mu = -sigma^2/2, so that E[exp(X_t)] = 1."""
    return DejdParams(-0.5 * sigma * sigma, sigma, 0.0, 0.0, 50.0, 50.0)


def gaussian_cdf(x, mean, sd):
    return 0.5 * math.erfc(-(x - mean) / (sd * math.sqrt(2.0)))


def mc_mean(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


# -- acceptance reporting -----------------------------------------------------------

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    """Note one check of an acceptance criterion; returns ``passed`` for asserting."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
    return bool(passed)


def note(criterion: int, detail: str) -> None:
    """Informational line shown under a criterion; does not affect its verdict."""
    ACCEPTANCE.setdefault(criterion, []).append((None, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(p for p, _ in checks if p is not None)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
        for p, detail in checks:
            tag = "info" if p is None else ("ok" if p else "!!")
            tr.write_line(f"    [{tag}] {detail}")
