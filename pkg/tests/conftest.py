import pytest

from eqdividend.mixture import solve_mixture
from eqdividend.model import ExpMixtureDiscount, ModelParams, PseudoExpDiscount
from eqdividend.pseudo import solve_pseudo

MIX_PARAMS = ModelParams(1.0, 1.0, 0.8)
MIX_RATES = (0.2, 0.4)
MIX_WEIGHTS = (0.0, 0.4, 0.7, 1.0)
PSEUDO_PARAMS = ModelParams(1.0, 1.0, 1.0)
PSEUDO_DELTA = 0.8
PSEUDO_LAMBDAS = (0.0, 0.1, 0.2)

# Barriers from the finite-difference oracle in tests/oracles.py (8000/32000
# cells, agreement with the closed forms ~3e-7), rounded to 6 digits.
FD_MIX_B = {0.0: 0.652454, 0.4: 0.878147, 0.7: 1.020744, 1.0: 1.145162}
FD_PSEUDO_B = {0.0: 0.346983, 0.1: 0.411269, 0.2: 0.474294}

# Published 4-decimal barriers.
PUBLISHED_MIX_B = {0.0: 0.6525, 0.4: 0.8781, 0.7: 1.0207, 1.0: 1.1452}
PUBLISHED_PSEUDO_B = {0.0: 0.3470, 0.1: 0.4141, 0.2: 0.4796}


def mixture_disc(w):
    return ExpMixtureDiscount((w, round(1.0 - w, 12)), MIX_RATES)


def pseudo_disc(lam):
    return PseudoExpDiscount(lam, PSEUDO_DELTA)


@pytest.fixture(scope="session")
def mixture_solutions():
    return {w: solve_mixture(MIX_PARAMS, mixture_disc(w)) for w in MIX_WEIGHTS}


@pytest.fixture(scope="session")
def pseudo_solutions():
    return {lam: solve_pseudo(PSEUDO_PARAMS, pseudo_disc(lam)) for lam in PSEUDO_LAMBDAS}


@pytest.fixture(scope="session")
def all_solutions(mixture_solutions, pseudo_solutions):
    out = {f"mixture_w{w}": s for w, s in mixture_solutions.items()}
    out.update({f"pseudo_l{lam}": s for lam, s in pseudo_solutions.items()})
    return out


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
