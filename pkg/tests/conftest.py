import numpy as np
import pytest

from nlispec.forward import default_operating_point, simulate_burst
from nlispec.spectral import AxisKind, Spectrum

# signal band of the reference setup, 901-923 nm, in cm^-1
SIGNAL_LO = 1e7 / 923.0
SIGNAL_HI = 1e7 / 901.0


def fringe(n=2048, amplitude=1.0, vis=0.3, opld_mm=1.45, phase=0.0, lo=SIGNAL_LO, hi=SIGNAL_HI):
    """Pure fringe A*(1 + V cos(2 pi nu dL + phi)) on a uniform wavenumber grid."""
    nu = np.linspace(lo, hi, n)
    vals = amplitude * (1.0 + vis * np.cos(2 * np.pi * nu * opld_mm / 10.0 + phase))
    return Spectrum(nu, vals, AxisKind.WAVENUMBER_CM1)


@pytest.fixture(scope="session")
def operating_point():
    return default_operating_point(seed=0)


@pytest.fixture(scope="session")
def reference_burst(operating_point):
    src, vis, sample, cfg = operating_point
    return simulate_burst(src, vis, sample, cfg.with_seed(500_000), 64)


# -- acceptance reporting ------------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
    print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {n}: {detail}")
