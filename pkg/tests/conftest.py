"""Shared reference values.

Values marked "oracle" were produced by ``scripts/oracles.py`` (mpmath,
40 digits, independent of this package) and frozen here.
"""

import pytest

from fairbasis.models import IntensityModel, MarketEnv

# square-root model used throughout: kappa=0.5, theta=0.04, sigma=0.1
CIR = dict(kappa=0.5, theta=0.04, sigma=0.1)

# oracle: Riccati-ODE survival, keyed by (lambda0, T)
CIR_SURVIVAL = {
    (0.01, 1): 0.983757381629,
    (0.01, 5): 0.866075080184,
    (0.01, 10): 0.71461253361,
    (0.02, 1): 0.976056169772,
    (0.02, 5): 0.85051497123,
    (0.02, 10): 0.700809395484,
    (0.05, 1): 0.953312377457,
    (0.05, 5): 0.805491983789,
    (0.05, 10): 0.660979172982,
}
CIR_PD_1Y_002 = 0.0239438302276

# oracle: IRB formula at pd=0.01
RHO_001 = 0.192783679166
B_001 = 0.137486130897
MA_001 = 1.25980950092
K_001 = 0.0738534411136  # lgd 0.45, M 2.5, avc 1
MA_PD1 = 1.02152400688
NC_FIXED_005 = 0.00369267205568
NC_FIXED_0016 = 0.00118165505782
NORM_Q999 = 3.09023230617

# oracle: constant-intensity closed forms (lambda=0.03, r=0.02, T=5, R=0.4)
APV_CONST = 4.42398433857
DPV_CONST = 0.0796317180943
FLOATER_001 = 0.964608125291
BOND_091 = 0.730807617422  # coupon 0.05, lambda 0.091, r=0, R=0, T=10
JTD_091 = 0.328283393388
MBAR_5Y = 0.047326913134
EQ22_V1 = 0.0221199216929
EQ22_V2 = 0.00663597650786


@pytest.fixture
def cir_model():
    return IntensityModel.square_root(0.02, **CIR)


@pytest.fixture
def flat_env():
    return MarketEnv.riskfree(0.02)


@pytest.fixture
def zero_env():
    return MarketEnv.riskfree(0.0)


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
