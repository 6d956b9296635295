import math

import pytest

from dlczsim import IntegratorConfig, RateSchedule, Timeline

US = 1e-6
PER_US = 1e6

# standard pulse sequence used throughout (write 1.6 us, delay 1.4 us, read 1 us)
STD_TL = Timeline(T_W=1.6 * US, tau_d=1.4 * US, T_R=1.0 * US)

# peak Stokes gain giving n1_out(T_W) = 3 for a relaxation-free rectangular write
ALPHA_N3 = math.log(4.0) / STD_TL.T_W


def rect_sched(tl=STD_TL, alpha=ALPHA_N3, beta=20.0 * PER_US, **rates) -> RateSchedule:
    rates.setdefault("k", 3.0e9)
    return RateSchedule.rectangular(tl, alpha=alpha, beta=beta, **rates)


@pytest.fixture
def std_tl():
    return STD_TL


@pytest.fixture
def tight_cfg():
    return IntegratorConfig(rate_step_product=1e-3)
