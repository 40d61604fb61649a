"""Shared fixtures: the reference calibration point used across the suite.

The reference coefficients (ac, aq, f) describe a realistic operating point
of the simulated chain; most integration tests configure the simulator so
that these exact values should be recovered.
"""

import pytest

from phaseqrng.model import SignalChainConfig, VarianceFit, model_from_coefficients

# reference variance-fit coefficients used as the standard test operating point
AC_REF = 22.519        # V^2 / W^2
AQ_REF = 0.03784       # V^2 / W
F_REF = 1.3732e-6      # V^2

# conversion gain chosen so phase excursions stay deep in the linear regime
# of the interferometer response (sin(x) ~ x to < 0.1% at every sweep power)
CONV_GAIN = 9.5e6      # V^2 / (W rad)^2
DELAY_TD = 540e-12     # s


@pytest.fixture
def ref_fit() -> VarianceFit:
    return VarianceFit(ac=AC_REF, aq=AQ_REF, f=F_REF, r_squared=0.998)


@pytest.fixture
def ref_chain() -> SignalChainConfig:
    return SignalChainConfig(
        delay_td=DELAY_TD,
        conversion_gain_a=CONV_GAIN,
        electronic_noise_f=F_REF,
    )


def make_ref_model(power: float):
    """Laser model whose chain coefficients equal the reference fit values."""
    return model_from_coefficients(
        AC_REF, AQ_REF, power, conversion_gain_a=CONV_GAIN, delay_td=DELAY_TD
    )


@pytest.fixture
def ref_model():
    return make_ref_model(2.47e-4)
