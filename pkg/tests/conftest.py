import numpy as np
import pytest

from emlasim import emla


@pytest.fixture
def testbed_motor():
    """11.6 kW 8-pole motor used by the simulated testbed."""
    return emla.MotorCatalogEntry(
        id="pmsm-11k6", r_s=0.01401, L_d=0.002, L_q=0.002, P=4, psi_f=0.15,
        J_m=0.02, P_N=11600.0, eta_N=0.96, tau_n=59.8, n_n=2000.0,
        tau_c=1.02, f_v=20.0)


@pytest.fixture
def testbed_config(testbed_motor):
    trans = emla.TransmissionParams(N_g=8.0, rho=0.02, mu=0.04, r_m=0.012)
    return emla.EmlaConfig(motor=testbed_motor, trans=trans, M_t=150.0)


@pytest.fixture
def lossless_config():
    """Frictionless, resistance-free chain for energy-balance checks."""
    motor = emla.MotorCatalogEntry(
        id="ideal", r_s=1e-9, L_d=0.002, L_q=0.002, P=4, psi_f=0.15,
        J_m=0.02, P_N=11600.0, eta_N=1.0, tau_n=55.4, n_n=2000.0,
        tau_c=0.0, f_v=0.0)
    trans = emla.TransmissionParams(
        N_g=8.0, rho=0.02, mu=0.0, r_m=0.012,
        eta_g_model=emla.GearboxModel(eta_stage=1.0, r_cap=5.0))
    return emla.EmlaConfig(motor=motor, trans=trans, M_t=150.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
