"""Hot simulation kernels: compiled extension with a pure-Python fallback.

The actuator ODE stepping (RK4 at 1 kHz) dominates runtime of dataset
generation and closed-loop runs, so it lives in a small Cython extension.
Importing this package picks the compiled module when available and falls
back to the interpreted twin otherwise; both expose the same functions and
produce identical results (see tests/test_kernels.py and
benchmarks/bench_kernels.py).

Packed parameter layout shared by both backends (float64[12]):

    0  r_s        stator resistance [ohm]
    1  L_d        d-axis inductance [H]
    2  L_q        q-axis inductance [H]
    3  P          pole-pair count
    4  psi_f      PM flux linkage [Wb]
    5  tau_c      Coulomb friction torque [N*m]
    6  f_v        viscous coefficient, load side [N*s/m]
    7  n_ng       2*pi*N_g/rho, motor rad per load metre [1/m]
    8  eta_t_fwd  forward transmission efficiency eta_g*eta_f
    9  kappa_b    backdrive gain n_ng*eta_g/eta_b [1/m]
    10 M_eff      M_t + n_ng^2*J_m, reflected moving mass [kg]
    11 deadband   velocity deadband for branch switching [m/s]

State vector: (i_d, i_q, x_L, xdot_L); branch is +1 (forward) or -1
(backdriving) and is resolved against the deadband at each step entry.
"""

from . import _kernels_py

try:
    from . import _kernels_cy as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = _kernels_py
    BACKEND = "python"

rk4_step = _impl.rk4_step
run_const_input = _impl.run_const_input
run_trace = _impl.run_trace
run_velocity_servo = _impl.run_velocity_servo

__all__ = [
    "BACKEND",
    "rk4_step",
    "run_const_input",
    "run_trace",
    "run_velocity_servo",
    "_kernels_py",
]
