"""Pure-Python twin of the compiled actuator kernels.

Scalar math only (no numpy in the inner loop); kept arithmetically
identical to ``_kernels_cy`` so both backends agree bit for bit.
"""

# status codes returned by run_velocity_servo
SERVO_OK = 0
SERVO_NO_STEADY = 1
SERVO_NONFINITE = 2


def accel_from_torque(tau_e, xdot, f_load, branch, p):
    """Load-side acceleration for a given torque and resolved branch.

    Inside the velocity deadband Coulomb friction acts as stiction: the
    screw holds whenever the friction-free drive cannot break away.
    """
    if -p[11] <= xdot <= p[11]:
        f_net0 = p[8] * p[7] * tau_e - f_load
        f_break = p[8] * p[7] * p[5]
        if -f_break <= f_net0 <= f_break:
            return 0.0
    if branch > 0:
        f_drive = p[8] * p[7] * (tau_e - p[5]) - p[6] * xdot
    else:
        f_drive = p[9] * (tau_e - p[5] - p[7] * p[6] * xdot)
    return (f_drive - f_load) / p[10]


def _derivs(i_d, i_q, xdot, v_d, v_q, f_load, branch, p):
    """Time derivatives of (i_d, i_q, x_L, xdot_L) for one drive branch."""
    omega = xdot * p[7]
    di_d = (v_d - p[0] * i_d + p[2] * p[3] * omega * i_q) / p[1]
    di_q = (v_q - p[0] * i_q - p[1] * p[3] * omega * i_d - p[3] * p[4] * omega) / p[2]
    tau_e = 1.5 * p[3] * (p[4] * i_q + (p[1] - p[2]) * i_d * i_q)
    acc = accel_from_torque(tau_e, xdot, f_load, branch, p)
    return di_d, di_q, xdot, acc


def _resolve_branch(xdot, branch, deadband):
    if xdot > deadband:
        return 1
    if xdot < -deadband:
        return -1
    return branch


def rk4_step(y, branch, v_d, v_q, f_load, dt, params):
    """One fixed-step RK4 update with inputs held constant over dt.

    y is the 4-tuple (i_d, i_q, x_L, xdot_L); returns (y_new, branch_used).
    The drive branch is resolved once at step entry and held through the
    stages so the stage vector field stays smooth.
    """
    p = tuple(params)
    i_d, i_q, x, xd = y
    br = _resolve_branch(xd, branch, p[11])

    a1, b1, c1, d1 = _derivs(i_d, i_q, xd, v_d, v_q, f_load, br, p)
    h = 0.5 * dt
    a2, b2, c2, d2 = _derivs(i_d + h * a1, i_q + h * b1, xd + h * d1, v_d, v_q, f_load, br, p)
    a3, b3, c3, d3 = _derivs(i_d + h * a2, i_q + h * b2, xd + h * d2, v_d, v_q, f_load, br, p)
    a4, b4, c4, d4 = _derivs(i_d + dt * a3, i_q + dt * b3, xd + dt * d3, v_d, v_q, f_load, br, p)

    s = dt / 6.0
    y_new = (
        i_d + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        i_q + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        x + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
        xd + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4),
    )
    return y_new, br


def run_const_input(y, branch, v_d, v_q, f_load, dt, n_steps, params):
    """n_steps RK4 updates with constant (v_d, v_q, F_L)."""
    for _ in range(n_steps):
        y, branch = rk4_step(y, branch, v_d, v_q, f_load, dt, params)
    return y, branch


def run_trace(y, branch, v_d_arr, v_q_arr, f_arr, dt, params, out):
    """Simulate with per-step inputs, filling out[k] = post-step
    (i_d, i_q, x_L, xdot_L, tau_e, omega_m). Returns (y, branch)."""
    p = tuple(params)
    n = len(v_d_arr)
    for k in range(n):
        y, branch = rk4_step(y, branch, v_d_arr[k], v_q_arr[k], f_arr[k], dt, p)
        i_d, i_q, x, xd = y
        tau_e = 1.5 * p[3] * (p[4] * i_q + (p[1] - p[2]) * i_d * i_q)
        out[k, 0] = i_d
        out[k, 1] = i_q
        out[k, 2] = x
        out[k, 3] = xd
        out[k, 4] = tau_e
        out[k, 5] = xd * p[7]
    return y, branch


def run_velocity_servo(y, branch, params, ctrl, omega_ref, f_load, tau_ff,
                       dt, max_steps, ss_tol, ss_hold, avg_steps):
    """Closed-loop run to a mechanical steady state at (omega_ref, f_load).

    A feedback-linearising current controller with a proportional speed
    loop drives the actuator; once |xddot| stays below ss_tol for ss_hold
    consecutive steps, quantities are averaged over avg_steps more steps.

    ctrl = (k_c, k_w, iq_max, v_max): current gain [V/A], speed gain
    [A/(rad/s)], current and voltage clamps.

    Returns (status, eta, y, branch, (xdot_mean, pelec_mean, taue_mean,
    omega_mean, id_mean, iq_mean)).
    """
    p = tuple(params)
    k_c, k_w, iq_max, v_max = ctrl
    iq_ff = tau_ff / (1.5 * p[3] * p[4])

    hold = 0
    averaging = 0
    s_xdot = s_pelec = s_taue = s_omega = s_id = s_iq = 0.0

    for _ in range(max_steps):
        i_d, i_q, x, xd = y
        omega = xd * p[7]
        iq_ref = iq_ff + k_w * (omega_ref - omega)
        if iq_ref > iq_max:
            iq_ref = iq_max
        elif iq_ref < -iq_max:
            iq_ref = -iq_max
        v_d = p[0] * i_d - p[2] * p[3] * omega * i_q - k_c * i_d
        v_q = p[0] * i_q + p[1] * p[3] * omega * i_d + p[3] * p[4] * omega \
            + k_c * (iq_ref - i_q)
        if v_d > v_max:
            v_d = v_max
        elif v_d < -v_max:
            v_d = -v_max
        if v_q > v_max:
            v_q = v_max
        elif v_q < -v_max:
            v_q = -v_max

        y, branch = rk4_step(y, branch, v_d, v_q, f_load, dt, p)
        i_d, i_q, x, xd = y
        if not (i_d == i_d and xd == xd) or abs(xd) > 1e6:
            return SERVO_NONFINITE, 0.0, y, branch, (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

        if averaging:
            tau_e = 1.5 * p[3] * (p[4] * i_q + (p[1] - p[2]) * i_d * i_q)
            s_xdot += xd
            s_pelec += 1.5 * (v_d * i_d + v_q * i_q)
            s_taue += tau_e
            s_omega += xd * p[7]
            s_id += i_d
            s_iq += i_q
            averaging += 1
            if averaging > avg_steps:
                m = float(avg_steps)
                xdot_mean = s_xdot / m
                pelec_mean = s_pelec / m
                eta = 0.0
                if pelec_mean > 0.0:
                    eta = f_load * xdot_mean / pelec_mean
                return SERVO_OK, eta, y, branch, (
                    xdot_mean, pelec_mean, s_taue / m, s_omega / m, s_id / m, s_iq / m)
        else:
            _, _, _, acc = _derivs(i_d, i_q, xd, v_d, v_q, f_load, branch, p)
            if -ss_tol < acc < ss_tol:
                hold += 1
                if hold >= ss_hold:
                    averaging = 1
            else:
                hold = 0

    return SERVO_NO_STEADY, 0.0, y, branch, (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
