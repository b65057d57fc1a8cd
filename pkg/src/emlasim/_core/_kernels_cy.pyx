# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled actuator kernels; mirrors _kernels_py exactly."""

SERVO_OK = 0
SERVO_NO_STEADY = 1
SERVO_NONFINITE = 2


cdef inline double _accel(double tau_e, double xdot, double f_load,
                          int branch, const double* p) noexcept nogil:
    # stiction inside the deadband: hold unless the friction-free drive
    # can break away
    cdef double f_net0, f_break, f_drive
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


cdef inline void _derivs(double i_d, double i_q, double xdot,
                         double v_d, double v_q, double f_load,
                         int branch, const double* p, double* dy) noexcept nogil:
    cdef double omega = xdot * p[7]
    cdef double tau_e
    dy[0] = (v_d - p[0] * i_d + p[2] * p[3] * omega * i_q) / p[1]
    dy[1] = (v_q - p[0] * i_q - p[1] * p[3] * omega * i_d - p[3] * p[4] * omega) / p[2]
    tau_e = 1.5 * p[3] * (p[4] * i_q + (p[1] - p[2]) * i_d * i_q)
    dy[2] = xdot
    dy[3] = _accel(tau_e, xdot, f_load, branch, p)


cdef inline int _resolve_branch(double xdot, int branch, double deadband) noexcept nogil:
    if xdot > deadband:
        return 1
    if xdot < -deadband:
        return -1
    return branch


cdef inline int _rk4_step_c(double* y, int branch, double v_d, double v_q,
                            double f_load, double dt, const double* p) noexcept nogil:
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double h = 0.5 * dt
    cdef double s = dt / 6.0
    cdef int br = _resolve_branch(y[3], branch, p[11])

    _derivs(y[0], y[1], y[3], v_d, v_q, f_load, br, p, k1)
    _derivs(y[0] + h * k1[0], y[1] + h * k1[1], y[3] + h * k1[3],
            v_d, v_q, f_load, br, p, k2)
    _derivs(y[0] + h * k2[0], y[1] + h * k2[1], y[3] + h * k2[3],
            v_d, v_q, f_load, br, p, k3)
    _derivs(y[0] + dt * k3[0], y[1] + dt * k3[1], y[3] + dt * k3[3],
            v_d, v_q, f_load, br, p, k4)

    y[0] = y[0] + s * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    y[1] = y[1] + s * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    y[2] = y[2] + s * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    y[3] = y[3] + s * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    return br


def rk4_step(y, int branch, double v_d, double v_q, double f_load,
             double dt, const double[::1] params):
    cdef double yy[4]
    yy[0] = y[0]; yy[1] = y[1]; yy[2] = y[2]; yy[3] = y[3]
    branch = _rk4_step_c(yy, branch, v_d, v_q, f_load, dt, &params[0])
    return (yy[0], yy[1], yy[2], yy[3]), branch


def run_const_input(y, int branch, double v_d, double v_q, double f_load,
                    double dt, int n_steps, const double[::1] params):
    cdef double yy[4]
    cdef int k
    yy[0] = y[0]; yy[1] = y[1]; yy[2] = y[2]; yy[3] = y[3]
    with nogil:
        for k in range(n_steps):
            branch = _rk4_step_c(yy, branch, v_d, v_q, f_load, dt, &params[0])
    return (yy[0], yy[1], yy[2], yy[3]), branch


def run_trace(y, int branch, const double[::1] v_d_arr, const double[::1] v_q_arr,
              const double[::1] f_arr, double dt, const double[::1] params,
              double[:, ::1] out):
    cdef double yy[4]
    cdef int k, n = v_d_arr.shape[0]
    cdef const double* p = &params[0]
    yy[0] = y[0]; yy[1] = y[1]; yy[2] = y[2]; yy[3] = y[3]
    with nogil:
        for k in range(n):
            branch = _rk4_step_c(yy, branch, v_d_arr[k], v_q_arr[k], f_arr[k], dt, p)
            out[k, 0] = yy[0]
            out[k, 1] = yy[1]
            out[k, 2] = yy[2]
            out[k, 3] = yy[3]
            out[k, 4] = 1.5 * p[3] * (p[4] * yy[1] + (p[1] - p[2]) * yy[0] * yy[1])
            out[k, 5] = yy[3] * p[7]
    return (yy[0], yy[1], yy[2], yy[3]), branch


def run_velocity_servo(y, int branch, const double[::1] params, ctrl,
                       double omega_ref, double f_load, double tau_ff,
                       double dt, int max_steps, double ss_tol, int ss_hold,
                       int avg_steps):
    cdef double yy[4]
    cdef double dy[4]
    cdef const double* p = &params[0]
    cdef double k_c = ctrl[0], k_w = ctrl[1], iq_max = ctrl[2], v_max = ctrl[3]
    cdef double iq_ff = tau_ff / (1.5 * p[3] * p[4])
    cdef int hold = 0, averaging = 0, k, status = 1  # SERVO_NO_STEADY
    cdef double s_xdot = 0.0, s_pelec = 0.0, s_taue = 0.0
    cdef double s_omega = 0.0, s_id = 0.0, s_iq = 0.0
    cdef double omega, iq_ref, v_d, v_q, tau_e, m, xdot_mean, pelec_mean, eta

    yy[0] = y[0]; yy[1] = y[1]; yy[2] = y[2]; yy[3] = y[3]

    with nogil:
        for k in range(max_steps):
            omega = yy[3] * p[7]
            iq_ref = iq_ff + k_w * (omega_ref - omega)
            if iq_ref > iq_max:
                iq_ref = iq_max
            elif iq_ref < -iq_max:
                iq_ref = -iq_max
            v_d = p[0] * yy[0] - p[2] * p[3] * omega * yy[1] - k_c * yy[0]
            v_q = p[0] * yy[1] + p[1] * p[3] * omega * yy[0] + p[3] * p[4] * omega \
                + k_c * (iq_ref - yy[1])
            if v_d > v_max:
                v_d = v_max
            elif v_d < -v_max:
                v_d = -v_max
            if v_q > v_max:
                v_q = v_max
            elif v_q < -v_max:
                v_q = -v_max

            branch = _rk4_step_c(yy, branch, v_d, v_q, f_load, dt, p)
            if not (yy[0] == yy[0] and yy[3] == yy[3]) or (yy[3] > 1e6 or yy[3] < -1e6):
                status = 2  # SERVO_NONFINITE
                break

            if averaging:
                tau_e = 1.5 * p[3] * (p[4] * yy[1] + (p[1] - p[2]) * yy[0] * yy[1])
                s_xdot += yy[3]
                s_pelec += 1.5 * (v_d * yy[0] + v_q * yy[1])
                s_taue += tau_e
                s_omega += yy[3] * p[7]
                s_id += yy[0]
                s_iq += yy[1]
                averaging += 1
                if averaging > avg_steps:
                    status = 0  # SERVO_OK
                    break
            else:
                _derivs(yy[0], yy[1], yy[3], v_d, v_q, f_load, branch, p, dy)
                if -ss_tol < dy[3] < ss_tol:
                    hold += 1
                    if hold >= ss_hold:
                        averaging = 1
                else:
                    hold = 0

    y_out = (yy[0], yy[1], yy[2], yy[3])
    if status == 0:
        m = <double>avg_steps
        xdot_mean = s_xdot / m
        pelec_mean = s_pelec / m
        eta = 0.0
        if pelec_mean > 0.0:
            eta = f_load * xdot_mean / pelec_mean
        return 0, eta, y_out, branch, (
            xdot_mean, pelec_mean, s_taue / m, s_omega / m, s_id / m, s_iq / m)
    return status, 0.0, y_out, branch, (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
