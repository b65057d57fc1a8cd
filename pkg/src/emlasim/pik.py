"""Physics-informed Kriging of load-side actuator quantities.

Four independent zero-mean Gaussian processes learn the residuals between
measured load-side outputs (force, velocity, efficiency, phase-current
amplitude) and the analytic steady-state motor-to-load map, over the
normalized (torque, speed) plane. Prediction adds the analytic map back,
so far from data the surrogate reverts to physics.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from . import emla

OUTPUTS = ("F_L", "xdot_L", "eta", "i_abc")  # prediction column order
JITTER_INIT = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class GpHyperparams:
    """ARD squared-exponential hyperparameters (all strictly positive)."""

    ell: np.ndarray       # length scale per input dimension
    sigma_f: float        # signal standard deviation
    sigma_n: float        # noise standard deviation

    def __post_init__(self):
        object.__setattr__(self, "ell", np.asarray(self.ell, dtype=float))
        if np.any(self.ell <= 0) or self.sigma_f <= 0 or self.sigma_n < 0:
            raise ValueError("hyperparameters must be positive")

    def log_vector(self) -> np.ndarray:
        return np.log(np.concatenate([self.ell, [self.sigma_f, self.sigma_n]]))

    @classmethod
    def from_log_vector(cls, v) -> "GpHyperparams":
        v = np.exp(np.asarray(v, dtype=float))
        return cls(ell=v[:-2], sigma_f=float(v[-2]), sigma_n=float(v[-1]))


def ard_kernel(x, x2, hp: GpHyperparams) -> float:
    """sigma_f^2 exp(-1/2 sum((x-x')^2 / ell^2)) for a single pair."""
    d = (np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)) / hp.ell
    return hp.sigma_f ** 2 * math.exp(-0.5 * float(d @ d))


def _kernel_matrix(X, X2, hp: GpHyperparams) -> np.ndarray:
    D = np.zeros((len(X), len(X2)))
    for j in range(X.shape[1]):
        D += ((X[:, j, None] - X2[None, :, j]) / hp.ell[j]) ** 2
    return hp.sigma_f ** 2 * np.exp(-0.5 * D)


def _chol_with_jitter(K_noisy, sigma_f):
    jitter = JITTER_INIT
    while True:
        try:
            L = cholesky(K_noisy + jitter * sigma_f ** 2 * np.eye(len(K_noisy)),
                         lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > JITTER_MAX:
                raise np.linalg.LinAlgError(
                    "covariance not positive definite even at maximum jitter")


def log_marginal_likelihood(X, y, hp: GpHyperparams, with_grad: bool = False):
    """lnL of zero-mean observations y under the noisy ARD-SE covariance.

    When with_grad is set, also returns the gradient with respect to the
    log-hyperparameters (log ell_j, log sigma_f, log sigma_n).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    K_se = _kernel_matrix(X, X, hp)
    L, _ = _chol_with_jitter(K_se + hp.sigma_n ** 2 * np.eye(n), hp.sigma_f)
    alpha = cho_solve((L, True), y)
    lnl = (-0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L))))
           - 0.5 * n * math.log(2.0 * math.pi))
    if not with_grad:
        return lnl
    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty(len(hp.ell) + 2)
    for j in range(len(hp.ell)):
        Dj = ((X[:, j, None] - X[None, :, j]) / hp.ell[j]) ** 2
        grad[j] = 0.5 * float(np.sum(W * (K_se * Dj)))
    grad[-2] = 0.5 * float(np.sum(W * (2.0 * K_se)))
    grad[-1] = 0.5 * float(np.trace(W)) * 2.0 * hp.sigma_n ** 2
    return lnl, grad


@dataclass
class FittedGp:
    """One trained residual process: inputs, factors and hyperparameters."""

    X: np.ndarray            # normalized training inputs
    y: np.ndarray            # residuals
    hp: GpHyperparams
    L: np.ndarray = field(repr=False, default=None)
    alpha: np.ndarray = field(repr=False, default=None)
    lnl: float = 0.0

    def finalize(self) -> "FittedGp":
        K = _kernel_matrix(self.X, self.X, self.hp) \
            + self.hp.sigma_n ** 2 * np.eye(len(self.y))
        self.L, _ = _chol_with_jitter(K, self.hp.sigma_f)
        self.alpha = cho_solve((self.L, True), self.y)
        self.lnl = log_marginal_likelihood(self.X, self.y, self.hp)
        return self

    def predict(self, X_star):
        """Residual mean and predictive standard deviation at query points.

        The variance is that of a new observation under the noise-aware
        covariance: k(x*, x*) = sigma_f^2 + sigma_n^2 minus the explained
        part, so bands stay calibrated against measured data.
        """
        C = _kernel_matrix(self.X, np.asarray(X_star, dtype=float), self.hp)
        mean = C.T @ self.alpha
        V = solve_triangular(self.L, C, lower=True)
        var = self.hp.sigma_f ** 2 + self.hp.sigma_n ** 2 - np.sum(V * V, axis=0)
        return mean, np.sqrt(np.maximum(var, 0.0))


def fit_gp(X_norm, residuals, seed: int = 0, n_starts: int = 5,
           fixed_noise: float | None = None) -> FittedGp:
    """Maximize lnL by L-BFGS-B in log space with multi-starts.

    The first start follows the data's standard deviations; the rest are
    seeded log-normal perturbations of it. fixed_noise pins sigma_n
    instead of optimizing it.
    """
    X = np.asarray(X_norm, dtype=float)
    y = np.asarray(residuals, dtype=float)
    if len(y) < 4:
        raise ValueError("need at least 4 samples to fit")
    scale = float(np.std(y)) or 1.0
    rng = np.random.default_rng(seed)
    d = X.shape[1]

    base = np.log(np.concatenate([
        np.maximum(np.std(X, axis=0), 0.3),
        [scale, fixed_noise if fixed_noise is not None else 0.1 * scale]]))
    lo = np.concatenate([np.full(d, math.log(1e-2)),
                         [math.log(1e-6 * scale), math.log(1e-9 * scale)]])
    hi = np.concatenate([np.full(d, math.log(1e3)),
                         [math.log(1e3 * scale), math.log(10.0 * scale)]])
    if fixed_noise is not None:
        lo[-1] = hi[-1] = math.log(fixed_noise)

    def objective(v):
        lnl, grad = log_marginal_likelihood(X, y, GpHyperparams.from_log_vector(v),
                                            with_grad=True)
        return -lnl, -grad

    best = None
    failures = []
    for k in range(n_starts):
        v0 = base if k == 0 else base + rng.normal(scale=0.7, size=base.shape)
        v0 = np.clip(v0, lo, hi)
        try:
            res = minimize(objective, v0, jac=True, method="L-BFGS-B",
                           bounds=list(zip(lo, hi)))
        except np.linalg.LinAlgError as e:
            failures.append(str(e))
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise RuntimeError(f"all {n_starts} fit starts failed: {failures}")
    return FittedGp(X=X, y=y, hp=GpHyperparams.from_log_vector(best.x)).finalize()


# ---------------------------------------------------------------------------
# Residual dataset


@dataclass
class ResidualDataset:
    """Raw motor-side inputs, per-output residuals and normalization stats."""

    X_raw: np.ndarray     # (N, 2): torque, angular speed
    residuals: dict       # output tag -> (N,)
    measured: dict        # output tag -> (N,)
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def X_norm(self) -> np.ndarray:
        return (self.X_raw - self.mu) / self.sigma


def compute_residuals(samples: dict, cfg: emla.EmlaConfig) -> ResidualDataset:
    """Residuals measured - M2L at each (tau_e, omega_m) operating point.

    samples carries arrays tau_e, omega_m, F_L, xdot_L, eta, i_abc.
    Duplicate (tau_e, omega_m) rows are merged by averaging.
    """
    tau = np.asarray(samples["tau_e"], dtype=float)
    omega = np.asarray(samples["omega_m"], dtype=float)
    if len(tau) < 4:
        raise ValueError("need at least 4 distinct operating points")
    meas = {q: np.asarray(samples[q], dtype=float) for q in OUTPUTS}

    X = np.column_stack([tau, omega])
    uniq, inverse, counts = np.unique(X, axis=0, return_inverse=True,
                                      return_counts=True)
    if len(uniq) < len(X):
        warnings.warn(f"merged {len(X) - len(uniq)} duplicate operating "
                      "points by averaging")
        meas = {q: np.bincount(inverse, weights=v) / counts
                for q, v in meas.items()}
        X = uniq
    if len(X) < 4:
        raise ValueError("need at least 4 distinct operating points")

    F_p, xd_p, eta_p, iabc_p = emla.m2l_batch(X[:, 0], X[:, 1], cfg)
    phys = {"F_L": F_p, "xdot_L": xd_p, "eta": eta_p, "i_abc": iabc_p}
    residuals = {q: meas[q] - phys[q] for q in OUTPUTS}
    mu = X.mean(axis=0)
    sigma = X.std(axis=0, ddof=1)
    if np.any(sigma <= 0):
        raise ValueError("degenerate operating-point spread")
    return ResidualDataset(X_raw=X, residuals=residuals, measured=meas,
                           mu=mu, sigma=sigma)


def extract_operating_points(trace: emla.SimTrace, v_range: float = 0.07,
                             min_hold: float = 0.5,
                             rate_frac: float = 0.01) -> dict:
    """Steady-window averaging of a sampled stream.

    Windows where |dv/dt| stays below rate_frac * v_range per second for at
    least min_hold seconds are averaged into one operating point each.
    """
    dt = float(np.median(np.diff(trace.t)))
    dvdt = np.gradient(trace.xdot_L, trace.t)
    steady = np.abs(dvdt) < rate_frac * v_range
    min_len = int(min_hold / dt)
    p_elec = 1.5 * (trace.v_d * trace.i_d + trace.v_q * trace.i_q)
    i_amp = np.hypot(trace.i_d, trace.i_q)

    rows = {k: [] for k in ("tau_e", "omega_m", "F_L", "xdot_L", "eta", "i_abc")}
    k = 0
    n = len(steady)
    while k < n:
        if not steady[k]:
            k += 1
            continue
        j = k
        while j < n and steady[j]:
            j += 1
        if j - k >= min_len:
            sl = slice(k, j)
            p_in = float(np.mean(p_elec[sl]))
            p_out = float(np.mean(trace.F_L[sl] * trace.xdot_L[sl]))
            rows["tau_e"].append(float(np.mean(trace.tau_e[sl])))
            rows["omega_m"].append(float(np.mean(trace.omega_m[sl])))
            rows["F_L"].append(float(np.mean(trace.F_L[sl])))
            rows["xdot_L"].append(float(np.mean(trace.xdot_L[sl])))
            rows["eta"].append(p_out / p_in if p_in > 0 else 0.0)
            rows["i_abc"].append(float(np.mean(i_amp[sl])))
        k = j
    return {k: np.asarray(v) for k, v in rows.items()}


# ---------------------------------------------------------------------------
# The four-output surrogate


@dataclass
class PikModel:
    """Residual GPs around the analytic map, plus normalization stats."""

    cfg: emla.EmlaConfig
    gps: dict             # output tag -> FittedGp
    mu: np.ndarray
    sigma: np.ndarray

    def predict(self, tau_e, omega_m):
        """(Y_pred, S) with columns ordered per OUTPUTS.

        Y_pred = analytic map + residual mean; S is the predictive standard
        deviation of each residual process.
        """
        tau = np.atleast_1d(np.asarray(tau_e, dtype=float))
        omega = np.atleast_1d(np.asarray(omega_m, dtype=float))
        if tau.shape != omega.shape:
            raise ValueError("tau_e and omega_m shapes differ")
        X_raw = np.column_stack([tau, omega])
        Xn = (X_raw - self.mu) / self.sigma
        F_p, xd_p, eta_p, iabc_p = emla.m2l_batch(tau, omega, self.cfg)
        phys = np.column_stack([F_p, xd_p, eta_p, iabc_p])
        Y = np.empty_like(phys)
        S = np.empty_like(phys)
        for k, q in enumerate(OUTPUTS):
            r, s = self.gps[q].predict(Xn)
            Y[:, k] = phys[:, k] + r
            S[:, k] = s
        return Y, S

    def save(self, path) -> None:
        payload = {
            "config": {
                "motor": {k: getattr(self.cfg.motor, k) for k in emla.MOTOR_FIELDS},
                "trans": {"N_g": self.cfg.trans.N_g, "rho": self.cfg.trans.rho,
                          "mu": self.cfg.trans.mu, "r_m": self.cfg.trans.r_m,
                          "eta_g_model": {
                              "eta_stage": self.cfg.trans.eta_g_model.eta_stage,
                              "r_cap": self.cfg.trans.eta_g_model.r_cap}},
                "M_t": self.cfg.M_t,
            },
            "mu": self.mu.tolist(), "sigma": self.sigma.tolist(),
            "outputs": {},
        }
        for q, gp in self.gps.items():
            payload["outputs"][q] = {
                "X": gp.X.tolist(), "y": gp.y.tolist(),
                "ell": gp.hp.ell.tolist(), "sigma_f": gp.hp.sigma_f,
                "sigma_n": gp.hp.sigma_n, "alpha": gp.alpha.tolist(),
                "lnl": gp.lnl,
            }
        with open(path, "w") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path) -> "PikModel":
        with open(path) as f:
            d = json.load(f)
        cfg = emla.config_from_dict(d["config"])
        gps = {}
        for q, g in d["outputs"].items():
            hp = GpHyperparams(ell=np.array(g["ell"]), sigma_f=g["sigma_f"],
                               sigma_n=g["sigma_n"])
            gps[q] = FittedGp(X=np.array(g["X"]), y=np.array(g["y"]),
                              hp=hp).finalize()
        return cls(cfg=cfg, gps=gps, mu=np.array(d["mu"]),
                   sigma=np.array(d["sigma"]))


def collect_testbed_points(plant_cfg: emla.EmlaConfig, f_levels, v_levels,
                           noise: dict | None = None, seed: int = 0,
                           dt: float = emla.DT_DEFAULT) -> dict:
    """Steady-state operating points from servo runs over a (F, v) grid.

    Each grid cell is driven to steady state on the (possibly perturbed)
    plant; averaged motor- and load-side quantities form one measured
    sample. Gaussian measurement noise per output is optional.
    """
    noise = noise or {}
    rng = np.random.default_rng(seed)
    rows = {k: [] for k in ("tau_e", "omega_m", "F_L", "xdot_L", "eta", "i_abc")}
    for F in np.asarray(f_levels, dtype=float):
        for v in np.asarray(v_levels, dtype=float):
            ok, eta, diag = emla.simulate_to_steady(plant_cfg, F, v, dt=dt)
            if not ok:
                warnings.warn(f"operating point ({F:.0f} N, {v:.3f} m/s) "
                              "did not settle; skipped")
                continue
            xdot_m, _, tau_m, omega_m, id_m, iq_m = diag
            rows["tau_e"].append(tau_m)
            rows["omega_m"].append(omega_m)
            rows["F_L"].append(F + rng.normal(0.0, noise.get("F_L", 0.0)))
            rows["xdot_L"].append(xdot_m + rng.normal(0.0, noise.get("xdot_L", 0.0)))
            rows["eta"].append(eta + rng.normal(0.0, noise.get("eta", 0.0)))
            rows["i_abc"].append(math.hypot(id_m, iq_m)
                                 + rng.normal(0.0, noise.get("i_abc", 0.0)))
    if len(rows["tau_e"]) < 4:
        raise ValueError("fewer than 4 operating points settled")
    return {k: np.asarray(v) for k, v in rows.items()}


def train_pik(data: ResidualDataset, cfg: emla.EmlaConfig, seed: int = 0,
              n_starts: int = 5) -> PikModel:
    """Fit the four residual processes; deterministic for a given seed."""
    gps = {}
    for k, q in enumerate(OUTPUTS):
        gps[q] = fit_gp(data.X_norm, data.residuals[q], seed=seed + 1000 * k,
                        n_starts=n_starts)
    return PikModel(cfg=cfg, gps=gps, mu=data.mu, sigma=data.sigma)


def pik_predict(model: PikModel, tau_e, omega_m):
    return model.predict(tau_e, omega_m)


def residual_percentage(measured, predicted) -> np.ndarray:
    """Signed percentage residual 100 (measured - predicted) / measured.

    Entries with measured == 0 are undefined and returned as NaN (excluded
    from residual maps).
    """
    m = np.atleast_1d(np.asarray(measured, dtype=float))
    p = np.atleast_1d(np.asarray(predicted, dtype=float))
    out = np.full(m.shape, np.nan)
    ok = m != 0.0
    out[ok] = 100.0 * (m[ok] - p[ok]) / m[ok]
    return out
