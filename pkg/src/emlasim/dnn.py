"""Steady-state efficiency dataset and feedforward surrogate.

Builds the feasibility-filtered (load force, load velocity, actuator
parameters) -> efficiency dataset, either by running the actuator servo
simulation to steady state or from the analytic steady-state map, then
trains a small tanh network to serve sub-millisecond efficiency queries
inside the optimizer.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import emla

FEATURES = ("F_L", "xdot_L", "P_N", "tau_n", "n_n", "eta_N", "N_g", "rho")
HIDDEN_LAYERS = (64, 32, 16, 4)


@dataclass
class EffDataset:
    """Feature matrix X (per FEATURES), efficiency labels Y in (0, 1]."""

    X: np.ndarray
    Y: np.ndarray
    motor_ids: list = field(default_factory=list)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(FEATURES):
            raise ValueError(f"X must be N x {len(FEATURES)}")
        if len(self.Y) != len(self.X):
            raise ValueError("X and Y row counts differ")

    def to_csv(self, path, manifest_hash: str | None = None) -> None:
        with open(path, "w") as f:
            if manifest_hash:
                f.write(f"# run_manifest: {manifest_hash}\n")
            f.write("motor_id," + ",".join(FEATURES) + ",eta\n")
            for mid, x, y in zip(self.motor_ids, self.X, self.Y):
                f.write(mid + "," + ",".join(f"{v:.12g}" for v in x)
                        + f",{y:.12g}\n")

    @classmethod
    def from_csv(cls, path) -> "EffDataset":
        ids, rows = [], []
        with open(path) as f:
            for line in f:
                if line.startswith("#") or line.startswith("motor_id"):
                    continue
                parts = line.strip().split(",")
                ids.append(parts[0])
                rows.append([float(v) for v in parts[1:]])
        arr = np.asarray(rows)
        return cls(X=arr[:, :-1], Y=arr[:, -1], motor_ids=ids)


def feasible_power(motor: emla.MotorCatalogEntry, trans: emla.TransmissionParams) -> float:
    """Available load power eta_N * eta_t+ * P_N used by the dataset filter."""
    return motor.eta_N * emla.transmission_efficiency(trans, +1) * motor.P_N


def analytic_total_efficiency(F: float, v: float, cfg: emla.EmlaConfig) -> float:
    """Steady-state efficiency including copper loss, from the analytic map."""
    m = cfg.motor
    p = emla.pack_params(cfg)
    tau = emla.m2l_inverse_torque(F, v, cfg)
    omega = v * p[7]
    i_q = tau / (1.5 * m.P * m.psi_f)
    p_elec = tau * omega + 1.5 * m.r_s * i_q * i_q
    if p_elec <= 0.0:
        return 0.0
    return float(np.clip(F * v / p_elec, 0.0, 1.0))


def generate_dataset(catalog, f_grid, v_grid, ng_grid, rho_grid,
                     mu: float = 0.04, r_m: float = 0.012,
                     gear_model: emla.GearboxModel | None = None,
                     M_t: float = 150.0, labeler: str = "sim",
                     dt: float = emla.DT_DEFAULT) -> EffDataset:
    """Grid sweep with the power-feasibility filter.

    Infeasible tuples (available power not above F*v) are skipped; feasible
    ones are labelled either by the steady-state servo simulation
    (labeler="sim") or the analytic map (labeler="analytic").
    """
    if labeler not in ("sim", "analytic"):
        raise ValueError("labeler must be 'sim' or 'analytic'")
    gear_model = gear_model or emla.GearboxModel()
    rows, labels, ids = [], [], []
    skipped_unconverged = 0
    for motor in catalog:
        for N_g in ng_grid:
            for rho in rho_grid:
                trans = emla.TransmissionParams(N_g=N_g, rho=rho, mu=mu,
                                                r_m=r_m, eta_g_model=gear_model)
                cfg = emla.EmlaConfig(motor=motor, trans=trans, M_t=M_t)
                p_avail = feasible_power(motor, trans)
                for F in f_grid:
                    for v in v_grid:
                        if p_avail <= F * v:
                            continue
                        if labeler == "analytic":
                            eta = analytic_total_efficiency(F, v, cfg)
                        else:
                            ok, eta, _ = emla.simulate_to_steady(cfg, F, v, dt=dt)
                            if not ok:
                                skipped_unconverged += 1
                                continue
                        rows.append([F, v, motor.P_N, motor.tau_n, motor.n_n,
                                     motor.eta_N, N_g, rho])
                        labels.append(eta)
                        ids.append(motor.id)
    if skipped_unconverged:
        warnings.warn(f"{skipped_unconverged} feasible tuples did not reach "
                      "steady state and were skipped")
    if not rows:
        raise ValueError("no feasible tuples in the requested grids")
    return EffDataset(X=np.asarray(rows), Y=np.asarray(labels), motor_ids=ids)


# ---------------------------------------------------------------------------
# Min-max normalization


@dataclass
class MinMaxScaler:
    """Per-column affine map onto [-1, 1]; constant columns map to 0."""

    lo: np.ndarray
    hi: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "MinMaxScaler":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) < 2:
            raise ValueError("need at least 2 rows to fit a normalizer")
        lo, hi = X.min(axis=0), X.max(axis=0)
        constant = hi <= lo
        if constant.any():
            warnings.warn("constant feature column mapped to 0")
        return cls(lo=lo, hi=hi, constant=constant)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = np.where(self.constant, 1.0, self.hi - self.lo)
        out = 2.0 * (X - self.lo) / span - 1.0
        return np.where(self.constant, 0.0, out)

    def inverse(self, Xn: np.ndarray) -> np.ndarray:
        Xn = np.asarray(Xn, dtype=float)
        span = np.where(self.constant, 0.0, self.hi - self.lo)
        return self.lo + 0.5 * (Xn + 1.0) * span


def minmax_normalize(X: np.ndarray):
    scaler = MinMaxScaler.fit(X)
    return scaler.transform(X), scaler


# ---------------------------------------------------------------------------
# Feedforward network


@dataclass
class MlpModel:
    """Tanh-hidden, linear-output network with its input/output normalizers."""

    weights: list
    biases: list
    x_set: MinMaxScaler
    y_set: MinMaxScaler
    metrics: dict = field(default_factory=dict)

    def forward_normalized(self, Xn: np.ndarray) -> np.ndarray:
        a = Xn
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ W + b
            if i != last:
                a = np.tanh(a)
        return a[:, 0]

    def save(self, path) -> None:
        payload = {
            "layer_sizes": [W.shape[0] for W in self.weights] + [1],
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_lo": self.x_set.lo.tolist(), "x_hi": self.x_set.hi.tolist(),
            "y_lo": self.y_set.lo.tolist(), "y_hi": self.y_set.hi.tolist(),
            "features": list(FEATURES),
            "metrics": self.metrics,
        }
        with open(path, "w") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path) as f:
            d = json.load(f)
        x_set = MinMaxScaler(lo=np.array(d["x_lo"]), hi=np.array(d["x_hi"]),
                             constant=np.array(d["x_hi"]) <= np.array(d["x_lo"]))
        y_set = MinMaxScaler(lo=np.array(d["y_lo"]), hi=np.array(d["y_hi"]),
                             constant=np.array(d["y_hi"]) <= np.array(d["y_lo"]))
        return cls(weights=[np.array(W) for W in d["weights"]],
                   biases=[np.array(b) for b in d["biases"]],
                   x_set=x_set, y_set=y_set, metrics=d.get("metrics", {}))


def predict_efficiency(model: MlpModel, x) -> np.ndarray | float:
    """Efficiency prediction, denormalized and clamped to [0, 1]."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != len(FEATURES):
        raise ValueError(f"expected {len(FEATURES)} features, got {X.shape[1]}")
    yn = model.forward_normalized(model.x_set.transform(X))
    y = model.y_set.inverse(yn[:, None])[:, 0]
    y = np.clip(y, 0.0, 1.0)
    return float(y[0]) if single else y


def _mae(model: MlpModel, Xn, y) -> float:
    yn = model.forward_normalized(Xn)
    pred = np.clip(model.y_set.inverse(yn[:, None])[:, 0], 0.0, 1.0)
    return float(np.mean(np.abs(pred - y)))


def train_mlp(data: EffDataset, seed: int = 0,
              hidden=HIDDEN_LAYERS, split=(0.70, 0.15, 0.15),
              lr: float = 2e-3, batch_size: int = 64,
              max_epochs: int = 600, patience: int = 50,
              min_rows: int = 100) -> MlpModel:
    """Mini-batch Adam with early stopping on validation MAE.

    Deterministic for a given seed and dataset; the returned model carries
    train/val/test MAE (efficiency fraction) in .metrics.
    """
    n = len(data.X)
    if n < min_rows:
        raise ValueError(f"need at least {min_rows} rows, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(split[0] * n)
    n_val = int(split[1] * n)
    idx_train = perm[:n_train]
    idx_val = perm[n_train:n_train + n_val]
    idx_test = perm[n_train + n_val:]

    x_set = MinMaxScaler.fit(data.X[idx_train])
    y_set = MinMaxScaler.fit(data.Y[idx_train][:, None])
    Xn = {k: x_set.transform(data.X[i]) for k, i in
          (("train", idx_train), ("val", idx_val), ("test", idx_test))}
    Yn_train = y_set.transform(data.Y[idx_train][:, None])[:, 0]

    sizes = [len(FEATURES), *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    model = MlpModel(weights=weights, biases=biases, x_set=x_set, y_set=y_set)

    m_w = [np.zeros_like(W) for W in weights]
    v_w = [np.zeros_like(W) for W in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_val = math.inf
    best = None
    stall = 0
    last = len(weights) - 1

    for epoch in range(max_epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = Xn["train"][idx], Yn_train[idx]

            acts = [xb]
            a = xb
            for i, (W, b) in enumerate(zip(weights, biases)):
                z = a @ W + b
                a = z if i == last else np.tanh(z)
                acts.append(a)
            err = acts[-1][:, 0] - yb
            delta = (2.0 / len(idx)) * err[:, None]

            step += 1
            lr_t = lr * math.sqrt(1 - beta2 ** step) / (1 - beta1 ** step)
            for i in range(last, -1, -1):
                gW = acts[i].T @ delta
                gb = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ weights[i].T) * (1.0 - acts[i] ** 2)
                m_w[i] = beta1 * m_w[i] + (1 - beta1) * gW
                v_w[i] = beta2 * v_w[i] + (1 - beta2) * gW * gW
                m_b[i] = beta1 * m_b[i] + (1 - beta1) * gb
                v_b[i] = beta2 * v_b[i] + (1 - beta2) * gb * gb
                weights[i] -= lr_t * m_w[i] / (np.sqrt(v_w[i]) + eps)
                biases[i] -= lr_t * m_b[i] / (np.sqrt(v_b[i]) + eps)

        val_mae = _mae(model, Xn["val"], data.Y[idx_val])
        if val_mae < best_val - 1e-7:
            best_val = val_mae
            best = ([W.copy() for W in weights], [b.copy() for b in biases])
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                break

    if best is not None:
        model.weights, model.biases = best
    model.metrics = {
        "train_mae": _mae(model, Xn["train"], data.Y[idx_train]),
        "val_mae": _mae(model, Xn["val"], data.Y[idx_val]),
        "test_mae": _mae(model, Xn["test"], data.Y[idx_test]),
        "epochs": epoch + 1,
        "n_train": int(n_train), "n_val": int(n_val), "n_test": len(idx_test),
        "converged": bool(best is not None),
        "seed": int(seed),
    }
    if model.metrics["test_mae"] > 0.02:
        warnings.warn(
            f"surrogate test MAE {model.metrics['test_mae']:.4f} above the "
            "0.02 target; returning best weights anyway")
    return model
