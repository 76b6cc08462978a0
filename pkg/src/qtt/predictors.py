"""Meta-learned performance and cost predictors.

The performance predictor is a deep-kernel GP: a small tanh MLP maps the
input (config encoding + dataset descriptor + fidelity + curve summary) to a
16-dim latent, where a Matérn-5/2 kernel with learned log-hyperparameters
defines a GP over validation IoU. The cost predictor is an MLP regressing
log per-epoch wall-clock seconds. All gradients are hand-derived; the
finite-difference checks below are the guard.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from . import kernels, meta_features, space
from .curves import CurveStore
from .meta_features import MetaFeatures, MetaStats
from .space import Configuration

HIDDEN = (64, 32)
LATENT_DIM = 16
INPUT_DIM = space.ENCODING_DIM + meta_features.N_FEATURES + 1 + 4
NOISE_FLOOR = 1e-6
COST_FLOOR_S = 0.1
PRIOR_MEAN = 0.5
CHECKPOINT_VERSION = 1


def featurize(config: Configuration, meta_vec: np.ndarray, epoch: int,
              history: Sequence[float]) -> np.ndarray:
    """Assemble one predictor input row.

    ``history`` holds the run's observed val_iou values for epochs
    1..epoch-1. The curve summary is (last, best, last-minus-previous,
    observed-epochs/10), all zero with no observations; fidelity is epoch/10.
    """
    if not 1 <= epoch <= 10:
        raise ValueError(f"epoch {epoch} outside [1, 10]")
    if len(history) != epoch - 1:
        raise ValueError(f"history length {len(history)} != epoch-1 ({epoch - 1})")
    config_vec = space.encode(config)
    return assemble_input(config_vec, meta_vec, epoch, history)


META_CLIP = 6.0  # dataset dims constant at meta-train time explode under the
                 # 1e-8 std floor on a deviating target; cap them at 6 sigma


def assemble_input(config_vec: np.ndarray, meta_vec: np.ndarray, epoch: int,
                   history: Sequence[float]) -> np.ndarray:
    if history:
        last = history[-1]
        best = max(history)
        delta = history[-1] - history[-2] if len(history) >= 2 else 0.0
        summary = (last, best, delta, len(history) / 10.0)
    else:
        summary = (0.0, 0.0, 0.0, 0.0)
    meta_vec = np.clip(meta_vec, -META_CLIP, META_CLIP)
    return np.concatenate([config_vec, meta_vec, [epoch / 10.0], summary])


# -- MLP with hand-derived backprop -------------------------------------------

@dataclass
class MLP:
    """[input -> 64 -> 32 -> out] with tanh hidden activations, linear output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int,
             out_scale: float = 1.0) -> "MLP":
        sizes = (n_in,) + HIDDEN + (n_out,)
        weights, biases = [], []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = 1.0 / math.sqrt(a)
            if i == len(sizes) - 2:
                scale *= out_scale
            weights.append(rng.normal(0.0, scale, size=(a, b)))
            biases.append(np.zeros(b))
        return cls(weights, biases)

    def forward(self, x: np.ndarray):
        h1 = np.tanh(x @ self.weights[0] + self.biases[0])
        h2 = np.tanh(h1 @ self.weights[1] + self.biases[1])
        out = h2 @ self.weights[2] + self.biases[2]
        return out, (x, h1, h2)

    def backward(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients [dW1, db1, dW2, db2, dW3, db3] for upstream dL/dout."""
        x, h1, h2 = cache
        d_w3 = h2.T @ grad_out
        d_b3 = grad_out.sum(axis=0)
        g2 = (grad_out @ self.weights[2].T) * (1.0 - h2 * h2)
        d_w2 = h1.T @ g2
        d_b2 = g2.sum(axis=0)
        g1 = (g2 @ self.weights[1].T) * (1.0 - h1 * h1)
        d_w1 = x.T @ g1
        d_b1 = g1.sum(axis=0)
        return [d_w1, d_b1, d_w2, d_b2, d_w3, d_b3]

    def params(self) -> list[np.ndarray]:
        return [self.weights[0], self.biases[0], self.weights[1], self.biases[1],
                self.weights[2], self.biases[2]]

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_json_dict(self) -> dict:
        return {"weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MLP":
        return cls([np.asarray(w, dtype=np.float64) for w in d["weights"]],
                   [np.asarray(b, dtype=np.float64) for b in d["biases"]])


class Adam:
    """Adam with decoupled weight decay, updated in place.

    ``decay_mask`` selects which parameter arrays decay (weight matrices;
    never biases or kernel hyperparameters). Decoupled decay keeps the tanh
    layers out of saturation, which would otherwise collapse the latent space
    into clusters and kill within-run discrimination on unseen datasets.
    """

    def __init__(self, params: list[np.ndarray], lr: float, weight_decay: float = 0.0,
                 decay_mask: Optional[Sequence[bool]] = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_mask = list(decay_mask) if decay_mask is not None else [False] * len(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v, decay in zip(params, grads, self.m, self.v, self.decay_mask):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
            if decay and self.weight_decay:
                p -= self.lr * self.weight_decay * p


# -- performance predictor (deep-kernel GP) ------------------------------------

@dataclass
class PerfPredictor:
    extractor: MLP
    log_lengthscale: float = math.log(3.0)
    log_signal_var: float = math.log(0.1)
    log_noise_raw: float = math.log(1e-2)  # noise var = NOISE_FLOOR + exp(.)
    # fitted state
    train_latent: Optional[np.ndarray] = None
    chol: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    # conditioning set kept in input space so it can be re-latched after load
    reservoir_x: Optional[np.ndarray] = None
    reservoir_y: Optional[np.ndarray] = None
    fit_info: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, seed: int) -> "PerfPredictor":
        rng = np.random.default_rng(seed)
        return cls(extractor=MLP.init(rng, INPUT_DIM, LATENT_DIM))

    # kernel hyperparameters, non-log
    @property
    def lengthscale(self) -> float:
        return math.exp(self.log_lengthscale)

    @property
    def signal_var(self) -> float:
        return math.exp(self.log_signal_var)

    @property
    def noise_var(self) -> float:
        return NOISE_FLOOR + math.exp(self.log_noise_raw)

    def copy(self) -> "PerfPredictor":
        return PerfPredictor(
            extractor=self.extractor.copy(),
            log_lengthscale=self.log_lengthscale,
            log_signal_var=self.log_signal_var,
            log_noise_raw=self.log_noise_raw,
            train_latent=None if self.train_latent is None else self.train_latent.copy(),
            chol=None if self.chol is None else self.chol.copy(),
            alpha=None if self.alpha is None else self.alpha.copy(),
            reservoir_x=None if self.reservoir_x is None else self.reservoir_x.copy(),
            reservoir_y=None if self.reservoir_y is None else self.reservoir_y.copy(),
            fit_info=dict(self.fit_info),
        )

    def latent(self, x: np.ndarray) -> np.ndarray:
        return self.extractor.forward(np.atleast_2d(x))[0]

    def condition(self, x: np.ndarray, y: np.ndarray) -> None:
        """Fix the GP posterior on (x, y); hyperparameters stay untouched."""
        z = self.latent(x)
        gram, _ = kernels.matern_gram(z, self.lengthscale, self.signal_var)
        lower = _chol_with_jitter(gram + self.noise_var * np.eye(len(z)))
        self.train_latent = z
        self.chol = lower
        self.alpha = cho_solve((lower, True), np.asarray(y, dtype=np.float64) - PRIOR_MEAN)

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """GP posterior (mean, variance) per row; the prior when unconditioned."""
        x = np.atleast_2d(x)
        if x.shape[1] != INPUT_DIM:
            raise ValueError(f"input dim {x.shape[1]} != {INPUT_DIM}")
        if self.chol is None:
            n = x.shape[0]
            return np.full(n, PRIOR_MEAN), np.full(n, self.signal_var)
        z = self.latent(x)
        k_star = kernels.matern_cross(self.train_latent, z, self.lengthscale, self.signal_var)
        mean = PRIOR_MEAN + k_star.T @ self.alpha
        v = solve_triangular(self.chol, k_star, lower=True)
        var = self.signal_var - np.einsum("ij,ij->j", v, v)
        return mean, np.clip(var, 0.0, self.signal_var)


def _chol_with_jitter(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter 1e-8 -> 1e-4 if needed."""
    try:
        return cholesky(mat, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8
    eye = np.eye(mat.shape[0])
    while jitter <= 1e-4:
        try:
            lower = cholesky(mat + jitter * eye, lower=True)
            import logging
            logging.getLogger(__name__).warning("kernel matrix needed jitter %g", jitter)
            return lower
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError("kernel matrix not positive definite at jitter 1e-4")


@dataclass
class CostPredictor:
    mlp: MLP
    fit_info: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, seed: int) -> "CostPredictor":
        rng = np.random.default_rng(seed)
        # small output head keeps the initial prediction spread near exp(0)=1s
        return cls(mlp=MLP.init(rng, INPUT_DIM, 1, out_scale=0.1))

    def copy(self) -> "CostPredictor":
        return CostPredictor(self.mlp.copy(), dict(self.fit_info))


def predict_perf(predictor: PerfPredictor, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return predictor.predict(x)


def predict_cost(predictor: CostPredictor, x: np.ndarray) -> np.ndarray:
    """Positive per-epoch cost in seconds, exp of the MLP's log-cost output."""
    x = np.atleast_2d(x)
    if x.shape[1] != INPUT_DIM:
        raise ValueError(f"input dim {x.shape[1]} != {INPUT_DIM}")
    out, _ = predictor.mlp.forward(x)
    return np.exp(out[:, 0])


# -- training ------------------------------------------------------------------

def gp_nll(predictor: PerfPredictor, x: np.ndarray, y: np.ndarray) -> float:
    """Negative log marginal likelihood of the batch under the current state."""
    z = predictor.latent(x)
    gram, _ = kernels.matern_gram(z, predictor.lengthscale, predictor.signal_var)
    ky = gram + predictor.noise_var * np.eye(len(z))
    lower = _chol_with_jitter(ky)
    resid = np.asarray(y, dtype=np.float64) - PRIOR_MEAN
    alpha = cho_solve((lower, True), resid)
    return float(0.5 * resid @ alpha + np.log(np.diag(lower)).sum()
                 + 0.5 * len(z) * math.log(2.0 * math.pi))


def _gp_nll_and_grads(predictor: PerfPredictor, x: np.ndarray, y: np.ndarray):
    """NLL plus gradients for the extractor parameters and the three
    kernel log-hyperparameters, in the order params() + [logls, logsv, lognoise]."""
    z, cache = predictor.extractor.forward(x)
    ls, sv = predictor.lengthscale, predictor.signal_var
    gram, dist = kernels.matern_gram(z, ls, sv)
    n = len(z)
    lower = _chol_with_jitter(gram + predictor.noise_var * np.eye(n))
    resid = np.asarray(y, dtype=np.float64) - PRIOR_MEAN
    alpha = cho_solve((lower, True), resid)
    nll = float(0.5 * resid @ alpha + np.log(np.diag(lower)).sum()
                + 0.5 * n * math.log(2.0 * math.pi))
    ky_inv = cho_solve((lower, True), np.eye(n))
    p = 0.5 * (ky_inv - np.outer(alpha, alpha))
    d_z, g_logls, g_logsv = kernels.matern_backward(p, z, dist, ls, sv)
    g_lognoise = math.exp(predictor.log_noise_raw) * float(np.trace(p))
    mlp_grads = predictor.extractor.backward(cache, d_z)
    return nll, mlp_grads + [np.array(g_logls), np.array(g_logsv), np.array(g_lognoise)]


def _mse_and_grads(mlp: MLP, x: np.ndarray, target: np.ndarray):
    out, cache = mlp.forward(x)
    err = out[:, 0] - target
    mse = float(np.mean(err * err))
    grad_out = (2.0 * err / len(err))[:, None]
    return mse, mlp.backward(cache, grad_out)


def _assemble_dataset(store: CurveStore, features: Mapping[str, MetaFeatures],
                      stats: MetaStats) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows (X, val_iou, log epoch cost) for every record, with each record's
    curve summary built from its own curve prefix."""
    missing = [ds for ds in store.dataset_ids() if ds not in features]
    if missing:
        raise KeyError(f"no meta-features for datasets: {missing}")
    meta_vecs = {ds: meta_features.normalize(features[ds], stats)
                 for ds in store.dataset_ids()}
    by_key: dict[tuple, list] = {}
    for record in store:
        by_key.setdefault(record.key(), []).append(record)
    rows, val, log_cost = [], [], []
    for key, records in by_key.items():
        config_vec = space.encode(records[0].config)
        meta_vec = meta_vecs[key[0]]
        history: list[float] = []
        for record in records:
            rows.append(assemble_input(config_vec, meta_vec, record.epoch, history))
            val.append(record.val_iou)
            log_cost.append(math.log(record.epoch_cost_s))
            history.append(record.val_iou)
    return np.asarray(rows), np.asarray(val), np.asarray(log_cost)


def _run_fit(params: list[np.ndarray], loss_and_grads, x: np.ndarray, y: np.ndarray,
             steps: int, lr: float, rng: np.random.Generator,
             batch_size: int = 256, eval_every: int = 25,
             weight_decay: float = 0.0, decay_mask: Optional[Sequence[bool]] = None) -> dict:
    """Minibatch Adam loop keeping the best parameters seen on a fixed held-in
    batch, so the returned state never scores worse than the initial one."""
    n = len(x)
    held = rng.choice(n, size=min(batch_size, n), replace=False)
    x_held, y_held = x[held], y[held]

    def snapshot():
        return [p.copy() for p in params]

    def restore(snap):
        for p, s in zip(params, snap):
            p[...] = s

    best_loss = loss_and_grads(x_held, y_held)[0]
    initial_loss = best_loss
    best_params = snapshot()
    opt = Adam(params, lr=lr, weight_decay=weight_decay, decay_mask=decay_mask)
    for step in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        loss, grads = loss_and_grads(x[idx], y[idx])
        if not math.isfinite(loss):
            raise RuntimeError(f"non-finite loss at step {step}")
        opt.step(params, grads)
        if step % eval_every == eval_every - 1 or step == steps - 1:
            held_loss = loss_and_grads(x_held, y_held)[0]
            if held_loss < best_loss:
                best_loss = held_loss
                best_params = snapshot()
    restore(best_params)
    return {"initial_held_loss": initial_loss, "final_held_loss": best_loss,
            "held_size": int(len(held))}


MLP_DECAY_MASK = (True, False, True, False, True, False)  # weights yes, biases no


def fit_perf(store: CurveStore, features: Mapping[str, MetaFeatures], stats: MetaStats,
             init: Optional[PerfPredictor] = None, steps: int = 300, lr: float = 1e-2,
             seed: int = 0, batch_size: int = 256, weight_decay: float = 1e-2,
             reservoir_size: int = 256) -> PerfPredictor:
    """Meta-train the deep-kernel GP by minibatch gradient descent on the GP
    negative log marginal likelihood; deterministic for a fixed seed.

    The returned predictor is conditioned on a seeded reservoir of up to
    ``reservoir_size`` training rows.
    """
    if len(store) == 0:
        raise ValueError("empty curve store")
    x, y, _ = _assemble_dataset(store, features, stats)
    rng = np.random.default_rng(seed)
    predictor = init.copy() if init is not None else PerfPredictor.fresh(seed)
    hyper = np.array([predictor.log_lengthscale, predictor.log_signal_var,
                      predictor.log_noise_raw])
    params = predictor.extractor.params() + [hyper[0:1], hyper[1:2], hyper[2:3]]

    def loss_and_grads(xb, yb):
        predictor.log_lengthscale = float(hyper[0])
        predictor.log_signal_var = float(hyper[1])
        predictor.log_noise_raw = float(hyper[2])
        return _gp_nll_and_grads(predictor, xb, yb)

    report = _run_fit(params, loss_and_grads, x, y, steps, lr, rng, batch_size,
                      weight_decay=weight_decay,
                      decay_mask=MLP_DECAY_MASK + (False, False, False))
    predictor.log_lengthscale = float(hyper[0])
    predictor.log_signal_var = float(hyper[1])
    predictor.log_noise_raw = float(hyper[2])
    predictor.fit_info = {"val_nll_per_point": report["final_held_loss"] / report["held_size"],
                          **report}
    idx = rng.choice(len(x), size=min(reservoir_size, len(x)), replace=False)
    predictor.reservoir_x = x[idx]
    predictor.reservoir_y = y[idx]
    predictor.condition(predictor.reservoir_x, predictor.reservoir_y)
    return predictor


def fit_cost(store: CurveStore, features: Mapping[str, MetaFeatures], stats: MetaStats,
             init: Optional[CostPredictor] = None, steps: int = 300, lr: float = 1e-2,
             seed: int = 0, batch_size: int = 256,
             weight_decay: float = 1e-2) -> CostPredictor:
    """Fit the cost MLP by minibatch Adam on MSE over log epoch cost."""
    if len(store) == 0:
        raise ValueError("empty curve store")
    x, _, log_cost = _assemble_dataset(store, features, stats)
    rng = np.random.default_rng(seed)
    predictor = init.copy() if init is not None else CostPredictor.fresh(seed)
    params = predictor.mlp.params()

    def loss_and_grads(xb, yb):
        return _mse_and_grads(predictor.mlp, xb, yb)

    report = _run_fit(params, loss_and_grads, x, log_cost, steps, lr, rng, batch_size,
                      weight_decay=weight_decay, decay_mask=MLP_DECAY_MASK)
    predictor.fit_info = {"val_mse": report["final_held_loss"], **report}
    return predictor


# -- finite-difference gradient checks -----------------------------------------

def _max_rel_err(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    a = np.concatenate([np.ravel(g) for g in analytic])
    b = np.concatenate([np.ravel(g) for g in numeric])
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return float(np.abs(a - b).max() / scale)


def _fd_grads(params: list[np.ndarray], loss_fn, h: float = 1e-5) -> list[np.ndarray]:
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            hi = loss_fn()
            flat_p[i] = orig - h
            lo = loss_fn()
            flat_p[i] = orig
            flat_g[i] = (hi - lo) / (2.0 * h)
        grads.append(g)
    return grads


def grad_check_cost_mlp(predictor: CostPredictor, x: np.ndarray, target: np.ndarray,
                        h: float = 1e-5) -> float:
    """Max relative error of MSE gradients vs central finite differences."""
    analytic = _mse_and_grads(predictor.mlp, x, target)[1]
    numeric = _fd_grads(predictor.mlp.params(),
                        lambda: _mse_and_grads(predictor.mlp, x, target)[0], h)
    return _max_rel_err(analytic, numeric)


def grad_check_perf_extractor(predictor: PerfPredictor, x: np.ndarray, y: np.ndarray,
                              h: float = 1e-5) -> float:
    """Max relative error of NLL gradients w.r.t. the feature extractor weights."""
    analytic = _gp_nll_and_grads(predictor, x, y)[1][:6]
    numeric = _fd_grads(predictor.extractor.params(), lambda: gp_nll(predictor, x, y), h)
    return _max_rel_err(analytic, numeric)


def grad_check_perf_kernel(predictor: PerfPredictor, x: np.ndarray, y: np.ndarray,
                           h: float = 1e-5) -> float:
    """Max relative error of NLL gradients w.r.t. the kernel log-hyperparameters."""
    analytic = _gp_nll_and_grads(predictor, x, y)[1][6:]
    numeric = []
    for attr in ("log_lengthscale", "log_signal_var", "log_noise_raw"):
        orig = getattr(predictor, attr)
        setattr(predictor, attr, orig + h)
        hi = gp_nll(predictor, x, y)
        setattr(predictor, attr, orig - h)
        lo = gp_nll(predictor, x, y)
        setattr(predictor, attr, orig)
        numeric.append(np.array((hi - lo) / (2.0 * h)))
    return _max_rel_err(analytic, numeric)


# -- checkpoint serialization ---------------------------------------------------

def save_checkpoint(path: str | Path, perf: PerfPredictor, cost: CostPredictor,
                    stats: MetaStats, dataset_ids: Sequence[str],
                    metrics: Optional[dict] = None) -> None:
    """Write one JSON checkpoint: predictors, meta stats, training dataset ids.

    Serialization is key-sorted and timestamp-free so identical fits produce
    byte-identical files.
    """
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "dataset_ids": list(dataset_ids),
        "meta_stats": stats.to_json_dict(),
        "perf": {
            "extractor": perf.extractor.to_json_dict(),
            "log_lengthscale": perf.log_lengthscale,
            "log_signal_var": perf.log_signal_var,
            "log_noise_raw": perf.log_noise_raw,
            "reservoir_x": None if perf.reservoir_x is None else perf.reservoir_x.tolist(),
            "reservoir_y": None if perf.reservoir_y is None else perf.reservoir_y.tolist(),
        },
        "cost": {"mlp": cost.mlp.to_json_dict()},
        "metrics": metrics or {},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> tuple[PerfPredictor, CostPredictor, MetaStats, dict]:
    """Read a checkpoint; the perf predictor comes back conditioned on its reservoir."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    p = payload["perf"]
    perf = PerfPredictor(
        extractor=MLP.from_json_dict(p["extractor"]),
        log_lengthscale=p["log_lengthscale"],
        log_signal_var=p["log_signal_var"],
        log_noise_raw=p["log_noise_raw"],
    )
    if p["reservoir_x"] is not None:
        perf.reservoir_x = np.asarray(p["reservoir_x"], dtype=np.float64)
        perf.reservoir_y = np.asarray(p["reservoir_y"], dtype=np.float64)
        perf.condition(perf.reservoir_x, perf.reservoir_y)
    cost = CostPredictor(mlp=MLP.from_json_dict(payload["cost"]["mlp"]))
    stats = MetaStats.from_json_dict(payload["meta_stats"])
    meta = {"dataset_ids": payload["dataset_ids"], "metrics": payload["metrics"]}
    return perf, cost, stats, meta
