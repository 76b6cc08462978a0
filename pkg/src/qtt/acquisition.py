"""Cost-aware multi-fidelity expected improvement over candidate actions.

A candidate action advances one configuration by one epoch (its next
fidelity). Actions are ranked by EI of the predicted val_iou at the next
epoch divided by the predicted per-epoch cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfc

from . import predictors, space
from .predictors import CostPredictor, PerfPredictor, assemble_input
from .space import Configuration

SIGMA_FLOOR = 1e-12
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class CandidateAction:
    """One (configuration, next epoch) step with the run's observations so far."""

    config_id: str
    config: Configuration
    next_epoch: int
    history: tuple[float, ...] = ()

    def __post_init__(self):
        if not 1 <= self.next_epoch <= 10:
            raise ValueError(f"next_epoch {self.next_epoch} outside [1, 10]")
        if len(self.history) != self.next_epoch - 1:
            raise ValueError("history length must equal next_epoch - 1")


def expected_improvement(mean: float, variance: float, incumbent: float) -> float:
    """Closed-form EI of a Gaussian over the incumbent; degenerate at sigma ~ 0."""
    if variance < 0:
        raise ValueError(f"negative variance {variance}")
    sigma = math.sqrt(variance)
    if sigma <= SIGMA_FLOOR:
        return max(mean - incumbent, 0.0)
    z = (mean - incumbent) / sigma
    cdf = 0.5 * math.erfc(-z * _INV_SQRT2)
    pdf = _INV_SQRT2PI * math.exp(-0.5 * z * z)
    return sigma * (z * cdf + pdf)


def expected_improvement_batch(means: np.ndarray, variances: np.ndarray,
                               incumbent: float) -> np.ndarray:
    if np.any(variances < 0):
        raise ValueError("negative variance")
    sigma = np.sqrt(variances)
    z = np.where(sigma > SIGMA_FLOOR, (means - incumbent) / np.maximum(sigma, SIGMA_FLOOR), 0.0)
    cdf = 0.5 * erfc(-z * _INV_SQRT2)
    pdf = _INV_SQRT2PI * np.exp(-0.5 * z * z)
    ei = sigma * (z * cdf + pdf)
    return np.where(sigma > SIGMA_FLOOR, ei, np.maximum(means - incumbent, 0.0))


def _candidate_inputs(candidates: Sequence[CandidateAction], meta_vec: np.ndarray,
                      config_vecs: Optional[np.ndarray]) -> np.ndarray:
    if config_vecs is None:
        config_vecs = np.stack([space.encode(c.config) for c in candidates])
    return np.stack([
        assemble_input(config_vecs[i], meta_vec, c.next_epoch, c.history)
        for i, c in enumerate(candidates)
    ])


def score_candidates(perf: PerfPredictor, cost: CostPredictor, incumbent: float,
                     candidates: Sequence[CandidateAction], meta_vec: np.ndarray,
                     config_vecs: Optional[np.ndarray] = None,
                     ) -> list[tuple[CandidateAction, float]]:
    """Rank actions by EI at the next epoch per predicted cost, descending.

    Predicted costs are floored at 0.1 s. Ties prefer the lower next_epoch
    (cheaper fidelity), then the smaller config_id. ``config_vecs`` passes
    pre-computed encodings for the hot path.
    """
    if not candidates:
        raise ValueError("empty candidate list")
    x = _candidate_inputs(candidates, meta_vec, config_vecs)
    means, variances = predictors.predict_perf(perf, x)
    ei = expected_improvement_batch(means, variances, incumbent)
    costs = np.maximum(predictors.predict_cost(cost, x), predictors.COST_FLOOR_S)
    scores = ei / costs
    order = sorted(range(len(candidates)),
                   key=lambda i: (-scores[i], candidates[i].next_epoch,
                                  candidates[i].config_id))
    return [(candidates[i], float(scores[i])) for i in order]


def select_next(perf: PerfPredictor, cost: CostPredictor,
                candidates: Sequence[CandidateAction], meta_vec: np.ndarray,
                incumbent: Optional[float] = None,
                config_vecs: Optional[np.ndarray] = None) -> CandidateAction:
    """Top-ranked action; incumbent defaults to 0 before any observation."""
    if not candidates:
        raise RuntimeError("pool exhausted")
    ranked = score_candidates(perf, cost, incumbent if incumbent is not None else 0.0,
                              candidates, meta_vec, config_vecs)
    return ranked[0][0]
