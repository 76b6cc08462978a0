"""Budget-constrained multi-fidelity Bayesian optimization for segmentation
fine-tuning: meta-learned performance and cost predictors pick which
configuration to advance by one epoch next, under a hard wall-clock budget."""

__version__ = "0.1.0"
