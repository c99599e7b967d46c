import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch
import torch.nn as nn

NEGATIVE_SCHEMES = ("row", "uniform")


@dataclass(frozen=True)
class SviConfig:
    """
    Optimisation settings for the stochastic engine.

    gamma_init is (shape_lambda, rate_lambda, shape_tau, rate_tau) for the Gamma factors
    on the local and global scales. negative_scheme picks the non-edge sampler: "row"
    draws (i, j') partners for every sampled positive edge, "uniform" draws unordered
    non-edges uniformly.
    """

    learning_rate: float = 0.005
    weight_decay: float = 1e-4
    batch_size: int = 1024
    negatives_per_positive: int = 5
    mc_samples: int = 10
    max_epochs: int = 200
    early_stop_patience: int = 50
    lr_decay_factor: float = 0.5
    lr_decay_patience: int = 20
    grad_clip_norm: float = 1.0
    gamma_init: Tuple[float, float, float, float] = (10.0, 10.0, 0.1, 1.0)
    negative_scheme: str = "row"
    smoothing: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        positive = {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "mc_samples": self.mc_samples,
            "max_epochs": self.max_epochs,
            "early_stop_patience": self.early_stop_patience,
            "lr_decay_factor": self.lr_decay_factor,
            "lr_decay_patience": self.lr_decay_patience,
            "grad_clip_norm": self.grad_clip_norm,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}.")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}.")
        if self.negatives_per_positive < 1:
            raise ValueError(f"negatives_per_positive must be at least 1, got {self.negatives_per_positive}.")
        if len(self.gamma_init) != 4 or any(v <= 0 for v in self.gamma_init):
            raise ValueError(f"gamma_init must hold four positive numbers, got {self.gamma_init}.")
        if self.negative_scheme not in NEGATIVE_SCHEMES:
            raise ValueError(f"negative_scheme must be one of {NEGATIVE_SCHEMES}, got {self.negative_scheme}.")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}.")


class SviState(nn.Module):
    """
    Variational parameters of the stochastic engine, held as torch parameters.

    Gaussian factors: beta (mean, log-std), X (n x d means, one log-std per node) and
    B (p x d means, one log-std per row). Gamma factors on the scales lambda_x (n),
    tau_x, lambda_b (p) and tau_b, each stored as log-shape and log-rate so positivity
    is exact.
    """

    def __init__(
        self,
        x_mean: np.ndarray,
        p: int,
        beta_mean: float = 0.0,
        initial_std: float = math.sqrt(0.1),
        gamma_init: Tuple[float, float, float, float] = (10.0, 10.0, 0.1, 1.0),
    ) -> None:
        super().__init__()
        n, d = x_mean.shape
        shape_lambda, rate_lambda, shape_tau, rate_tau = gamma_init
        log_std = math.log(initial_std)

        def filled(size: Tuple[int, ...], value: float) -> nn.Parameter:
            return nn.Parameter(torch.full(size, value, dtype=torch.float64))

        self.beta_mean = filled((), beta_mean)
        self.beta_log_std = filled((), log_std)
        self.x_mean = nn.Parameter(torch.as_tensor(np.array(x_mean, dtype=np.float64)))
        self.x_log_std = filled((n,), log_std)
        self.b_mean = filled((p, d), 0.0)
        self.b_log_std = filled((p,), log_std)
        self.lambda_x_log_shape = filled((n,), math.log(shape_lambda))
        self.lambda_x_log_rate = filled((n,), math.log(rate_lambda))
        self.tau_x_log_shape = filled((), math.log(shape_tau))
        self.tau_x_log_rate = filled((), math.log(rate_tau))
        self.lambda_b_log_shape = filled((p,), math.log(shape_lambda))
        self.lambda_b_log_rate = filled((p,), math.log(rate_lambda))
        self.tau_b_log_shape = filled((), math.log(shape_tau))
        self.tau_b_log_rate = filled((), math.log(rate_tau))

    @property
    def n(self) -> int:
        return int(self.x_mean.shape[0])

    @property
    def p(self) -> int:
        return int(self.b_mean.shape[0])

    @property
    def d(self) -> int:
        return int(self.x_mean.shape[1])

    def latent_means(self) -> np.ndarray:
        return self.x_mean.detach().cpu().numpy().copy()

    def coefficient_means(self) -> np.ndarray:
        return self.b_mean.detach().cpu().numpy().copy()

    def intercept(self) -> float:
        return float(self.beta_mean.detach())
