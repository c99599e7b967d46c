import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    """
    Model-level settings shared by both inference engines.

    beta_prior_var defaults to log(n) when left as None; use `resolve` once n is known.
    """

    d: int = 2
    alpha: float = 1.0
    beta_prior_mean: float = 0.0
    beta_prior_var: Optional[float] = None

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"Latent dimension d must be at least 1, got {self.d}.")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}.")
        if self.beta_prior_var is not None and self.beta_prior_var <= 0:
            raise ValueError(f"beta_prior_var must be positive, got {self.beta_prior_var}.")

    def resolve(self, n: int) -> "ModelConfig":
        """Fill in the default beta prior variance log(n) for an n-node network."""
        if self.beta_prior_var is not None:
            return self
        return ModelConfig(
            d=self.d,
            alpha=self.alpha,
            beta_prior_mean=self.beta_prior_mean,
            beta_prior_var=math.log(n) if n > 1 else 1.0,
        )

    @property
    def prior_var(self) -> float:
        if self.beta_prior_var is None:
            raise ValueError("beta_prior_var has not been resolved for a network size.")
        return self.beta_prior_var


@dataclass
class LatentParams:
    """Point values of the model parameters: intercept, latent positions, covariate coefficients."""

    beta: float
    x: np.ndarray
    b: np.ndarray
