import copy
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import digamma, gammaln


@dataclass
class GaussianBlock:
    """
    A stack of m independent Gaussian factors N(mean[k], covariance[k]) in d dimensions.

    mean has shape (m, d) and covariance has shape (m, d, d).
    """

    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def isotropic(cls, mean: np.ndarray, variance: float) -> "GaussianBlock":
        m, d = mean.shape
        covariance = np.broadcast_to(np.eye(d) * variance, (m, d, d)).copy()
        return cls(mean=np.array(mean, dtype=np.float64), covariance=covariance)

    @property
    def size(self) -> int:
        return int(self.mean.shape[0])

    def traces(self) -> np.ndarray:
        return np.trace(self.covariance, axis1=1, axis2=2)

    def second_moments(self) -> np.ndarray:
        """E[v v'] = covariance + mean mean' for every factor."""
        return self.covariance + np.einsum("ka,kb->kab", self.mean, self.mean)

    def expected_sq_norms(self) -> np.ndarray:
        """E||v||^2 for every factor."""
        return self.traces() + np.sum(self.mean**2, axis=1)

    def entropy(self) -> float:
        if self.size == 0:
            return 0.0
        d = self.mean.shape[1]
        _, logdets = np.linalg.slogdet(self.covariance)
        return float(0.5 * d * self.size * (1.0 + np.log(2.0 * np.pi)) + 0.5 * np.sum(logdets))


@dataclass
class InverseGammaBlock:
    """
    Independent IG(shape, rate) factors with density proportional to x^(-shape-1) exp(-rate/x).

    shape and rate are arrays of equal shape; a 0-d array holds a single global factor.
    """

    shape: np.ndarray
    rate: np.ndarray

    @classmethod
    def constant(cls, size: Optional[int], shape: float = 1.0, rate: float = 1.0) -> "InverseGammaBlock":
        """Factors with identical parameters; size None builds a single global factor."""
        dims = () if size is None else (size,)
        return cls(shape=np.full(dims, shape, dtype=np.float64), rate=np.full(dims, rate, dtype=np.float64))

    def mean_reciprocal(self) -> np.ndarray:
        """E[1/x] = shape / rate."""
        return self.shape / self.rate

    def mean_log(self) -> np.ndarray:
        """E[log x] = log(rate) - digamma(shape)."""
        return np.log(self.rate) - digamma(self.shape)

    def mean(self) -> np.ndarray:
        """E[x] = rate / (shape - 1), infinite when shape <= 1."""
        with np.errstate(divide="ignore"):
            return np.where(self.shape > 1.0, self.rate / np.maximum(self.shape - 1.0, 1e-300), np.inf)

    def entropy(self) -> float:
        a, b = self.shape, self.rate
        return float(np.sum(a + np.log(b) + gammaln(a) - (1.0 + a) * digamma(a)))


@dataclass
class CaviState:
    """
    Variational parameters of the closed-form coordinate-ascent engine.

    Node-side blocks: x (Gaussian), lambda_x and v_x_local (per node), tau_x and v_x_global.
    Covariate-side blocks: b (Gaussian), lambda_b and v_b_local (per covariate), tau_b and
    v_b_global. xi is the symmetric matrix of tangent parameters with a zero diagonal.
    """

    beta_mean: float
    beta_var: float
    x: GaussianBlock
    b: GaussianBlock
    lambda_x: InverseGammaBlock
    v_x_local: InverseGammaBlock
    tau_x: InverseGammaBlock
    v_x_global: InverseGammaBlock
    lambda_b: InverseGammaBlock
    v_b_local: InverseGammaBlock
    tau_b: InverseGammaBlock
    v_b_global: InverseGammaBlock
    xi: np.ndarray
    cycle_count: int = 0
    elbo_trace: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def p(self) -> int:
        return self.b.size

    @property
    def d(self) -> int:
        return int(self.x.mean.shape[1])

    def node_precision_weights(self) -> np.ndarray:
        """w_i = E[1/lambda_xi^2] E[1/tau_x^2], the prior precision of each latent position."""
        return self.lambda_x.mean_reciprocal() * self.tau_x.mean_reciprocal()

    def coefficient_precision_weights(self) -> np.ndarray:
        """u_k = E[1/lambda_bk^2] E[1/tau_b^2], the prior precision of each coefficient row."""
        return self.lambda_b.mean_reciprocal() * self.tau_b.mean_reciprocal()

    def copy(self) -> "CaviState":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class FitOptions:
    max_cycles: int = 200
    prob_tolerance: float = 1e-4
    track_elbo: bool = True

    def __post_init__(self) -> None:
        if self.max_cycles < 1:
            raise ValueError(f"max_cycles must be at least 1, got {self.max_cycles}.")
        if self.prob_tolerance <= 0:
            raise ValueError(f"prob_tolerance must be positive, got {self.prob_tolerance}.")


@dataclass
class FitReport:
    """
    Summary of one fit. `iterations` counts CAVI cycles or SVI epochs; `steps` counts
    optimizer steps (SVI only). wall_time is informational and excluded from equality.
    """

    engine: str
    iterations: int
    final_elbo: float
    converged: bool
    elbo_trace: List[float] = field(default_factory=list)
    steps: int = 0
    final_learning_rate: Optional[float] = None
    wall_time: float = field(default=0.0, compare=False)
