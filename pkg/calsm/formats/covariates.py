import numpy as np


class Covariates:
    """
    An n x p matrix of node covariates.

    When `normalize` is requested every nonzero row is rescaled to unit Euclidean norm;
    zero rows stay zero. A matrix with p=0 columns is valid and means "no covariates".
    """

    def __init__(self, z: np.ndarray, normalize: bool = False) -> None:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2:
            raise ValueError(f"Covariates must be a 2-D matrix, got shape {z.shape}.")
        if normalize:
            norms = np.linalg.norm(z, axis=1, keepdims=True)
            z = np.divide(z, norms, out=np.zeros_like(z), where=norms > 0)
        self.z: np.ndarray = z
        self.normalized: bool = normalize

    @classmethod
    def empty(cls, n: int) -> "Covariates":
        return cls(np.zeros((n, 0)))

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    @property
    def p(self) -> int:
        return int(self.z.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Covariates):
            return NotImplemented
        return self.normalized == other.normalized and np.array_equal(self.z, other.z)

    def __repr__(self) -> str:
        return f"Covariates(n={self.n}, p={self.p}, normalized={self.normalized})"
