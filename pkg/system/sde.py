from dataclasses import dataclass, field
import logging

import numpy as np

from driver.levy import LevyTriplet, psd_factor
from system.coefficients import CoefficientField, CoefficientOverflowError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GaussianInitial:
    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"initial covariance must be {mean.size}x{mean.size}, got {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "factor", psd_factor(cov))

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, normals: np.ndarray) -> np.ndarray:
        """Maps standard normals of shape (n, p) to draws from the law."""
        return self.mean + normals @ self.factor.T

    def drop(self, m: int) -> "GaussianInitial":
        keep = [i for i in range(self.dim) if i != m]
        return GaussianInitial(self.mean[keep], self.cov[np.ix_(keep, keep)])

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}


@dataclass(frozen=True, eq=False)
class SdeSystem:
    coeff: CoefficientField
    driver: LevyTriplet
    initial: object  # p-vector or GaussianInitial
    labels: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.coeff.d != self.driver.dim:
            raise ValueError(f"coefficient field has d={self.coeff.d} but driver has dim {self.driver.dim}")
        if isinstance(self.initial, GaussianInitial):
            if self.initial.dim != self.coeff.p:
                raise ValueError(f"initial law has dimension {self.initial.dim}, expected {self.coeff.p}")
        else:
            x0 = np.array(self.initial, dtype=float).reshape(-1)
            if x0.shape != (self.coeff.p,):
                raise ValueError(f"initial value must have length {self.coeff.p}, got {x0.shape}")
            if not np.all(np.isfinite(x0)):
                raise ValueError("initial value must be finite")
            x0.setflags(write=False)
            object.__setattr__(self, "initial", x0)
        labels = tuple(self.labels) or tuple(f"x{i + 1}" for i in range(self.coeff.p))
        if len(labels) != self.coeff.p:
            raise ValueError(f"expected {self.coeff.p} labels, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be distinct, got {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def p(self) -> int:
        return self.coeff.p

    @property
    def d(self) -> int:
        return self.coeff.d

    @property
    def reference_point(self) -> np.ndarray:
        return self.initial.mean if isinstance(self.initial, GaussianInitial) else self.initial

    @property
    def is_drift_diffusion(self) -> bool:
        return self.driver.identical_to(LevyTriplet.time_and_brownian(self.d - 1)) if self.d > 1 else False

    @property
    def driver_labels(self) -> tuple:
        if self.is_drift_diffusion:
            return ("t",) + tuple(f"W{k}" for k in range(1, self.d))
        return tuple(f"Z{k}" for k in range(1, self.d + 1))

    def index_of(self, label) -> int:
        """Resolves a coordinate label, an x<i> name or a 1-based integer to a 0-based index."""
        if isinstance(label, (int, np.integer)):
            if not 1 <= label <= self.p:
                raise IndexError(f"coordinate {label} out of range 1..{self.p}")
            return int(label) - 1
        if label in self.labels:
            return self.labels.index(label)
        if isinstance(label, str) and label.startswith("x") and label[1:].isdigit():
            return self.index_of(int(label[1:]))
        raise KeyError(f"unknown coordinate '{label}'")

    def initial_states(self, normals: np.ndarray) -> np.ndarray:
        """Initial values for a batch; `normals` is (n, p) and ignored for fixed starts."""
        if isinstance(self.initial, GaussianInitial):
            return self.initial.sample(normals)
        return np.broadcast_to(self.initial, (normals.shape[0], self.p)).copy()

    def with_initial(self, initial) -> "SdeSystem":
        return SdeSystem(self.coeff, self.driver, initial, self.labels, self.name)

    def summary(self) -> dict:
        initial = self.initial.to_dict() if isinstance(self.initial, GaussianInitial) else self.initial.tolist()
        return {
            "name": self.name,
            "p": self.p,
            "d": self.d,
            "labels": list(self.labels),
            "source": self.coeff.source,
            "coefficients": self.coeff.description,
            "driver": self.driver.to_dict(),
            "initial": initial,
        }


def evaluate_coeff(system: SdeSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (system.p,) or not np.all(np.isfinite(x)):
        raise ValueError(f"evaluation point must be a finite {system.p}-vector, got {x}")
    if system.coeff.point_check is not None:
        system.coeff.point_check(x)
    value = system.coeff(x)
    if not np.all(np.isfinite(value)):
        raise CoefficientOverflowError(f"coefficient overflow at {x.tolist()}")
    return value
