"""Lévy drivers with finite-activity jump measures.

A driver is given by its characteristic triplet (alpha, C, nu) with respect to
the closed ball D of radius `trunc_radius`. The jump measure nu is a finite
sum of atoms, so the compound Poisson part is simulated exactly.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


class TripletError(ValueError):
    pass


class NotPositiveSemidefiniteError(TripletError):
    pass


def psd_factor(cov) -> np.ndarray:
    """Returns L with L @ L.T == cov, via a symmetric eigendecomposition.

    Eigenvalues are sorted in descending order; eigenvalues in
    [-1e-10 * ||C||, 0) are clipped to zero. Each column is signed so that its
    first non-negligible entry is nonnegative.
    """
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    if c.shape[0] != c.shape[1]:
        raise TripletError(f"covariance must be square, got shape {c.shape}")
    scale = np.linalg.norm(c)
    if scale == 0.0:
        return np.zeros_like(c)
    if np.max(np.abs(c - c.T)) > SYMMETRY_TOL * max(1.0, scale):
        raise TripletError("covariance matrix is not symmetric")

    w, v = np.linalg.eigh(0.5 * (c + c.T))
    if w.min() < -PSD_TOL * scale:
        raise NotPositiveSemidefiniteError(
            f"not positive semidefinite (smallest eigenvalue {w.min():.3e})")
    order = np.argsort(-w, kind="stable")
    w = np.clip(w[order], 0.0, None)
    v = v[:, order]

    factor = v * np.sqrt(w)
    tiny = 1e-14 * np.max(np.abs(factor))
    factor[np.abs(factor) <= tiny] = 0.0
    for col in range(factor.shape[1]):
        nonzero = np.flatnonzero(factor[:, col])
        if nonzero.size and factor[nonzero[0], col] < 0:
            factor[:, col] = -factor[:, col]
    return factor


@dataclass(frozen=True)
class JumpAtom:
    rate: float
    location: tuple

    def __post_init__(self):
        loc = tuple(float(v) for v in np.atleast_1d(self.location))
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "rate", float(self.rate))
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise TripletError(f"jump rate must be positive and finite, got {self.rate}")
        if not np.all(np.isfinite(loc)) or np.linalg.norm(loc) == 0.0:
            raise TripletError(f"jump location must be finite and nonzero, got {loc}")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.location, dtype=float)


@dataclass(frozen=True, eq=False)
class LevyTriplet:
    dim: int
    alpha: np.ndarray
    cov: np.ndarray
    jumps: tuple = ()
    trunc_radius: float = 1.0
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise TripletError(f"driver dimension must be positive, got {self.dim}")
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if alpha.shape != (d,):
            raise TripletError(f"alpha must have length {d}, got {alpha.shape}")
        if cov.shape != (d, d):
            raise TripletError(f"cov must be {d}x{d}, got {cov.shape}")
        if not (np.isfinite(self.trunc_radius) and self.trunc_radius > 0):
            raise TripletError(f"truncation radius must be positive, got {self.trunc_radius}")
        jumps = tuple(a if isinstance(a, JumpAtom) else JumpAtom(*a) for a in self.jumps)
        for atom in jumps:
            if len(atom.location) != d:
                raise TripletError(f"jump location {atom.location} is not {d}-dimensional")

        factor = psd_factor(cov)
        for arr in (alpha, cov, factor):
            arr.setflags(write=False)
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "trunc_radius", float(self.trunc_radius))
        object.__setattr__(self, "factor", factor)

    # constructors

    @classmethod
    def brownian(cls, d: int, cov=None, drift=None) -> "LevyTriplet":
        cov = np.eye(d) if cov is None else cov
        drift = np.zeros(d) if drift is None else drift
        return cls(d, drift, cov)

    @classmethod
    def time_and_brownian(cls, d: int) -> "LevyTriplet":
        """(d+1)-dimensional driver (t, W^1..W^d) used for drift+diffusion systems."""
        alpha = np.zeros(d + 1)
        alpha[0] = 1.0
        cov = np.diag([0.0] + [1.0] * d)
        return cls(d + 1, alpha, cov)

    # derived quantities

    @property
    def rates(self) -> np.ndarray:
        return np.array([a.rate for a in self.jumps], dtype=float)

    @property
    def locations(self) -> np.ndarray:
        if not self.jumps:
            return np.zeros((0, self.dim))
        return np.array([a.location for a in self.jumps], dtype=float)

    @property
    def small_jump_mask(self) -> np.ndarray:
        """1_D(y_k) for every atom."""
        if not self.jumps:
            return np.zeros(0, dtype=bool)
        return np.linalg.norm(self.locations, axis=1) <= self.trunc_radius

    @property
    def compensated_drift(self) -> np.ndarray:
        """alpha minus the compensator of the jumps inside D."""
        if not self.jumps:
            return self.alpha.copy()
        mask = self.small_jump_mask
        return self.alpha - (self.rates[mask, None] * self.locations[mask]).sum(axis=0)

    @property
    def has_gaussian(self) -> bool:
        return bool(np.any(self.factor != 0.0))

    def identical_to(self, other: "LevyTriplet") -> bool:
        return (self.dim == other.dim
                and np.array_equal(self.alpha, other.alpha)
                and np.array_equal(self.cov, other.cov)
                and self.jumps == other.jumps
                and self.trunc_radius == other.trunc_radius)

    def with_radius(self, radius: float) -> "LevyTriplet":
        old = self.small_jump_mask
        new = (np.linalg.norm(self.locations, axis=1) <= radius) if self.jumps else old
        shift = np.zeros(self.dim)
        if self.jumps:
            weights = (new.astype(float) - old.astype(float)) * self.rates
            shift = (weights[:, None] * self.locations).sum(axis=0)
        return LevyTriplet(self.dim, self.alpha + shift, self.cov, self.jumps, radius)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "alpha": self.alpha.tolist(),
            "cov": self.cov.tolist(),
            "jumps": [{"rate": a.rate, "location": list(a.location)} for a in self.jumps],
            "trunc_radius": self.trunc_radius,
        }


def characteristic_function(triplet: LevyTriplet, u, t: float) -> complex:
    """E exp(i u^T Z_t) for the driver with the given triplet."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    exponent = 1j * u @ triplet.alpha - 0.5 * u @ triplet.cov @ u
    if triplet.jumps:
        proj = triplet.locations @ u
        comp = np.where(triplet.small_jump_mask, proj, 0.0)
        exponent = exponent + np.sum(triplet.rates * (np.exp(1j * proj) - 1.0 - 1j * comp))
    return complex(np.exp(t * exponent))


def sample_increments(triplet: LevyTriplet, delta: float, n_steps: int, stream: np.random.Generator,
                      jump_stream: np.random.Generator | None = None) -> np.ndarray:
    """Draws `n_steps` consecutive increments over intervals of length delta.

    Row k is the increment Z_{t_{k+1}} - Z_{t_k} and uses only the first k+1
    blocks of each stream, so a shorter horizon yields a prefix of a longer one.
    Gaussian blocks come from `stream` and jump counts from `jump_stream`; with
    a single stream both blocks of a step are drawn together, step by step.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    out = np.empty((n_steps, triplet.dim))
    out[:] = delta * triplet.compensated_drift
    scale = np.sqrt(delta)
    if triplet.has_gaussian and triplet.jumps and jump_stream is None:
        for k in range(n_steps):
            out[k] += triplet.factor @ stream.standard_normal(triplet.dim) * scale
            out[k] += stream.poisson(triplet.rates * delta) @ triplet.locations
        return out
    if triplet.has_gaussian:
        xi = stream.standard_normal((n_steps, triplet.dim))
        out += (xi @ triplet.factor.T) * scale
    if triplet.jumps:
        source = stream if jump_stream is None else jump_stream
        counts = source.poisson(triplet.rates * delta, size=(n_steps, len(triplet.jumps)))
        out += counts @ triplet.locations
    return out


def sample_increment(triplet: LevyTriplet, delta: float, stream: np.random.Generator) -> np.ndarray:
    return sample_increments(triplet, delta, 1, stream)[0]


def empirical_characteristic_function(samples, u) -> complex:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    return complex(np.mean(np.exp(1j * samples @ np.atleast_1d(np.asarray(u, dtype=float)))))


def u_grid(dim: int, n: int = 20, radius: float = 2.0, seed: int = 7) -> np.ndarray:
    """Fixed grid of CF arguments: evenly spaced radii along fixed random directions."""
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.linspace(radius / n, radius, n)
    return directions * radii[:, None]
