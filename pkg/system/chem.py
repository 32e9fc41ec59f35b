"""Chemical reaction networks as drift+diffusion systems.

A network with stoichiometric matrix S (p species x R reactions) and rate
vector lambda(x) gives drift S lambda(x) and diffusion S diag(sqrt(lambda(x))),
driven by the canonical (t, W^1..W^R) driver.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from config.settings import PROBE_BOX
from cli.expression import parse_expression
from driver.levy import LevyTriplet
from system.coefficients import drift_diffusion
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

ORTHANT_FLOOR = 1e-3


class RateNegativeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChemNetwork:
    S: np.ndarray
    rate_sources: tuple
    constants: dict = field(default_factory=dict)
    rate_expressions: tuple = field(init=False, repr=False)

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        if S.ndim != 2:
            raise ValueError(f"stoichiometric matrix must be 2-dimensional, got shape {S.shape}")
        if not np.array_equal(S, np.round(S)):
            raise ValueError("stoichiometric matrix must have integer entries")
        if len(self.rate_sources) != S.shape[1]:
            raise ValueError(f"{S.shape[1]} reactions need {S.shape[1]} rates, got {len(self.rate_sources)}")
        S.setflags(write=False)
        parsed = tuple(parse_expression(str(r), n_coords=S.shape[0], constants=self.constants)
                       for r in self.rate_sources)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "rate_sources", tuple(str(r) for r in self.rate_sources))
        object.__setattr__(self, "rate_expressions", parsed)

    @property
    def species(self) -> int:
        return self.S.shape[0]

    @property
    def reactions(self) -> int:
        return self.S.shape[1]

    def rates(self, x: np.ndarray) -> np.ndarray:
        """lambda(x) for a batch (n, p); rows with a negative rate are NaN."""
        lam = np.stack([e.evaluate(x) for e in self.rate_expressions], axis=1) \
            if self.reactions else np.zeros((x.shape[0], 0))
        lam[(lam < 0).any(axis=1)] = np.nan
        return lam

    def drift(self, x: np.ndarray) -> np.ndarray:
        return self.rates(x) @ self.S.T

    def diffusion(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.S[None, :, :] * np.sqrt(self.rates(x))[:, None, :]

    def check_rates(self, x: np.ndarray):
        lam = np.array([e.evaluate(x) for e in self.rate_expressions])
        if np.any(lam < 0):
            raise RateNegativeError(f"rate negative at {np.asarray(x).tolist()}")

    def martingale_covariance(self, x) -> np.ndarray:
        """S diag(lambda(x)) S^T at a single point."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        self.check_rates(x[0])
        return (self.S * self.rates(x)[0]) @ self.S.T


def network_system(network: ChemNetwork, x0, labels=(), name: str = "chem") -> SdeSystem:
    p, R = network.species, network.reactions
    coeff = drift_diffusion(
        network.drift, network.diffusion, p, R,
        source="chem",
        probe_box=(ORTHANT_FLOOR, PROBE_BOX),
        point_check=network.check_rates,
        description={"S": network.S.astype(int).tolist(), "rates": list(network.rate_sources),
                     "constants": dict(network.constants)},
    )
    return SdeSystem(coeff, LevyTriplet.time_and_brownian(R), x0, labels, name)


def build_chem_system(S, rates, x0, constants: dict | None = None, labels=(), name: str = "chem") -> SdeSystem:
    network = ChemNetwork(S, tuple(rates), dict(constants or {}))
    logger.info(f"Built chemical network with {network.species} species and {network.reactions} reactions")
    return network_system(network, x0, labels, name)


# two-species network: influx of y, y -> x, outflux of x, outflux of y
TWO_SPECIES_S = ((0, 1, -1, 0), (1, -1, 0, -1))
TWO_SPECIES_RATES = ("a", "b12*x2", "b11*x1", "b22*x2")


def two_species_network(a=1.0, b11=0.5, b12=0.5, b22=0.5) -> ChemNetwork:
    return ChemNetwork(TWO_SPECIES_S, TWO_SPECIES_RATES, {"a": a, "b11": b11, "b12": b12, "b22": b22})


def build_displayed_chem_system(a=1.0, b11=0.5, b12=0.5, b22=0.5, x0=(1.0, 1.0),
                                labels=("X", "Y"), name: str = "chem") -> SdeSystem:
    """Two-species system with drift (0, a) + B (x, y) for B = [[-b11, b12], [-b12, -b22]]
    and the same diffusion as the mass-action network."""
    network = two_species_network(a, b11, b12, b22)
    B = np.array([[-b11, b12], [-b12, -b22]])
    influx = np.array([0.0, a])

    def drift(x):
        out = influx + x @ B.T
        out[np.isnan(network.rates(x)).any(axis=1)] = np.nan
        return out

    coeff = drift_diffusion(
        drift, network.diffusion, 2, 4,
        source="chem",
        probe_box=(ORTHANT_FLOOR, PROBE_BOX),
        point_check=network.check_rates,
        description={"B": B.tolist(), "influx": influx.tolist(), "S": network.S.astype(int).tolist(),
                     "rates": list(network.rate_sources), "constants": dict(network.constants)},
    )
    return SdeSystem(coeff, LevyTriplet.time_and_brownian(4), x0, labels, name)
