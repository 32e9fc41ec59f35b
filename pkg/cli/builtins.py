"""Worked example systems.

Parameter defaults (rate constants, initial values) are chosen for numerical
tameness; the source examples leave them symbolic.
"""
from dataclasses import dataclass
import logging

import numpy as np

from driver.levy import LevyTriplet
from intervention.ito import ito_system, square
from intervention.sde_ops import InterventionSpec
from ou.model import OuModel, ou_to_system
from system.chem import build_chem_system, build_displayed_chem_system, TWO_SPECIES_S, TWO_SPECIES_RATES
from system.coefficients import CoefficientField
from system.sde import SdeSystem

logger = logging.getLogger(__name__)

CHEM_CONSTANTS = {"a": 1.0, "b11": 0.5, "b12": 0.5, "b22": 0.5}
OU_B = ((-1.0, 0.5), (0.3, -2.0))


@dataclass(frozen=True, eq=False)
class Builtin:
    system: SdeSystem
    spec: InterventionSpec
    companion: SdeSystem | None = None
    model: OuModel | None = None


def _radius(x):
    return np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2)


def two_signature_field() -> CoefficientField:
    """a(x) = [[x1, 0], [x2^2 / r, -x1 x2 / r]], a(0) = 0."""
    def batch(x):
        r = _radius(x)
        safe = np.where(r > 0, r, 1.0)
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = x[:, 0]
        out[:, 1, 0] = np.where(r > 0, x[:, 1] ** 2 / safe, 0.0)
        out[:, 1, 1] = np.where(r > 0, -x[:, 0] * x[:, 1] / safe, 0.0)
        return out

    return CoefficientField(2, 2, batch, "closure",
                            declared_dependence=[[True, True], [False, True]],
                            singular_points=((0.0, 0.0),),
                            description={"matrix": [["x1", "0"], ["x2^2/r", "-x1*x2/r"]]})


def two_signature_field_tilde() -> CoefficientField:
    """a~(x) = [[x1^2 / r, x1 x2 / r], [0, x2]], a~(0) = 0; a~ a~^T = a a^T."""
    def batch(x):
        r = _radius(x)
        safe = np.where(r > 0, r, 1.0)
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = np.where(r > 0, x[:, 0] ** 2 / safe, 0.0)
        out[:, 0, 1] = np.where(r > 0, x[:, 0] * x[:, 1] / safe, 0.0)
        out[:, 1, 1] = x[:, 1]
        return out

    return CoefficientField(2, 2, batch, "closure",
                            declared_dependence=[[True, False], [True, True]],
                            singular_points=((0.0, 0.0),),
                            description={"matrix": [["x1^2/r", "x1*x2/r"], ["0", "x2"]]})


def two_signatures() -> Builtin:
    driver = LevyTriplet.brownian(2)
    x0 = (1.0, 1.0)
    system = SdeSystem(two_signature_field(), driver, x0, ("x1", "x2"), "two-signatures")
    companion = SdeSystem(two_signature_field_tilde(), driver, x0, ("x1", "x2"), "two-signatures-tilde")
    return Builtin(system, InterventionSpec(1, 1.0), companion)


def chem() -> Builtin:
    system = build_displayed_chem_system(**{k: CHEM_CONSTANTS[k] for k in ("a", "b11", "b12", "b22")}, name="chem")
    return Builtin(system, InterventionSpec(1, 1.0))


def chem_network() -> Builtin:
    # mass-action drift S lambda(x); the X -> Y edge is absent
    system = build_chem_system(TWO_SPECIES_S, TWO_SPECIES_RATES, (1.0, 1.0), CHEM_CONSTANTS, ("X", "Y"),
                               "chem-network")
    return Builtin(system, InterventionSpec(1, 1.0))


def ou() -> Builtin:
    model = OuModel(A=(0.0, 0.0), B=OU_B, sigma=np.eye(2), initial=(0.0, 0.0), name="ou")
    return Builtin(ou_to_system(model), InterventionSpec(0, 2.0), model=model)


def ito_counterexample() -> Builtin:
    return Builtin(ito_system(*square()), InterventionSpec(0, 1.0))


BUILTINS = {
    "chem": chem,
    "chem-network": chem_network,
    "ou": ou,
    "two-signatures": two_signatures,
    "ito-counterexample": ito_counterexample,
}


def load_builtin(name: str) -> Builtin:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin '{name}' (known: {', '.join(BUILTINS)})") from None
    logger.info(f"Loaded builtin '{name}'")
    return factory()
