"""The intervention operator on SDE systems.

Intervening X^m := zeta(X^{-m}) substitutes zeta for coordinate m in every
coefficient and deletes the equation for X^m. Coordinates are 0-based here;
configs and labels use x1..xp.
"""
from dataclasses import dataclass
import logging

import numpy as np

from cli.expression import Expression, parse_expression
from system.coefficients import CoefficientField
from system.sde import SdeSystem, GaussianInitial

logger = logging.getLogger(__name__)


class InterventionError(ValueError):
    pass


class IntegratorInterventionError(InterventionError):
    pass


def insert_column(y: np.ndarray, m: int, values) -> np.ndarray:
    """(n, p-1) -> (n, p) with `values` at position m."""
    n = y.shape[0]
    x = np.empty((n, y.shape[1] + 1))
    x[:, :m] = y[:, :m]
    x[:, m] = values
    x[:, m + 1:] = y[:, m:]
    return x


@dataclass(frozen=True)
class InterventionSpec:
    target: int
    zeta: object  # float or Expression over the original coordinates

    def __post_init__(self):
        if self.target < 0:
            raise InterventionError(f"intervention target must be a coordinate index, got {self.target}")
        if isinstance(self.zeta, Expression):
            if self.target in self.zeta.coordinates:
                raise InterventionError(f"intervention value for x{self.target + 1} may not read x{self.target + 1}")
        else:
            value = float(self.zeta)
            if not np.isfinite(value):
                raise InterventionError(f"intervention value must be finite, got {self.zeta}")
            object.__setattr__(self, "zeta", value)

    @classmethod
    def parse(cls, system: SdeSystem, target, value) -> "InterventionSpec":
        """Builds a spec from a label (or x<i>, or 1-based index) and a constant or expression string."""
        if isinstance(target, str) and target in system.driver_labels:
            raise IntegratorInterventionError(
                f"'{target}' is a driving coordinate; interventions on the integrators are not defined")
        try:
            m = system.index_of(target)
        except (KeyError, IndexError) as e:
            raise InterventionError(str(e)) from e
        if isinstance(value, str):
            value = parse_expression(value, n_coords=system.p)
        return cls(m, value)

    @property
    def is_constant(self) -> bool:
        return not isinstance(self.zeta, Expression)

    def value(self, y: np.ndarray) -> np.ndarray:
        """zeta on a batch (n, p-1) of reduced states."""
        if self.is_constant:
            return np.full(y.shape[0], self.zeta)
        return self.zeta.evaluate(insert_column(y, self.target, np.nan))

    def lift(self, y: np.ndarray) -> np.ndarray:
        return insert_column(y, self.target, self.value(y))

    def describe(self, labels=None) -> dict:
        label = labels[self.target] if labels else f"x{self.target + 1}"
        zeta = self.zeta if self.is_constant else self.zeta.source
        return {"target": label, "value": zeta}


def _check_target(system: SdeSystem, spec: InterventionSpec):
    if system.p < 2:
        raise InterventionError("intervention needs a system of dimension at least 2")
    if spec.target >= system.p:
        raise InterventionError(f"target x{spec.target + 1} outside a {system.p}-dimensional system")


def _drop_initial(system: SdeSystem, m: int):
    if isinstance(system.initial, GaussianInitial):
        return system.initial.drop(m)
    return np.delete(system.initial, m)


def intervene_sde(system: SdeSystem, spec: InterventionSpec) -> SdeSystem:
    """The (p-1)-dimensional postintervention system; the driver is shared unchanged."""
    _check_target(system, spec)
    m = spec.target
    coeff = system.coeff

    def batch(y):
        return np.delete(coeff.evaluate_batch(spec.lift(y)), m, axis=1)

    declared = None
    if coeff.declared_dependence is not None:
        keep = [i for i in range(system.p) if i != m]
        dep = coeff.declared_dependence.copy()
        if not spec.is_constant:
            # zeta reads these coordinates, so they reach every row that read x_m
            for i in spec.zeta.coordinates:
                dep[i] |= dep[m]
        declared = dep[np.ix_(keep, keep)]

    singular = tuple(tuple(np.delete(pt, m)) for pt in coeff.singular_points)
    point_check = None
    if coeff.point_check is not None:
        def point_check(y):
            coeff.point_check(spec.lift(np.asarray(y, dtype=float).reshape(1, -1))[0])

    reduced = CoefficientField(
        system.p - 1, coeff.d, batch, coeff.source,
        declared_dependence=declared,
        singular_points=singular,
        probe_box=coeff.probe_box,
        description={"intervened": spec.describe(system.labels), "original": coeff.description},
        point_check=point_check,
    )
    labels = tuple(label for i, label in enumerate(system.labels) if i != m)
    name = f"{system.name or 'system'}|do({system.labels[m]})"
    logger.info(f"Intervened '{system.name}' with {spec.describe(system.labels)}")
    return SdeSystem(reduced, system.driver, _drop_initial(system, m), labels, name)


def embed_constant_intervention(system: SdeSystem, m: int, zeta) -> SdeSystem:
    """p-dimensional form of a constant intervention: row m of a is zero and X^m starts at zeta."""
    if isinstance(zeta, Expression) or isinstance(zeta, str):
        raise InterventionError("embedding defined only for constant interventions")
    zeta = float(zeta)
    if not 0 <= m < system.p:
        raise InterventionError(f"target x{m + 1} outside a {system.p}-dimensional system")
    coeff = system.coeff

    def batch(x):
        out = coeff.evaluate_batch(x)
        out[:, m, :] = 0.0
        return out

    declared = None
    if coeff.declared_dependence is not None:
        declared = coeff.declared_dependence.copy()
        declared[:, m] = False

    if isinstance(system.initial, GaussianInitial):
        mean = system.initial.mean.copy()
        cov = system.initial.cov.copy()
        mean[m] = zeta
        cov[m, :] = 0.0
        cov[:, m] = 0.0
        initial = GaussianInitial(mean, cov)
    else:
        initial = system.initial.copy()
        initial[m] = zeta

    embedded = CoefficientField(
        system.p, coeff.d, batch, coeff.source,
        declared_dependence=declared,
        singular_points=coeff.singular_points,
        probe_box=coeff.probe_box,
        description={"embedded": {"target": system.labels[m], "value": zeta}, "original": coeff.description},
        point_check=coeff.point_check,
    )
    return SdeSystem(embedded, system.driver, initial, system.labels,
                     f"{system.name or 'system'}|embed({system.labels[m]}={zeta})")


def full_process_lift(reduced, spec: InterventionSpec, label: str | None = None):
    """Inserts coordinate m with value zeta(Y^{-m}_t) at every grid time of a reduced ensemble."""
    values = reduced.values
    n, steps, _ = values.shape
    flat = values.reshape(n * steps, -1)
    column = spec.value(flat).reshape(n, steps)
    column[np.isnan(values).any(axis=2)] = np.nan
    return reduced.insert_column(spec.target, column, label or f"x{spec.target + 1}")
