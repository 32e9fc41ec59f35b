"""Interventions on SDE systems, SEMs and Markov update mappings."""
import networkx as nx
import numpy as np
import pytest

from cli.builtins import chem, ou, two_signatures, CHEM_CONSTANTS
from cli.expression import parse_expression
from driver.levy import LevyTriplet
from euler.scheme import Grid, simulate, simulate_shared
from intervention.ito import ito_counterexample, ito_system, square
from intervention.markov import intervene_update, run_chain, compare_intervened_chains
from intervention.sde_ops import (InterventionSpec, InterventionError, IntegratorInterventionError, intervene_sde,
                                  embed_constant_intervention, full_process_lift, insert_column)
from intervention.sem import SemModel, NotADagError, intervene_sem, constant_assignment
from ou.model import ou_intervene, ou_to_system
from stats.tests import CONSISTENT, INCONSISTENT
from system.coefficients import CoefficientField
from system.sde import SdeSystem
from system.signature import sample_probe_points

RNG = np.random.default_rng(0)


class TestInterventionSpec:
    def test_parse_label(self):
        system = chem().system
        spec = InterventionSpec.parse(system, "Y", 1.0)
        assert spec.target == 1 and spec.is_constant

    def test_parse_expression(self):
        system = ou().system
        spec = InterventionSpec.parse(system, "x1", "2*x2")
        assert not spec.is_constant
        np.testing.assert_array_equal(spec.value(np.array([[1.5], [-1.0]])), [3.0, -2.0])

    def test_driver_label_rejected(self):
        with pytest.raises(IntegratorInterventionError):
            InterventionSpec.parse(chem().system, "W1", 1.0)

    def test_unknown_label(self):
        with pytest.raises(InterventionError):
            InterventionSpec.parse(chem().system, "Z", 1.0)

    def test_self_reference_rejected(self):
        with pytest.raises(InterventionError):
            InterventionSpec(0, parse_expression("x1 + 1"))

    def test_non_finite_rejected(self):
        with pytest.raises(InterventionError):
            InterventionSpec(0, float("nan"))

    def test_insert_column(self):
        y = RNG.normal(size=(4, 2))
        x = insert_column(y, 1, 7.0)
        np.testing.assert_array_equal(x[:, 1], 7.0)
        np.testing.assert_array_equal(np.delete(x, 1, axis=1), y)


class TestInterveneSde:
    def test_chem(self):
        system = chem().system
        zeta = 1.5
        reduced = intervene_sde(system, InterventionSpec(1, zeta))
        assert reduced.p == 1 and reduced.labels == ("X",)
        assert reduced.driver is system.driver
        b11, b12 = CHEM_CONSTANTS["b11"], CHEM_CONSTANTS["b12"]
        for x in (0.5, 2.0):
            a = reduced.coeff([x])
            assert a[0, 0] == pytest.approx(b12 * zeta - b11 * x, abs=1e-15)
            np.testing.assert_allclose(a[0, 1:], [0.0, np.sqrt(b12 * zeta), -np.sqrt(b11 * x), 0.0])

    def test_ou_matches_closed_form(self):
        builtin = ou()
        reduced = intervene_sde(builtin.system, InterventionSpec(0, 2.0))
        closed = ou_to_system(ou_intervene(builtin.model, 0, 2.0))
        np.testing.assert_allclose(closed.coeff.description["A"], [0.3])
        np.testing.assert_allclose(closed.coeff.description["B"], [[-2.0]])
        x = sample_probe_points(reduced, 1000)
        np.testing.assert_allclose(reduced.coeff.evaluate_batch(x), closed.coeff.evaluate_batch(x), atol=1e-12)

    def test_declared_dependence_updated(self):
        system = ou().system
        reduced = intervene_sde(system, InterventionSpec(0, 2.0))
        np.testing.assert_array_equal(reduced.coeff.declared_dependence, [[True]])

    def test_name(self):
        assert intervene_sde(chem().system, InterventionSpec(1, 1.0)).name == "chem|do(Y)"

    def test_target_out_of_range(self):
        with pytest.raises(InterventionError):
            intervene_sde(chem().system, InterventionSpec(2, 1.0))

    def test_expression_intervention(self):
        system = two_signatures().system
        spec = InterventionSpec(1, parse_expression("2*x1"))
        reduced = intervene_sde(system, spec)
        y = np.array([[0.5], [1.5]])
        full = system.coeff.evaluate_batch(np.column_stack([y[:, 0], 2 * y[:, 0]]))
        np.testing.assert_array_equal(reduced.coeff.evaluate_batch(y), full[:, :1, :])


class TestEmbedding:
    def test_constant_row_and_initial(self):
        system = chem().system
        embedded = embed_constant_intervention(system, 1, 2.0)
        np.testing.assert_array_equal(embedded.initial, [1.0, 2.0])
        np.testing.assert_array_equal(embedded.coeff([1.0, 2.0])[1], 0.0)

    def test_expression_rejected(self):
        with pytest.raises(InterventionError, match="embedding defined only for constant interventions"):
            embed_constant_intervention(chem().system, 1, "x1")

    def test_order_irrelevant(self):
        field = CoefficientField.from_expressions([["x1*x2", "x3"], ["sin(x1)", "x2*x3"], ["x1 + x3", "cos(x2)"]])
        system = SdeSystem(field, LevyTriplet.brownian(2), [0.5, 1.0, 1.5])
        first = embed_constant_intervention(embed_constant_intervention(system, 0, 2.0), 2, -0.5)
        second = embed_constant_intervention(embed_constant_intervention(system, 2, -0.5), 0, 2.0)
        x = sample_probe_points(system, 200)
        np.testing.assert_array_equal(first.coeff.evaluate_batch(x), second.coeff.evaluate_batch(x))
        np.testing.assert_array_equal(first.initial, second.initial)
        np.testing.assert_array_equal(first.initial, [2.0, 1.0, -0.5])

    def test_matches_lift(self):
        system = chem().system
        spec = InterventionSpec(1, 1.0)
        grid = Grid(0.25, 2.0 ** -6)
        reduced = intervene_sde(system, spec)
        embedded = embed_constant_intervention(system, 1, 1.0)
        red, emb = simulate_shared([reduced, embedded], grid, 20, 3)
        lifted = full_process_lift(red, spec, "Y")
        assert lifted.labels == ("X", "Y")
        np.testing.assert_array_equal(lifted.values[:, :, 1], 1.0)
        np.testing.assert_allclose(lifted.values, emb.values, atol=1e-12)
        np.testing.assert_array_equal(lifted.drop_column(1).values, red.values)


def chain_sem():
    graph = nx.DiGraph([("a", "b"), ("b", "c")])
    relationships = {
        "a": lambda parents, noise: noise,
        "b": lambda parents, noise: 2 * parents["a"] + noise,
        "c": lambda parents, noise: parents["b"] - 1,
    }
    return SemModel(graph, relationships, {"a": "ua", "b": "ub"})


class TestSem:
    NOISE = {"ua": np.array([1.0, 2.0]), "ub": np.array([0.5, 0.0])}

    def test_evaluate(self):
        values = chain_sem().evaluate(self.NOISE)
        np.testing.assert_array_equal(values["c"], [1.5, 3.0])

    def test_cycle_rejected(self):
        with pytest.raises(NotADagError):
            SemModel(nx.DiGraph([("a", "b"), ("b", "a")]), {"a": None, "b": None})

    def test_empty_assignment(self):
        sem = chain_sem()
        same = intervene_sem(sem, {})
        assert set(same.graph.edges) == set(sem.graph.edges)
        np.testing.assert_array_equal(same.evaluate(self.NOISE)["c"], sem.evaluate(self.NOISE)["c"])

    def test_constant_on_source(self):
        sem = intervene_sem(chain_sem(), {"a": constant_assignment(3.0, 2)})
        assert sem.parents("a") == []
        np.testing.assert_array_equal(sem.evaluate(self.NOISE)["b"], [6.5, 6.0])
        assert sem.noise == chain_sem().noise

    def test_cyclic_intervention(self):
        with pytest.raises(NotADagError, match="post-intervention graph is not a DAG"):
            intervene_sem(chain_sem(), {"a": ({"c"}, lambda parents: parents["c"])})

    def test_parents_must_not_be_targets(self):
        with pytest.raises(ValueError):
            intervene_sem(chain_sem(), {"a": ({"b"}, lambda p: p["b"]), "b": constant_assignment(1.0)})


class TestMarkov:
    @staticmethod
    def G(x, u):
        return np.column_stack([x[:, 0] + x[:, 1] * u[:, 0], x[:, 1] + u[:, 0]])

    def test_update_substitution(self):
        H = intervene_update(self.G, 0, lambda y: y[:, 0])
        y = RNG.normal(size=(6, 1))
        u = RNG.normal(size=(6, 1))
        np.testing.assert_allclose(H(y, u), y + u)

    def test_independent_of_zeta(self):
        def G(x, u):
            return np.column_stack([x[:, 0] + u[:, 0], 0.5 * x[:, 1] + u[:, 0]])

        y, u = RNG.normal(size=(5, 1)), RNG.normal(size=(5, 1))
        np.testing.assert_array_equal(intervene_update(G, 0, 1.0)(y, u), intervene_update(G, 0, -4.0)(y, u))

    def test_run_chain_shape(self):
        H = intervene_update(self.G, 0, 1.0)
        out = run_chain(H, [0.0], lambda s, n: s.standard_normal((n, 1)), 4, 10, np.random.default_rng(0))
        assert out.shape == (10, 5, 1)

    def test_equal_laws(self):
        def noise(stream, n):
            return stream.standard_normal((n, 1))

        def noise_flipped(stream, n):
            return -stream.standard_normal((n, 1))

        report = compare_intervened_chains(self.G, self.G, 0, 0.5, [0.0], noise, noise_flipped,
                                           n_steps=5, n_samples=2000, seed=1, alpha=1e-4)
        assert report.verdict == CONSISTENT

    def test_different_laws(self):
        def noise(stream, n):
            return stream.standard_normal((n, 1))

        def shifted(stream, n):
            return 1.0 + stream.standard_normal((n, 1))

        report = compare_intervened_chains(self.G, self.G, 0, 0.5, [0.0], noise, shifted,
                                           n_steps=5, n_samples=2000, seed=1)
        assert report.verdict == INCONSISTENT


class TestIto:
    def test_closed_form(self):
        report = ito_counterexample(*square(), zeta=1.0, horizon=1.0, delta=2.0 ** -8, n_paths=200, seed=4)
        assert report.distance_closed_form <= 1e-12
        assert report.distance_constant_at_zero == pytest.approx(1.0)
        assert report.contradiction

    def test_zero_level(self):
        report = ito_counterexample(*square(), zeta=0.0, horizon=1.0, delta=2.0 ** -8, n_paths=200, seed=4)
        assert report.distance_constant_at_zero == 0.0
        assert report.median_distance_constant_at_horizon > 0.5

    def test_system(self):
        system = ito_system(*square())
        np.testing.assert_array_equal(system.coeff([3.0, 9.0]), [[0.0, 1.0], [1.0, 6.0]])
        assert system.labels == ("W", "fW")

    def test_unintervened_tracks_square(self):
        system = ito_system(*square())
        ensemble = simulate(system, Grid(1.0, 2.0 ** -10), 200, 5)
        w = ensemble.values[:, :, 0]
        # Euler error of the Ito form is O(sqrt(delta))
        assert np.abs(ensemble.values[:, -1, 1] - w[:, -1] ** 2).mean() < 0.2
