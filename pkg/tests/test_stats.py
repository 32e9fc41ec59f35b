"""Two-sample tests, Holm correction and the identifiability check."""
import numpy as np
import pytest

from cli.builtins import ou, two_signatures
from ou.model import OuModel, ou_to_system
from stats.identifiability import identifiability_check, generator_hypothesis, MIN_KS_SAMPLES
from stats.tests import (SampleError, ks_two_sample, energy_distance_test, moment_compare, holm, combine,
                         CONSISTENT, INCONSISTENT, HYPOTHESIS_VIOLATED)

RNG = np.random.default_rng(0)


def scaled_ou(factor: float):
    builtin = ou()
    model = builtin.model
    scaled = OuModel(model.A, model.B, factor * model.sigma, model.initial, name=f"ou*{factor}")
    return builtin, ou_to_system(scaled)


class TestKs:
    def test_identical(self):
        x = RNG.normal(size=500)
        assert ks_two_sample(x, x.copy()) == (0.0, 1.0)

    def test_shifted(self):
        d, p = ks_two_sample(RNG.normal(size=10_000), RNG.normal(1.0, size=10_000))
        assert d > 0.3
        assert p < 1e-6

    def test_monotone_invariance(self):
        a, b = RNG.normal(size=300), RNG.normal(0.2, size=400)
        assert ks_two_sample(a, b) == ks_two_sample(np.exp(a), np.exp(b))

    def test_same_law_halves(self):
        rejections = 0
        for _ in range(100):
            x = RNG.normal(size=10_000)
            _, p = ks_two_sample(x[:5000], x[5000:])
            rejections += p < 0.01
        assert rejections <= 5

    def test_empty(self):
        with pytest.raises(SampleError):
            ks_two_sample([], [1.0])


class TestEnergy:
    def test_identical_samples(self):
        x = RNG.normal(size=(200, 2))
        statistic, p = energy_distance_test(x, x.copy(), n_permutations=19)
        assert statistic == pytest.approx(0.0, abs=1e-12)
        assert p == 1.0

    def test_mean_shift(self):
        a = RNG.normal(size=(2000, 2))
        b = RNG.normal(size=(2000, 2)) + 0.5
        statistic, p = energy_distance_test(a, b, n_permutations=199, seed=3)
        assert statistic > 0
        assert p < 0.01

    def test_without_permutations(self):
        _, p = energy_distance_test(RNG.normal(size=20), RNG.normal(size=30), n_permutations=0)
        assert p is None

    def test_dimension_mismatch(self):
        with pytest.raises(SampleError):
            energy_distance_test(np.zeros((5, 2)), np.zeros((5, 3)))

    @pytest.mark.slow
    def test_same_law_calibration(self):
        accepted = 0
        for trial in range(100):
            rng = np.random.default_rng(trial)
            _, p = energy_distance_test(rng.normal(size=(200, 2)), rng.normal(size=(200, 2)),
                                        n_permutations=199, seed=trial)
            accepted += p > 0.01
        assert accepted >= 95


class TestMoments:
    def test_same_sample(self):
        x = RNG.normal(size=(100, 3))
        z = moment_compare(x, x.copy())
        assert z == {"mean": [0.0] * 3, "variance": [0.0] * 3}

    def test_constant_samples(self):
        z = moment_compare(np.ones(5), 2 * np.ones(5), orders=1)
        assert z == {"mean": [-np.inf]}

    def test_too_small(self):
        with pytest.raises(SampleError):
            moment_compare([1.0], [1.0, 2.0])

    def test_detects_shift_and_spread(self):
        a = RNG.normal(size=(5000, 2))
        b = RNG.normal(size=(5000, 2)) * [1.0, 1.5] + [0.2, 0.0]
        z = moment_compare(a, b)
        assert abs(z["mean"][0]) > 3.29 and abs(z["mean"][1]) < 3.29
        assert abs(z["variance"][1]) > 3.29

    def test_same_law_calibration(self):
        flagged = 0
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            z = moment_compare(rng.normal(size=2000), rng.normal(size=2000))
            flagged += max(abs(z["mean"][0]), abs(z["variance"][0])) > 3.29
        assert flagged <= 5


class TestHolm:
    def test_step_down(self):
        reject, adjusted, corrected = holm([0.01, 0.04, 0.03], 0.05)
        np.testing.assert_array_equal(reject, [True, False, False])
        np.testing.assert_allclose(adjusted, [0.03, 0.06, 0.06])
        assert corrected == pytest.approx(0.05 / 3)

    def test_combine(self):
        entries = [{"test": "ks", "statistic": 0.1, "p_value": 0.2},
                   {"test": "ks", "statistic": 0.4, "p_value": 1e-5}]
        report = combine("demo", entries, 0.01)
        assert report.verdict == INCONSISTENT
        assert report.statistic == 0.4
        assert report.breakdown[1]["reject"] and not report.breakdown[0]["reject"]
        assert report.to_dict()["corrected_alpha"] == 0.005

    def test_combine_consistent(self):
        report = combine("demo", [{"test": "ks", "statistic": 0.0, "p_value": 1.0}], 0.01)
        assert report.consistent


class TestIdentifiability:
    def test_needs_enough_paths(self):
        builtin = ou()
        with pytest.raises(SampleError):
            identifiability_check(builtin.system, builtin.system, builtin.spec, (1.0,), MIN_KS_SAMPLES - 1,
                                  0.125, 0)

    def test_self(self):
        builtin = ou()
        report = identifiability_check(builtin.system, builtin.system, builtin.spec, (0.5, 1.0), 1000,
                                       2.0 ** -5, 0, alpha=1e-3, n_permutations=99)
        assert report.verdict == CONSISTENT
        assert len(report.breakdown) == 3
        assert report.details["seeds"][0] != report.details["seeds"][1]
        assert report.details["generator"]["structurally_equal"]

    @pytest.mark.slow
    def test_self_calibration(self):
        builtin = ou()
        rejections = 0
        for seed in range(100):
            report = identifiability_check(builtin.system, builtin.system, builtin.spec, (1.0,), 1000, 0.25, seed,
                                           check_hypothesis=False, n_permutations=19)
            rejections += report.verdict == INCONSISTENT
        assert rejections <= 5

    def test_hypothesis_violated(self):
        builtin, scaled = scaled_ou(1.25)
        assert not generator_hypothesis(builtin.system, scaled).structurally_equal
        report = identifiability_check(builtin.system, scaled, builtin.spec, (1.0,), 1000, 2.0 ** -5, 0,
                                       n_permutations=19)
        assert report.verdict == HYPOTHESIS_VIOLATED

    @pytest.mark.slow
    def test_detects_scaled_diffusion(self):
        builtin, scaled = scaled_ou(1.25)
        report = identifiability_check(builtin.system, scaled, builtin.spec, (0.5, 1.0), 10_000, 2.0 ** -6, 1,
                                       check_hypothesis=False, n_permutations=199)
        assert report.verdict == INCONSISTENT

    @pytest.mark.slow
    def test_two_signatures(self):
        builtin = two_signatures()
        report = identifiability_check(builtin.system, builtin.companion, builtin.spec, (0.5, 1.0), 10_000,
                                       1e-3, 2, alpha=0.01, n_permutations=199)
        assert report.verdict == CONSISTENT
