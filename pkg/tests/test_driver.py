"""Driver triplets, increment sampling and the path streams."""
import numpy as np
import pytest

from driver.levy import (LevyTriplet, JumpAtom, TripletError, NotPositiveSemidefiniteError, psd_factor,
                         characteristic_function, sample_increments, sample_increment,
                         empirical_characteristic_function, u_grid)
from driver.streams import path_stream, jump_stream, initial_stream, stream_id, chunk_ranges, run_chunked, stack_chunks

RNG = np.random.default_rng(0)


class TestPsdFactor:
    def test_identity(self):
        np.testing.assert_array_equal(psd_factor(np.eye(3)), np.eye(3))

    def test_zero(self):
        np.testing.assert_array_equal(psd_factor(np.zeros((2, 2))), np.zeros((2, 2)))

    def test_reconstruction(self):
        M = RNG.normal(size=(4, 4))
        C = M.T @ M
        L = psd_factor(C)
        np.testing.assert_allclose(L @ L.T, C, atol=1e-10)

    def test_rank_deficient(self):
        C = np.diag([0.0, 1.0, 1.0])
        L = psd_factor(C)
        np.testing.assert_allclose(L @ L.T, C, atol=1e-12)
        np.testing.assert_array_equal(L[0], 0.0)

    def test_first_entry_nonnegative(self):
        M = RNG.normal(size=(3, 3))
        L = psd_factor(M @ M.T)
        for col in L.T:
            nonzero = col[col != 0]
            assert nonzero.size == 0 or nonzero[0] >= 0

    def test_not_psd(self):
        with pytest.raises(NotPositiveSemidefiniteError, match="not positive semidefinite"):
            psd_factor(np.diag([1.0, -1.0]))

    def test_not_symmetric(self):
        with pytest.raises(TripletError):
            psd_factor([[1.0, 0.5], [0.0, 1.0]])


class TestTriplet:
    def test_bad_shapes(self):
        with pytest.raises(TripletError):
            LevyTriplet(2, [0.0], np.eye(2))
        with pytest.raises(TripletError):
            LevyTriplet(1, [0.0], [[1.0]], jumps=((1.0, (1.0, 2.0)),))

    def test_bad_atoms(self):
        with pytest.raises(TripletError):
            JumpAtom(0.0, (1.0,))
        with pytest.raises(TripletError):
            JumpAtom(1.0, (0.0,))

    def test_time_and_brownian(self):
        z = LevyTriplet.time_and_brownian(2)
        assert z.dim == 3
        np.testing.assert_array_equal(z.alpha, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(z.factor[0], 0.0)

    def test_compensated_drift(self):
        z = LevyTriplet(1, [1.0], [[0.0]], jumps=((2.0, (0.5,)), (1.0, (3.0,))))
        np.testing.assert_allclose(z.compensated_drift, [0.0])
        np.testing.assert_array_equal(z.small_jump_mask, [True, False])

    def test_with_radius_keeps_law(self):
        z = LevyTriplet(1, [0.2], [[0.5]], jumps=((2.0, (0.5,)), (1.0, (3.0,))))
        wider = z.with_radius(5.0)
        np.testing.assert_allclose(wider.compensated_drift, z.compensated_drift, atol=1e-15)
        for u in (0.3, -1.0, 2.0):
            assert abs(characteristic_function(wider, u, 1.0) - characteristic_function(z, u, 1.0)) < 1e-12

    def test_identical_to(self):
        assert LevyTriplet.brownian(2).identical_to(LevyTriplet.brownian(2))
        assert not LevyTriplet.brownian(2).identical_to(LevyTriplet.brownian(2, cov=2 * np.eye(2)))


class TestCharacteristicFunction:
    def test_standard_gaussian(self):
        z = LevyTriplet(1, [0.0], [[1.0]])
        assert characteristic_function(z, 1.0, 1.0) == pytest.approx(np.exp(-0.5), abs=1e-15)

    def test_atom_outside_ball(self):
        z = LevyTriplet(1, [0.0], [[0.0]], jumps=((1.0, (2.0,)),))
        for u in (0.1, 0.7, 2.5):
            expected = np.exp(np.exp(2j * u) - 1.0)
            assert abs(characteristic_function(z, u, 1.0) - expected) < 1e-14

    def test_pure_drift(self):
        z = LevyTriplet(1, [1.0], [[0.0]])
        for u, t in ((0.5, 1.0), (2.0, 0.25)):
            assert abs(characteristic_function(z, u, t) - np.exp(1j * t * u)) < 1e-15

    @pytest.mark.slow
    @pytest.mark.parametrize("z", [
        LevyTriplet(2, [0.3, -0.2], [[1.0, 0.3], [0.3, 0.5]]),
        LevyTriplet(2, [0.1, 0.0], [[0.0, 0.0], [0.0, 0.0]], jumps=((1.5, (0.4, 0.0)), (0.5, (2.0, -1.0)))),
    ], ids=["brownian-drift", "two-atoms"])
    def test_empirical_matches(self, z):
        n = 1_000_000
        samples = sample_increments(z, 0.5, n, path_stream(3, 0), jump_stream(3, 0))
        for u in u_grid(2, 20):
            assert abs(empirical_characteristic_function(samples, u) - characteristic_function(z, u, 0.5)) \
                   < 3 / np.sqrt(n) + 0.005

    @pytest.mark.slow
    def test_two_steps_have_law_of_one(self):
        z = LevyTriplet(2, [0.1, -0.2], [[1.0, 0.3], [0.3, 0.5]], jumps=((1.5, (0.4, 0.0)), (0.5, (2.0, -1.0))))
        n = 1_000_000
        halves = sample_increments(z, 0.25, 2 * n, path_stream(4, 0), jump_stream(4, 0))
        pairs = halves[0::2] + halves[1::2]
        for u in u_grid(2, 20):
            assert abs(empirical_characteristic_function(pairs, u) - characteristic_function(z, u, 0.5)) \
                   < 3 / np.sqrt(n) + 0.005


class TestSampling:
    def test_deterministic_drift(self):
        z = LevyTriplet(1, [2.0], [[0.0]])
        np.testing.assert_array_equal(sample_increment(z, 0.5, path_stream(0, 0)), [1.0])

    def test_atom_increments_are_counts(self):
        z = LevyTriplet(1, [0.0], [[0.0]], jumps=((2.0, (3.0,)),))
        dz = sample_increments(z, 0.5, 5000, path_stream(1, 0))[:, 0]
        np.testing.assert_array_equal(dz % 3.0, 0.0)
        assert dz.min() >= 0
        assert dz.mean() / 3.0 == pytest.approx(1.0, rel=0.1)

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            sample_increments(LevyTriplet.brownian(1), 0.0, 3, path_stream(0, 0))

    def test_gaussian_variance(self):
        z = LevyTriplet.brownian(1, cov=[[4.0]])
        dz = sample_increments(z, 0.25, 20_000, path_stream(2, 0))[:, 0]
        assert dz.var() == pytest.approx(1.0, rel=0.05)

    @pytest.mark.parametrize("separate", [False, True])
    def test_shorter_horizon_is_prefix(self, separate):
        z = LevyTriplet(1, [0.0], [[1.0]], jumps=((2.0, (0.5,)),))

        def draw(n_steps):
            jumps = jump_stream(6, 0) if separate else None
            return sample_increments(z, 0.25, n_steps, path_stream(6, 0), jumps)

        np.testing.assert_array_equal(draw(4), draw(8)[:4])

    def test_jump_stream_distinct(self):
        a = path_stream(5, 7).standard_normal(4)
        assert not np.array_equal(a, jump_stream(5, 7).standard_normal(4))
        assert not np.array_equal(jump_stream(5, 7).standard_normal(4), initial_stream(5, 7).standard_normal(4))


class TestStreams:
    def test_stream_reproducible(self):
        a = path_stream(5, 7).standard_normal(4)
        b = path_stream(5, 7).standard_normal(4)
        np.testing.assert_array_equal(a, b)

    def test_streams_distinct(self):
        a = path_stream(5, 7).standard_normal(4)
        assert not np.array_equal(a, path_stream(5, 8).standard_normal(4))
        assert not np.array_equal(a, path_stream(6, 7).standard_normal(4))
        assert not np.array_equal(a, initial_stream(5, 7).standard_normal(4))

    def test_stream_id(self):
        assert stream_id(5, 7) == "philox:5:7"

    def test_chunk_ranges(self):
        ranges = chunk_ranges(10, 4)
        assert [list(r) for r in ranges] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
        with pytest.raises(ValueError):
            chunk_ranges(0)

    def test_thread_count_does_not_change_results(self):
        def work(paths):
            return np.stack([path_stream(11, i).standard_normal(3) for i in paths])

        serial = stack_chunks(run_chunked(work, 50, threads=1, chunk=7))
        parallel = stack_chunks(run_chunked(work, 50, threads=4, chunk=7))
        np.testing.assert_array_equal(serial, parallel)
