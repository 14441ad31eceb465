import numpy as np
import pytest

from latwalk.expansion import (
    RepresentationError,
    grassmannian_expansion_check,
    lyapunov_spectrum,
    representation_matrices,
    vector_growth_rate,
    wedge_norm_growth,
)
from latwalk.linalg import adjoint_coordinate, random_sl
from latwalk.markov import ChainSpec
from latwalk.presets import get_chain
from latwalk.rng import Stream


def iid_single(g):
    return ChainSpec.iid([1.0], [g])


class TestLyapunovSpectrum:
    def test_deterministic_diagonal_exact(self):
        chain = iid_single(np.diag([2.0, 0.5]))
        rep = lyapunov_spectrum(chain, "standard", 1000, 4, Stream(0, 0))
        assert np.allclose(rep.exponent_estimates, [np.log(2), -np.log(2)], atol=1e-12)
        assert np.allclose(rep.per_replica.std(axis=0), 0.0, atol=1e-14)

    def test_sum_rule_random_sl3(self):
        rng = np.random.default_rng(2)
        mats = [random_sl(3, rng) for _ in range(3)]
        chain = ChainSpec.iid([1 / 3] * 3, mats)
        rep = lyapunov_spectrum(chain, "standard", 4000, 6, Stream(1, 0))
        total = rep.exponent_estimates.sum()
        tol = 3 * np.sqrt(np.sum(rep.std_errors**2)) + 1e-9
        assert abs(total) <= tol

    def test_nonincreasing(self):
        chain = get_chain("sl3-paper-example")
        rep = lyapunov_spectrum(chain, "standard", 2000, 4, Stream(2, 0))
        est = rep.exponent_estimates
        assert np.all(est[:-1] >= est[1:] - 1e-9)

    def test_sl3_standard_top_is_log3(self):
        chain = get_chain("sl3-paper-example")
        rep = lyapunov_spectrum(chain, "standard", 20_000, 8, Stream(3, 0))
        se = max(rep.std_errors[0], 1e-6)
        assert abs(rep.exponent_estimates[0] - np.log(3.0)) <= 3 * se

    def test_wedge_consistency(self):
        # top exponent of the wedge(k) rep = sum of top k standard exponents
        chain = get_chain("sl3-paper-example")
        std = lyapunov_spectrum(chain, "standard", 10_000, 6, Stream(4, 0))
        for k in (1, 2):
            wk = lyapunov_spectrum(chain, ("wedge", k), 10_000, 6, Stream(5, k))
            lhs = wk.exponent_estimates[0]
            rhs = std.partial_sums[k - 1]
            tol = 3 * np.sqrt(wk.std_errors[0] ** 2 + np.sum(std.std_errors[:k] ** 2))
            assert abs(lhs - rhs) <= tol + 1e-9

    def test_size_guard(self):
        chain = iid_single(np.eye(14))
        with pytest.raises(RepresentationError):
            lyapunov_spectrum(chain, ("wedge", 7), 1000, 1, Stream(0, 0))

    def test_requires_min_steps(self):
        with pytest.raises(ValueError):
            lyapunov_spectrum(iid_single(np.eye(2)), "standard", 100, 1, Stream(0, 0))


class TestVectorGrowth:
    def test_paper_coordinate_lines_exact(self):
        chain = get_chain("sl3-paper-example")
        d = 8
        v_pp = np.zeros(d)
        v_pp[adjoint_coordinate(3, 0, 2)] = 1.0
        v_p = np.zeros(d)
        v_p[adjoint_coordinate(3, 1, 2)] = 1.0
        rate_pp, se_pp = vector_growth_rate(chain, "adjoint", v_pp, 2000, 4, Stream(6, 0))
        rate_p, se_p = vector_growth_rate(chain, "adjoint", v_p, 2000, 4, Stream(6, 1))
        assert rate_pp == pytest.approx(np.log(18.0), abs=1e-9)
        assert rate_p == pytest.approx(np.log(12.0), abs=1e-9)
        assert se_pp == pytest.approx(0.0, abs=1e-12)
        assert se_p == pytest.approx(0.0, abs=1e-12)

    def test_identity_process(self):
        chain = iid_single(np.eye(3))
        rate, _ = vector_growth_rate(chain, "standard", np.ones(3), 1000, 2, Stream(7, 0))
        assert rate == pytest.approx(0.0, abs=1e-12)

    def test_rate_within_spectrum(self):
        chain = get_chain("sl3-paper-example")
        spec = lyapunov_spectrum(chain, "standard", 10_000, 6, Stream(8, 0))
        rng = np.random.default_rng(0)
        for _ in range(3):
            v = rng.standard_normal(3)
            rate, se = vector_growth_rate(chain, "standard", v, 10_000, 6, Stream(8, 1))
            top = spec.exponent_estimates[0]
            bot = spec.exponent_estimates[-1]
            slack = 3 * (se + spec.std_errors.max()) + 1e-6
            assert bot - slack <= rate <= top + slack

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            vector_growth_rate(iid_single(np.eye(2)), "standard", [0.0, 0.0],
                               1000, 1, Stream(0, 0))


class TestWedgeNormOracle:
    def test_qr_partial_sums_match_direct_wedge_growth(self):
        rng = np.random.default_rng(10)
        mats = [random_sl(3, rng) for _ in range(2)]
        chain = ChainSpec.iid([0.5, 0.5], mats)
        n = 5000
        reps = 6
        spec = lyapunov_spectrum(chain, "standard", n, reps, Stream(11, 0))
        for k in (1, 2):
            direct = np.array([
                wedge_norm_growth(chain, k, n, Stream(11, 0).spawn(r))
                for r in range(reps)
            ])
            lhs = spec.partial_sums[k - 1]
            rhs = direct.mean()
            se = np.sqrt(
                np.sum(spec.std_errors[:k] ** 2)
                + direct.std(ddof=1) ** 2 / reps
            )
            assert abs(lhs - rhs) <= 3 * se + 1e-3 / n * 30


class TestGrassmannianCheck:
    def test_identity_process_is_counterexample(self):
        chain = iid_single(np.eye(2))
        v = grassmannian_expansion_check(
            chain, 1, 2000, 20, 8, Stream(12, 0), rep="standard", n_replicas=2,
            mc_samples=16,
        )
        assert v.is_counterexample
        assert v.min_sampled_rate == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_mixture_is_counterexample(self):
        chain = get_chain("sym-mixture-2d")
        v = grassmannian_expansion_check(
            chain, 1, 4000, 50, 16, Stream(13, 0), rep="standard", n_replicas=4,
        )
        assert v.is_counterexample
        assert abs(v.min_sampled_rate) < 0.05

    def test_sl3_adjoint_expands_k1(self):
        chain = get_chain("sl3-paper-example")
        v = grassmannian_expansion_check(
            chain, 1, 3000, 40, 16, Stream(14, 0), rep="adjoint", n_replicas=4,
        )
        assert not v.is_counterexample
        assert v.min_sampled_rate > 0.5

    def test_expanding_single_matrix(self):
        chain = iid_single(np.diag([2.0, 0.5]))
        v = grassmannian_expansion_check(
            chain, 1, 3000, 30, 8, Stream(15, 0), rep="standard", n_replicas=2,
        )
        # generic directions all grow at log 2 under a fixed diagonal matrix
        assert not v.is_counterexample
        assert v.min_sampled_rate == pytest.approx(np.log(2.0), abs=0.01)


class TestRepresentations:
    def test_standard_passthrough(self):
        chain = get_chain("sl3-paper-example")
        mats = representation_matrices(chain, "standard")
        assert mats.shape == (3, 3, 3)

    def test_adjoint_dimension(self):
        chain = get_chain("sl3-paper-example")
        mats = representation_matrices(chain, "adjoint")
        assert mats.shape == (3, 8, 8)

    def test_unknown_rep(self):
        with pytest.raises(RepresentationError):
            representation_matrices(get_chain("sl3-paper-example"), "spin")
