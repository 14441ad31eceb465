import numpy as np
import pytest

from latwalk.markov import (
    ChainError,
    ChainSpec,
    NotInPChain,
    excursion_stats,
    excursion_word_chisquare,
    expected_return_time,
    renewal_t_identity,
    renewal_word_law,
    sample_excursion,
    sample_excursions,
    stationary_distribution,
    validate_chain,
    word_weight,
)
from latwalk.rng import Stream


def flip_chain():
    # deterministic a <-> b
    return ChainSpec(
        states=("a", "b"),
        trans=np.array([[0.0, 1.0], [1.0, 0.0]]),
        coding=(np.eye(2), np.eye(2)),
        start=np.array([1.0, 0.0]),
    )


def ab_chain(t_a=1.0, t_b=-0.2):
    # p(a->b) = 1, p(b->a) = p(b->b) = 1/2, coded in P with given flow times
    g_a = np.diag([np.exp(t_a), np.exp(-t_a)])
    g_b = np.diag([np.exp(t_b), np.exp(-t_b)])
    return ChainSpec(
        states=("a", "b"),
        trans=np.array([[0.0, 0.5], [1.0, 0.5]]),
        coding=(g_a, g_b),
        start=np.array([1.0, 0.0]),
    )


def single_chain(g=None):
    if g is None:
        g = np.diag([2.0, 0.5])
    return ChainSpec(states=("e",), trans=np.array([[1.0]]), coding=(g,),
                     start=np.array([1.0]))


class TestValidate:
    def test_flip_chain(self):
        rep = validate_chain(flip_chain())
        assert rep.ok and rep.irreducible
        assert rep.universally_accessible == ()

    def test_ab_chain(self):
        rep = validate_chain(ab_chain())
        assert rep.ok and rep.irreducible
        assert rep.universally_accessible == ("b",)

    def test_single_state(self):
        rep = validate_chain(single_chain())
        assert rep.ok and rep.irreducible
        assert rep.universally_accessible == ("e",)

    def test_nonstochastic_flagged(self):
        c = ChainSpec(
            states=("a", "b"),
            trans=np.array([[0.5, 0.2], [0.49, 0.8]]),
            coding=(np.eye(2), np.eye(2)),
            start=np.array([0.5, 0.5]),
        )
        rep = validate_chain(c)
        assert not rep.ok
        assert rep.state_errors == ("a",)

    def test_reducible_detected(self):
        c = ChainSpec(
            states=("a", "b"),
            trans=np.array([[1.0, 0.3], [0.0, 0.7]]),
            coding=(np.eye(2), np.eye(2)),
            start=np.array([0.5, 0.5]),
        )
        assert not validate_chain(c).irreducible
        with pytest.raises(ChainError):
            stationary_distribution(c)


class TestStationary:
    def test_flip(self):
        assert np.allclose(stationary_distribution(flip_chain()), [0.5, 0.5])

    def test_ab_hand_solve(self):
        pi = stationary_distribution(ab_chain())
        assert np.allclose(pi, [1 / 3, 2 / 3], atol=1e-14)

    def test_single(self):
        assert np.allclose(stationary_distribution(single_chain()), [1.0])

    def test_fixed_point_residual(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            t = rng.uniform(0.05, 1.0, size=(n, n))
            t /= t.sum(axis=0, keepdims=True)
            c = ChainSpec(
                states=tuple(f"s{i}" for i in range(n)),
                trans=t,
                coding=tuple(np.eye(2) for _ in range(n)),
                start=np.full(n, 1.0 / n),
            )
            pi = stationary_distribution(c)
            assert np.max(np.abs(t @ pi - pi)) <= 1e-12
            assert np.all(pi > 0)
            assert pi.sum() == pytest.approx(1.0, abs=1e-12)

    def test_kac(self):
        assert expected_return_time(ab_chain(), "a") == pytest.approx(3.0)


class TestExcursions:
    def test_single_state(self):
        exc = sample_excursion(single_chain(), "e", Stream(0, 0))
        assert exc.word == ("e",)
        assert exc.weight == pytest.approx(1.0)
        assert np.allclose(exc.element, np.diag([2.0, 0.5]))

    def test_word_weights_hand(self):
        c = ab_chain()
        # word "ba" in display order = path order (a, b)
        assert word_weight(c, ("a", "b")) == pytest.approx(0.5)
        assert word_weight(c, ("a", "b", "b")) == pytest.approx(0.25)

    def test_word_structure(self):
        c = ab_chain()
        rng = Stream(1, 0)
        for _ in range(200):
            exc = sample_excursion(c, "a", rng)
            assert exc.word[-1] == "a"
            assert all(s != "a" for s in exc.word[:-1])

    def test_empirical_law(self):
        c = ab_chain()
        n = 20_000
        counts = {}
        for idx in sample_excursions(c, "a", n, Stream(7, 0)):
            w = tuple(int(i) for i in idx)
            counts[w] = counts.get(w, 0) + 1
        # P(word "ba") = 1/2, P("bba") = 1/4 (path order (a,b), (a,b,b))
        assert counts[(0, 1)] / n == pytest.approx(0.5, abs=0.02)
        assert counts[(0, 1, 1)] / n == pytest.approx(0.25, abs=0.02)

    def test_mean_return_time(self):
        st = excursion_stats(ab_chain(), "a", 10_000, Stream(3, 0))
        assert abs(st.mean_return_time - 3.0) <= 3 * st.se_return_time

    def test_occupation_matches_stationary(self):
        c = ab_chain()
        st = excursion_stats(c, "a", 20_000, Stream(4, 0))
        pi = stationary_distribution(c)
        for j in range(2):
            assert abs(st.pi_estimate[j] - pi[j]) <= 3 * max(st.pi_se[j], 1e-12)

    def test_single_state_moments(self):
        st = excursion_stats(single_chain(), "e", 500, Stream(5, 0))
        assert st.mean_return_time == pytest.approx(1.0)
        assert st.mean_log_gauge == pytest.approx(np.log(2.0), abs=1e-9)

    def test_delta_moments_nondecreasing(self):
        st = excursion_stats(ab_chain(), "a", 2000, Stream(6, 0))
        vals = [st.delta_moments[d] for d in sorted(st.delta_moments)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_geometric_tail(self):
        # exponential recurrence: fitted decay rate of P(tau > l) below 1
        taus = np.array(
            [len(idx) for idx in sample_excursions(ab_chain(), "a", 5000, Stream(8, 0))]
        )
        ls = np.arange(1, 12)
        surv = np.array([(taus > l).mean() for l in ls])
        keep = surv > 0
        slope = np.polyfit(ls[keep], np.log(surv[keep]), 1)[0]
        assert np.exp(slope) < 1.0


class TestRenewalLaw:
    def test_enumeration_matches_hand_weights(self):
        law, covered = renewal_word_law(ab_chain(), "a", mass=0.999)
        assert covered >= 0.999
        top = dict(law[:2])
        assert top[(0, 1)] == pytest.approx(0.5)
        assert top[(0, 1, 1)] == pytest.approx(0.25)

    def test_chisquare_passes(self):
        stat, dof, pval = excursion_word_chisquare(
            ab_chain(), "a", 20_000, Stream(9, 0)
        )
        assert dof >= 5
        assert pval > 0.001

    def test_iid_excursion_length_autocorrelation(self):
        taus = np.array(
            [len(idx) for idx in sample_excursions(ab_chain(), "a", 20_000, Stream(10, 0))]
        )
        x = taus - taus.mean()
        ac = float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
        assert abs(ac) <= 3.0 / np.sqrt(len(taus))


class TestRenewalTIdentity:
    def test_single_state(self):
        g = np.diag([2.0, 0.5])
        lhs, rhs, z, se = renewal_t_identity(single_chain(g), "e", 200, Stream(0, 0))
        assert lhs == pytest.approx(np.log(2.0), abs=1e-12)
        assert rhs == pytest.approx(np.log(2.0), abs=1e-12)

    def test_two_state_hand_value(self):
        lhs, rhs, z, se = renewal_t_identity(ab_chain(), "a", 50_000, Stream(2, 0))
        assert rhs == pytest.approx(0.6, abs=1e-12)
        assert abs(z) <= 3.0

    def test_sign_consistency(self):
        # rhs > 0 iff sum t pi > 0 (return time is positive)
        c = ab_chain(t_a=-1.0, t_b=-0.2)
        _, rhs, _, _ = renewal_t_identity(c, "a", 100, Stream(3, 0))
        pi = stationary_distribution(c)
        t = np.array([-1.0, -0.2])
        assert (rhs > 0) == (float(t @ pi) > 0)

    def test_rejects_non_p_coding(self):
        c = ChainSpec(
            states=("x",),
            trans=np.array([[1.0]]),
            coding=(np.array([[0.0, -1.0], [1.0, 0.0]]),),
            start=np.array([1.0]),
        )
        # rotation by 90 degrees is in SL_2 but has a lower-left entry
        with pytest.raises(NotInPChain):
            renewal_t_identity(c, "x", 10, Stream(0, 0))


class TestIIDAsChain:
    def test_columns_equal_law(self):
        c = ChainSpec.iid([0.25, 0.75], [np.eye(2), np.diag([2.0, 0.5])])
        assert np.allclose(c.trans[:, 0], [0.25, 0.75])
        assert np.allclose(c.trans[:, 1], [0.25, 0.75])
        assert np.allclose(stationary_distribution(c), [0.25, 0.75])

    def test_rejects_bad_weights(self):
        with pytest.raises(ChainError):
            ChainSpec.iid([0.5, 0.4], [np.eye(2), np.eye(2)])
