from fractions import Fraction

import numpy as np
import pytest

from latwalk.fractal import (
    GDIFS,
    Edge,
    GDIFSError,
    PathError,
    cf_digits,
    dioph_report,
    direct_dioph_search,
    gauss_digit_probability,
    gauss_statistics,
    gdifs_from_json,
    gdifs_to_json,
    hausdorff_dimension,
    irreducibility_falsifier,
    magic_formula_check,
    natural_project,
    natural_project_exact,
    spectral_radius_at,
    trajectory_report,
    wang_measure,
    wang_point_sample,
)
from latwalk.groups import Similarity
from latwalk.markov import sample_path, stationary_distribution, validate_chain
from latwalk.presets import get_gdifs
from latwalk.rng import Stream

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def scalar_sim(r, b):
    return Similarity(1, 1, r, [[1.0]], [[1.0]], [[b]])


def single_loop(r=0.5):
    return GDIFS(vertices=("v",), edges=(Edge("e", "v", "v", scalar_sim(r, 0.3)),))


class TestHausdorffDimension:
    def test_single_edge_dimension_zero(self):
        assert hausdorff_dimension(single_loop(0.37)) == pytest.approx(0.0, abs=1e-12)

    def test_cantor(self):
        s = hausdorff_dimension(get_gdifs("cantor-one-third"))
        assert s == pytest.approx(np.log(2) / np.log(3), abs=1e-9)

    def test_two_vertex_golden_mean(self):
        s = hausdorff_dimension(get_gdifs("two-vertex-golden"))
        assert s == pytest.approx(np.log2((1 + np.sqrt(5)) / 2), abs=1e-9)

    def test_root_property(self):
        g = get_gdifs("two-vertex-golden")
        s = hausdorff_dimension(g)
        assert spectral_radius_at(g, s) == pytest.approx(1.0, abs=1e-10)

    def test_monotone_under_new_edge(self):
        base = get_gdifs("cantor-one-third")
        s0 = hausdorff_dimension(base)
        bigger = GDIFS(
            vertices=base.vertices,
            edges=base.edges + (Edge("2", "v", "v", scalar_sim(1 / 3, 1 / 3)),),
        )
        assert hausdorff_dimension(bigger) >= s0 - 1e-12

    def test_requires_contraction(self):
        g = GDIFS(vertices=("v",), edges=(Edge("e", "v", "v", scalar_sim(1.5, 0.0)),))
        with pytest.raises(GDIFSError):
            hausdorff_dimension(g)


class TestWangMeasure:
    def test_cantor_is_uniform_bernoulli(self):
        chain = wang_measure(get_gdifs("cantor-one-third"))
        assert np.allclose(chain.trans, 0.5)
        assert np.allclose(chain.start, [0.5, 0.5])

    def test_single_loop_degenerate(self):
        chain = wang_measure(single_loop())
        assert np.allclose(chain.trans, [[1.0]])

    def test_two_vertex_rows_and_stationarity(self):
        g = get_gdifs("two-vertex-golden")
        chain = wang_measure(g)
        assert np.max(np.abs(chain.trans.sum(axis=0) - 1.0)) <= 1e-10
        rep = validate_chain(chain)
        assert rep.ok and rep.irreducible
        pi = stationary_distribution(chain)
        assert np.allclose(pi, chain.start, atol=1e-9)
        # adapted: transitions positive exactly along path continuations
        for j, e in enumerate(g.edges):
            for i, e2 in enumerate(g.edges):
                assert (chain.trans[i, j] > 0) == (e.target == e2.source)

    def test_occupation_matches_start(self):
        g = get_gdifs("two-vertex-golden")
        chain = wang_measure(g)
        path = sample_path(chain, 40_000, Stream(1, 0))
        freq = np.bincount(path, minlength=3) / len(path)
        assert np.max(np.abs(freq - chain.start)) < 0.01

    def test_coding_inverts_similarities(self):
        g = get_gdifs("cantor-one-third")
        chain = wang_measure(g)
        # g_e = phi_e^{-1}: for phi(x) = x/3 the element scales by 3
        from latwalk.groups import aku_decompose

        p = aku_decompose(chain.coding[0], 1, 1)
        assert p.t == pytest.approx(np.log(3.0) / 2, abs=1e-12)


class TestNaturalProjection:
    def test_left_fixed_point(self):
        g = get_gdifs("cantor-one-third")
        pt, err = natural_project(g, [0] * 40)
        assert abs(pt[0, 0]) <= err + 1e-15
        assert err < 1e-15

    def test_right_fixed_point(self):
        g = get_gdifs("cantor-one-third")
        pt, err = natural_project(g, [1] * 40)
        assert pt[0, 0] == pytest.approx(1.0, abs=max(err, 1e-12))

    def test_alternating_word(self):
        g = get_gdifs("cantor-one-third")
        pt, err = natural_project(g, [0, 1] * 30)
        assert pt[0, 0] == pytest.approx(0.25, abs=max(err, 1e-12))

    def test_seed_independence_within_bound(self):
        g = get_gdifs("two-vertex-golden")
        chain = wang_measure(g)
        omega = sample_path(chain, 30, Stream(3, 0))
        p1, err = natural_project(g, omega, seed_point=[[0.0]])
        p2, _ = natural_project(g, omega, seed_point=[[0.9]])
        assert abs(p1[0, 0] - p2[0, 0]) <= 2 * err

    def test_rejects_non_path(self):
        g = get_gdifs("two-vertex-golden")
        with pytest.raises(PathError):
            natural_project(g, [0, 0])  # edge uv cannot follow uv

    def test_exact_matches_float(self):
        g = get_gdifs("cantor-one-third")
        omega = [0, 1, 1, 0, 1] * 8
        exact, err = natural_project_exact(g, omega)
        approx, _ = natural_project(g, omega)
        assert float(exact) == pytest.approx(approx[0, 0], abs=1e-12)
        assert err < Fraction(1, 10**15)


class TestContinuedFractions:
    def test_golden_all_ones(self):
        digits, term = cf_digits(GOLDEN, 30)
        assert not term
        assert digits == [1] * 30

    def test_half_terminates(self):
        digits, term = cf_digits(0.5, 10)
        assert digits[0] == 2
        assert term

    def test_two_sevenths(self):
        digits, term = cf_digits(Fraction(2, 7), 10)
        assert digits == [3, 2]
        assert term

    def test_reconstruction_error(self):
        x = 0.37214
        digits, _ = cf_digits(x, 12)
        num, den = 1, digits[-1]
        for a in reversed(digits[:-1]):
            num, den = den, a * den + num
        assert abs(x - num / den) <= 1.0 / den**2

    def test_exact_engine_matches_float(self):
        # float digits are trusted exactly up to the resolution cutoff, where
        # they must agree with exact arithmetic on the same rational
        x = 0.2937465
        df, term = cf_digits(x, 15)
        de, _ = cf_digits(Fraction(x), 15)
        assert term  # this x has a large digit early; float engine cuts off
        assert df == de[: len(df)]

    def test_float_cap(self):
        with pytest.raises(ValueError):
            cf_digits(0.3, 100)


class TestGaussStatistics:
    def test_prediction_value(self):
        assert gauss_digit_probability(1) == pytest.approx(0.415037, abs=1e-6)

    def test_degenerate_flag(self):
        pts = [GOLDEN] * 120
        rep = gauss_statistics(pts, 25)
        assert rep.degenerate
        assert rep.digit1_frequency == pytest.approx(1.0)

    def test_uniform_points_close_to_gauss(self):
        rng = np.random.default_rng(0)
        pts = list(rng.random(400))
        rep = gauss_statistics(pts, 30)
        assert abs(rep.digit1_frequency - 0.415) < 0.03
        assert rep.pvalue > 1e-4
        assert not rep.degenerate

    def test_needs_points(self):
        with pytest.raises(ValueError):
            gauss_statistics([0.3] * 10, 5)


class TestWangPointSample:
    def test_points_exact_and_in_unit_interval(self):
        g = get_gdifs("cantor-one-third")
        pts = wang_point_sample(g, 5, 50, Stream(11, 0))
        assert len(pts) == 5
        for p in pts:
            assert isinstance(p, Fraction)
            assert 0 < p < 1

    def test_digits_reproducible(self):
        g = get_gdifs("cantor-one-third")
        a = wang_point_sample(g, 3, 40, Stream(12, 0))
        b = wang_point_sample(g, 3, 40, Stream(12, 0))
        assert a == b


class TestDirectSearch:
    def test_rational_half(self):
        curve = direct_dioph_search([[0.5]], 1000)
        assert curve.overall_min == 0.0
        assert curve.liminf_estimate == 0.0

    def test_golden_hurwitz_value(self):
        curve = direct_dioph_search([[GOLDEN]], 1000)
        assert curve.liminf_estimate == pytest.approx(0.4472, abs=0.001)
        # cumulative min is dominated by q = 1 and stays nonincreasing
        vals = [curve.cumulative_min[q] for q in curve.q_schedule]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))
        assert curve.overall_min == pytest.approx((3 - np.sqrt(5)) / 2, abs=1e-9)

    def test_infeasible_guard(self):
        with pytest.raises(ValueError):
            direct_dioph_search(np.zeros((1, 3)), 10**6)


class TestTrajectory:
    def test_golden_stays_high(self):
        rep = trajectory_report([[GOLDEN]], 30.0, 0.05)
        assert rep.trajectory_min_shortest >= 0.3
        assert rep.badly_approx_evidence

    def test_rational_crashes(self):
        rep = trajectory_report([[0.5]], 30.0, 0.05)
        assert rep.trajectory_min_shortest < 0.01
        assert not rep.badly_approx_evidence

    def test_dani_consistency_sampled(self):
        # qualitative agreement between the trajectory and the brute force
        # search, skipping a grey band around the thresholds
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(20):
            alpha = float(rng.random())
            rep = dioph_report([[alpha]], 20.0, 0.05, 512)
            traj = rep.trajectory_min_shortest
            direct = min(
                rep.direct_search_curve.cumulative_min[
                    rep.direct_search_curve.q_schedule[-1]
                ],
                1.0,
            )
            if 0.05 < traj < 0.2 or 0.002 < direct < 0.04:
                continue  # borderline for the finite windows
            checked += 1
            assert (traj >= 0.2) == (direct >= 0.04)
        assert checked >= 10

    def test_flow_time_cap(self):
        with pytest.raises(ValueError):
            trajectory_report([[0.3]], 300.0, 0.05)


class TestMagicFormula:
    def test_prefix_zero_is_exact(self):
        g = get_gdifs("cantor-one-third")
        chain = wang_measure(g)
        omega = sample_path(chain, 60, Stream(4, 0))
        assert magic_formula_check(g, omega, 0) <= 1e-12

    def test_cantor_prefix_twenty(self):
        g = get_gdifs("cantor-one-third")
        chain = wang_measure(g)
        omega = sample_path(chain, 80, Stream(5, 0))
        assert magic_formula_check(g, omega, 20) <= 1e-6

    def test_two_vertex_prefix(self):
        g = get_gdifs("two-vertex-golden")
        chain = wang_measure(g)
        omega = sample_path(chain, 120, Stream(6, 0))
        assert magic_formula_check(g, omega, 25) <= 1e-6

    def test_path_too_short(self):
        g = get_gdifs("cantor-one-third")
        with pytest.raises(PathError):
            magic_formula_check(g, [0, 1, 0], 2)


class TestStructure:
    def test_json_roundtrip(self):
        g = get_gdifs("two-vertex-golden")
        back = gdifs_from_json(gdifs_to_json(g))
        assert back.vertices == g.vertices
        assert [e.edge_id for e in back.edges] == [e.edge_id for e in g.edges]

    def test_load_rejects_bad_edges(self):
        with pytest.raises(GDIFSError):
            gdifs_from_json(
                {
                    "vertices": ["v"],
                    "edges": [
                        {"id": "e", "from": "v", "to": "v", "ratio": -1.0,
                         "o1": [[1.0]], "o2": [[1.0]], "translation": [[0.0]]}
                    ],
                }
            )

    def test_disconnected_rejected(self):
        with pytest.raises(GDIFSError):
            GDIFS(
                vertices=("u", "v"),
                edges=(
                    Edge("uu", "u", "u", scalar_sim(0.5, 0.0)),
                    Edge("vv", "v", "v", scalar_sim(0.5, 0.0)),
                ),
            )

    def test_falsifier_catches_common_fixed_point(self):
        g = GDIFS(
            vertices=("v",),
            edges=(
                Edge("a", "v", "v", scalar_sim(1 / 3, 0.0)),
                Edge("b", "v", "v", scalar_sim(1 / 2, 0.0)),
            ),
        )
        found = irreducibility_falsifier(g)
        assert found is not None

    def test_falsifier_passes_cantor(self):
        assert irreducibility_falsifier(get_gdifs("cantor-one-third")) is None

    def test_t_gaps_bounded(self):
        g = get_gdifs("cantor-one-third")
        chain = wang_measure(g)
        from latwalk.groups import aku_decompose

        ts = [aku_decompose(m, 1, 1).t for m in chain.coding]
        bound = max(abs(t) for t in ts)
        path = sample_path(chain, 500, Stream(7, 0))
        tn = np.cumsum([ts[i] for i in path[:-1]])
        gaps = np.abs(np.diff(np.concatenate([[0.0], tn])))
        assert np.max(gaps) <= bound + 1e-12
