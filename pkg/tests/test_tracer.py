import math

import numpy as np
import pytest

from conftest import random_rotation
from fbk.errors import DuplicateComponent, NoConvergence, RankDeficient
from fbk.framedlink import SampledLoop, euclidean_ambient, index_of_circle
from fbk.numkit import DEFAULT_TOL
from fbk.tracer import (
    MapSpec,
    SectionSpec,
    TraceOptions,
    hausdorff_distance,
    induced_framing,
    kappa_of_map,
    section_index,
    section_zero_loops,
    suggest_seeds,
    trace_component,
    transport_closed_frame,
)


def quadric(x):
    return np.array([x[0] * x[0] + x[1] * x[1] - 1.0, x[2], x[3]])


def quadric_jac(x):
    return np.array(
        [[2 * x[0], 2 * x[1], 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]]
    )


def quadric_spec():
    return MapSpec(quadric, dimension=4, jacobian=quadric_jac)


def quadric_twisted_spec():
    def f(x):
        base = quadric(x)
        rho = math.hypot(x[0], x[1])
        c, s = x[0] / rho, x[1] / rho
        return np.array([c * base[0] - s * base[1], s * base[0] + c * base[1], base[2]])

    return MapSpec(f, dimension=4)


def s5_splitting(x):
    return np.array([-x[1], x[0], -x[3], x[2], -x[5], x[4]])


def s5_section(x):
    return np.array([0.0, 0.0, -x[4], x[5], x[2], -x[3]])


def s5_spec():
    return SectionSpec(5, s5_splitting, s5_section)


SEED = np.array([1.1, 0.0, 0.05, -0.02])


class TestTraceComponent:
    def test_circle_geometry_and_closure(self):
        stats = {}
        loop = trace_component(quadric_spec(), SEED, TraceOptions(), stats)
        radii = np.hypot(loop.points[:, 0], loop.points[:, 1])
        assert np.max(np.abs(radii - 1.0)) < 1e-8
        assert np.max(np.abs(loop.points[:, 2:])) < 1e-8
        assert stats["closure_error"] < 1e-8
        assert stats["max_residual"] < 10 * DEFAULT_TOL.newton_tol
        assert len(loop) >= 16

    def test_residuals_on_all_samples(self):
        loop = trace_component(quadric_spec(), SEED, TraceOptions())
        res = np.array([np.linalg.norm(quadric(p)) for p in loop.points])
        assert np.max(res) < 10 * DEFAULT_TOL.newton_tol

    def test_final_tangent_aligned(self):
        loop = trace_component(quadric_spec(), SEED, TraceOptions())
        assert float(loop.tangent(1.0 - 1e-6) @ loop.tangent(0.0)) > 0.99

    def test_resample_stays_on_curve(self):
        loop = trace_component(quadric_spec(), SEED, TraceOptions())
        for t in (0.123, 0.5, 0.987):
            p = loop.point(t)
            assert np.linalg.norm(quadric(p)) < 10 * DEFAULT_TOL.newton_tol

    def test_far_seed_diverges(self):
        with pytest.raises(NoConvergence):
            trace_component(quadric_spec(), np.array([5.0, 5, 5, 5]), TraceOptions())

    def test_step_size_independence(self):
        opts_a = TraceOptions()
        opts_b = TraceOptions(initial_step=0.025, max_step=0.05)
        a = trace_component(quadric_spec(), SEED, opts_a)
        b = trace_component(quadric_spec(), SEED, opts_b)
        assert hausdorff_distance(a, b) < 1e-5


class TestInducedFraming:
    def test_closed_form_fields(self):
        # analytic minimum-norm solutions of J phi = e_i on the unit circle:
        # (x1, x2, 0, 0)/2, e3, e4
        loop = trace_component(quadric_spec(), SEED, TraceOptions())
        framing = induced_framing(quadric_spec(), loop)
        for k in range(0, len(loop), 7):
            x = loop.points[k]
            expected = [
                np.array([x[0] / 2, x[1] / 2, 0, 0]),
                np.array([0, 0, 1.0, 0]),
                np.array([0, 0, 0, 1.0]),
            ]
            for f, e in zip(framing.at_sample(k), expected):
                assert np.max(np.abs(f - e)) < 1e-8

    def test_quadric_index_zero(self):
        report = kappa_of_map(quadric_spec(), TraceOptions(seeds=[SEED]), euclidean_ambient(4))
        assert int(report.kappa) == 0
        assert [c.index for c in report.components] == [0]

    def test_twisted_quadric_index_one(self):
        report = kappa_of_map(
            quadric_twisted_spec(), TraceOptions(seeds=[SEED]), euclidean_ambient(4)
        )
        assert int(report.kappa) == 1

    def test_rotated_target_basis_same_index(self, rng):
        spec = quadric_spec()
        loop = trace_component(spec, SEED, TraceOptions())
        ambient = euclidean_ambient(4)
        Q = random_rotation(rng, 3)
        plain = induced_framing(spec, loop)
        rotated = induced_framing(spec, loop, basis=Q)
        want = index_of_circle(*_orient(loop, plain, ambient), ambient)
        got = index_of_circle(*_orient(loop, rotated, ambient), ambient)
        assert got == want


def _orient(loop, framing, ambient):
    from fbk.tracer import _oriented

    return _oriented(loop, framing, ambient)


class TestKappaOfMap:
    def test_empty_preimage(self):
        spec = MapSpec(
            lambda x: np.array([x[0] ** 2 + x[1] ** 2 + 1.0, x[2], x[3]]), dimension=4
        )
        report = kappa_of_map(
            spec, TraceOptions(seeds=[SEED, np.array([0.0, 1.0, 0.0, 0.0])]),
            euclidean_ambient(4),
        )
        assert int(report.kappa) == 0
        assert report.components == []
        assert report.diagnostics["seeds_skipped"] == 2

    def test_duplicate_seeds_detected(self):
        seeds = [SEED, np.array([0.0, 1.05, -0.03, 0.04])]
        with pytest.raises(DuplicateComponent):
            kappa_of_map(quadric_spec(), TraceOptions(seeds=seeds), euclidean_ambient(4))

    def test_report_counts_match(self):
        report = kappa_of_map(quadric_spec(), TraceOptions(seeds=[SEED]), euclidean_ambient(4))
        assert int(report.nonzero_count_mod2) == int(report.kappa)
        assert report.diagnostics["max_residual"] < 10 * DEFAULT_TOL.newton_tol
        assert all(e < DEFAULT_TOL.closure_tol for e in report.diagnostics["closure_errors"])


class TestTransportClosedFrame:
    def test_constant_frame_on_plane_circle(self):
        def point(t):
            a = 2 * math.pi * (t % 1.0)
            p = np.zeros(6)
            p[0], p[1] = math.cos(a), math.sin(a)
            return p

        k = 64
        loop = SampledLoop(
            np.array([point(i / k) for i in range(k)]), point, [i / k for i in range(k)]
        )
        radial = lambda p: p / np.linalg.norm(p)  # noqa: E731
        framing = transport_closed_frame(loop, [radial])
        assert framing.count == 4
        # normal space is constant span(e3..e6): transport stays put and the
        # holonomy is trivial
        for i, coord in enumerate((2, 3, 4, 5)):
            e = np.zeros(6)
            e[coord] = 1.0
            assert np.max(np.abs(framing.fields[i] - e)) < 1e-9

    def test_frame_is_orthonormal_and_normal(self):
        loop = trace_component(quadric_spec(), SEED, TraceOptions())
        framing = transport_closed_frame(loop, [])
        for k in range(0, len(loop), 5):
            vs = framing.at_sample(k)
            t = loop.tangent_at_sample(k)
            G = np.array([[a @ b for b in vs] for a in vs])
            assert np.max(np.abs(G - np.eye(3))) < 1e-9
            assert max(abs(v @ t) for v in vs) < 1e-6

    def test_collapsing_normal_space(self):
        # consecutive chord tangents made exactly perpendicular: the normal
        # planes share only a line, so transporting a full frame must fail
        pts = [np.array([0.1 * i, 0.0, 0.0]) for i in range(8)]
        last = pts[-1]
        tangent_at_8 = np.array([1.0, 1.0, 0.0])  # chord p9 - p7 by design
        pts.append(last + np.array([0.1, 0.0, 0.0]))
        pts.append(pts[-1] + np.array([0.0, 0.1, 0.0]))  # makes p9 - p7 = (0.1, 0.1, 0)
        # now force the next chord p10 - p8 perpendicular to (1,1,0)
        pts.append(pts[8] + np.array([-0.1, 0.1, 0.0]))
        # wander back to close the polygon with distinct points
        for i in range(7):
            pts.append(pts[-1] + np.array([-0.12, 0.01 * (i + 1), 0.0]))
        del tangent_at_8
        loop = SampledLoop(np.array(pts))
        with pytest.raises(RankDeficient):
            transport_closed_frame(loop, [])


class TestSectionIndex:
    def test_s5_degree_one(self):
        opts = TraceOptions(seeds=[np.array([0.97, 0.12, 0.05, -0.04, 0.06, -0.02])])
        report = section_index(s5_spec(), opts)
        assert int(report.kappa) == 1
        assert [c.index for c in report.components] == [1]

    def test_zero_locus_is_the_expected_circle(self):
        opts = TraceOptions(seeds=[np.array([0.97, 0.12, 0.05, -0.04, 0.06, -0.02])])
        loops = section_zero_loops(s5_spec(), opts)
        assert len(loops) == 1
        pts = loops[0].points
        assert np.max(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 1.0)) < 1e-8
        assert np.max(np.abs(pts[:, 2:])) < 1e-8

    def test_closure_twist_invariance(self):
        opts = TraceOptions(seeds=[np.array([0.97, 0.12, 0.05, -0.04, 0.06, -0.02])])
        base = section_index(s5_spec(), opts)
        twisted = section_index(s5_spec(), opts, aux_twist_turns=1)
        assert int(base.kappa) == int(twisted.kappa)
        assert [c.index for c in base.components] == [c.index for c in twisted.components]

    def test_intermediate_term_classes(self, monkeypatch):
        # closed-form frames on the plane zero circle make both matrix loops
        # single full turns, so the two intermediate classes are 1 and 1
        import fbk.tracer as tracer_mod

        recorded = []
        original = tracer_mod.loop_class

        def spy(loop, tol=DEFAULT_TOL, stats=None):
            bit = original(loop, tol, stats)
            recorded.append(int(bit))
            return bit

        monkeypatch.setattr(tracer_mod, "loop_class", spy)
        opts = TraceOptions(seeds=[np.array([0.97, 0.12, 0.05, -0.04, 0.06, -0.02])])
        report = section_index(s5_spec(), opts)
        assert recorded == [1, 1]
        assert int(report.kappa) == 1

    def test_nowhere_vanishing_section_on_s7(self):
        # quaternion-pair structure on S^7: right multiplication by i and j
        # gives a unit section everywhere, so the zero locus is empty
        def v(x):
            out = np.empty(8)
            for b in range(2):
                a, bq, c, d = x[4 * b : 4 * b + 4]
                out[4 * b : 4 * b + 4] = (-bq, a, d, -c)
            return out

        def w(x):
            out = np.empty(8)
            for b in range(2):
                a, bq, c, d = x[4 * b : 4 * b + 4]
                out[4 * b : 4 * b + 4] = (-c, -d, a, bq)
            return out

        seeds = [np.ones(8) / math.sqrt(8.0), np.eye(8)[0]]
        report = section_index(SectionSpec(7, v, w), TraceOptions(seeds=seeds))
        assert int(report.kappa) == 0
        assert report.components == []
        assert report.diagnostics["seeds_skipped"] == 2


class TestSuggestSeeds:
    def test_quadric_suggestions_land_on_the_circle(self):
        seeds = suggest_seeds(quadric_spec())
        assert seeds
        for s in seeds:
            assert np.linalg.norm(quadric(s)) < 1e-9

    def test_finds_both_circles(self):
        def two_circles(x):
            a = x[0] ** 2 + x[1] ** 2 - 1.0
            b = (x[0] - 4.0) ** 2 + x[1] ** 2 - 1.0
            return np.array([a * b, x[2], x[3]])

        spec = MapSpec(two_circles, dimension=4)
        seeds = suggest_seeds(spec, bounds=[(-2, 6), (-2, 2), (-1, 1), (-1, 1)], per_axis=5)
        near_first = any(abs(math.hypot(s[0], s[1]) - 1.0) < 1e-6 for s in seeds)
        near_second = any(abs(math.hypot(s[0] - 4.0, s[1]) - 1.0) < 1e-6 for s in seeds)
        assert near_first and near_second

    def test_empty_for_nowhere_vanishing_section(self):
        def v(x):
            out = np.empty(8)
            for b in range(2):
                a, bq, c, d = x[4 * b : 4 * b + 4]
                out[4 * b : 4 * b + 4] = (-bq, a, d, -c)
            return out

        def w(x):
            out = np.empty(8)
            for b in range(2):
                a, bq, c, d = x[4 * b : 4 * b + 4]
                out[4 * b : 4 * b + 4] = (-c, -d, a, bq)
            return out

        assert suggest_seeds(SectionSpec(7, v, w)) == []


class TestSphereDomainTrace:
    def test_hopf_preimage_residuals(self):
        from fbk.scenarios import _HOPF_VALUES, _suspended_hopf

        data = _HOPF_VALUES["default"]
        spec = MapSpec(
            _suspended_hopf,
            dimension=5,
            target="sphere",
            regular_value=data["x0"],
            domain="unit_sphere",
        )
        stats = {}
        loop = trace_component(spec, data["seed"], TraceOptions(), stats)
        # traced points stay on the domain sphere and map onto the value
        assert np.max(np.abs(np.linalg.norm(loop.points, axis=1) - 1.0)) < 1e-8
        vals = np.array([_suspended_hopf(p) for p in loop.points])
        assert np.max(np.linalg.norm(vals - data["x0"], axis=1)) < 1e-8
        assert stats["closure_error"] < 1e-6
