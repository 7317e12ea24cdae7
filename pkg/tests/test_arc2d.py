import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from invopt.arc2d import Arc2DLearner, arc_intersect, arc_sample_uniform, intersection_measure
from invopt.errors import ConfigError
from invopt.geometry import TWO_PI, AngularInterval, Ball, Segment
from invopt.losses import Observation
from invopt.sim import LowerBoundSegments, Segments2D, make_instance, run_experiment


def test_degenerate_arc_samples_its_point():
    rng = np.random.default_rng(0)
    v = arc_sample_uniform(AngularInterval.point(1.0), rng)
    assert np.allclose(v, [math.cos(1.0), math.sin(1.0)], atol=1e-15)


@pytest.mark.parametrize("arc, mean_angle", [(AngularInterval.full(), None),
                                             (AngularInterval(0.0, math.pi / 2), math.pi / 4)])
def test_sample_mean_direction(arc, mean_angle):
    rng = np.random.default_rng(1)
    m = np.mean([arc_sample_uniform(arc, rng) for _ in range(20_000)], axis=0)
    if mean_angle is None:
        assert np.linalg.norm(m) <= 0.02
    else:
        assert abs(math.atan2(m[1], m[0]) - mean_angle) <= 0.02
        # every draw stays inside the arc
        assert all(arc.contains_vector(arc_sample_uniform(arc, rng), 1e-12) for _ in range(200))


def _grid_measure(a: AngularInterval, b: AngularInterval, k: int = 100_000) -> float:
    th = (np.arange(k) + 0.5) * TWO_PI / k
    inside = [a.contains(t) and b.contains(t) for t in th]
    return TWO_PI * sum(inside) / k


@given(st.floats(0, TWO_PI), st.floats(0, 2 * math.pi), st.floats(0, TWO_PI), st.floats(0, math.pi))
def test_intersection_against_grid(s1, w1, s2, w2):
    a, cone = AngularInterval(s1, w1), AngularInterval(s2, w2)
    want = _grid_measure(a, cone, 20_000)
    assert intersection_measure(a, cone) == pytest.approx(want, abs=2e-3)
    if want > 1e-3:
        got = arc_intersect(a, cone)
        # the returned arc lies in both and is the larger component
        for off in np.linspace(0, got.width, 7):
            th = got.start + off
            assert a.contains(th, 1e-9) and cone.contains(th, 1e-9)
        assert got.width >= 0.5 * want - 2e-3


def test_intersection_examples():
    q = AngularInterval(0.0, math.pi / 2)
    assert arc_intersect(AngularInterval.full(), q) == q
    got = arc_intersect(AngularInterval(math.pi / 4, math.pi), q)
    assert got.start == pytest.approx(math.pi / 4) and got.width == pytest.approx(math.pi / 4)
    wrap = arc_intersect(AngularInterval(-0.5, 1.0), AngularInterval(0.2, 1.0))
    assert wrap.start == pytest.approx(0.2) and wrap.width == pytest.approx(0.3)


def test_ball_feedback_collapses_arc_to_a_point():
    rng = np.random.default_rng(0)
    L = Arc2DLearner(rng)
    c = np.array([math.cos(0.7), math.sin(0.7)])
    L.predict()
    L.update(Observation(Ball([0.0, 0.0], 0.5), 0.5 * c))
    assert L.arc.width == pytest.approx(0.0, abs=1e-9)
    assert L.arc.contains_vector(c, 1e-9)


def test_segment_feedback_halves_the_circle():
    L = Arc2DLearner(np.random.default_rng(0))
    L.predict()
    seg = Segment([-0.5, 0.0], [0.5, 0.0])
    L.update(Observation(seg, seg.endpoint_b))
    assert L.arc.width == pytest.approx(math.pi)
    assert L.removed_total == pytest.approx(math.pi)


def test_arc2d_needs_the_plane():
    with pytest.raises(ConfigError):
        Arc2DLearner(np.random.default_rng(0), n=3)


def test_lower_bound_segments_in_the_plane_give_a_quadrant():
    spec = make_instance(LowerBoundSegments(2), 2, seed=3)
    tr = run_experiment(spec, "arc2d")
    assert tr.extras["arc_width"][-1] <= math.pi + 1e-12  # width before round 2
    L = Arc2DLearner(np.random.default_rng(0))
    for t in (1, 2):
        L.predict()
        X = spec.generator.draw(t, None)
        L.update(Observation(X, X.argmax(spec.true_objective)))
    assert L.arc.width <= math.pi / 2 + 1e-12
    assert L.arc.contains_vector(spec.true_objective, 1e-9)


def test_short_runs_keep_the_target_and_stay_small():
    for seed in range(5):
        tr = run_experiment(make_instance(Segments2D(), 500, seed), "arc2d")
        assert np.all(tr.extras["cstar_in_arc"] == 1.0)
        assert tr.extras["arc_removed"].sum() <= TWO_PI + 1e-9
        assert np.all(np.diff(tr.extras["arc_width"]) <= 1e-12)
        assert tr.final("R") >= -1e-9
