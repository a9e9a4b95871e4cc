import numpy as np
import pytest

from morpho2r.taskpaths import Band, PathKind, TaskPath, band_for, context_vector, sample_path

TASKS = [TaskPath.circle(), TaskPath.ellipse(), TaskPath.rectangle(),
         TaskPath.ellipse(0.25, 0.40), TaskPath.rectangle(0.3, 0.9),
         TaskPath.ellipse(ellipse_sampling="arclength")]


def test_circle_quarter_points():
    pts = sample_path(TaskPath.circle(0.40, n_samples=4))
    np.testing.assert_allclose(pts, [[0.4, 0], [0, 0.4], [-0.4, 0], [0, -0.4]], atol=1e-15)


def test_ellipse_points_on_curve():
    pts = sample_path(TaskPath.ellipse(0.40, 0.25))
    assert pts.shape == (720, 2)
    np.testing.assert_allclose((pts[:, 0] / 0.40) ** 2 + (pts[:, 1] / 0.25) ** 2, 1.0, atol=1e-12)


def test_ellipse_arclength_points_on_curve():
    pts = sample_path(TaskPath.ellipse(0.40, 0.25, ellipse_sampling="arclength"))
    np.testing.assert_allclose((pts[:, 0] / 0.40) ** 2 + (pts[:, 1] / 0.25) ** 2, 1.0, atol=1e-12)
    gaps = np.hypot(*np.diff(np.vstack([pts, pts[:1]]), axis=0).T)
    assert gaps.std() / gaps.mean() < 1e-3


def _perimeter_position(p, w, h):
    x, y = p
    if abs(y - h / 2) < 1e-12 and x > -w / 2:
        return w / 2 - x
    if abs(x + w / 2) < 1e-12 and y > -h / 2:
        return w + (h / 2 - y)
    if abs(y + h / 2) < 1e-12 and x < w / 2:
        return w + h + (x + w / 2)
    assert abs(x - w / 2) < 1e-12
    return 2 * w + h + (y + h / 2)


def test_rectangle_uniform_arclength():
    w, h = 0.70, 0.40
    pts = sample_path(TaskPath.rectangle(w, h))
    s = np.array([_perimeter_position(p, w, h) for p in pts])
    np.testing.assert_allclose(np.diff(s), 2 * (w + h) / 720, atol=1e-9)
    np.testing.assert_allclose(pts[0], [w / 2, h / 2])


def test_bands():
    assert band_for(TaskPath.circle(0.40)) == Band(0.40, 0.40)
    assert band_for(TaskPath.ellipse(0.40, 0.25)) == Band(0.25, 0.40)
    b = band_for(TaskPath.rectangle(0.70, 0.40))
    assert b.b == pytest.approx(0.20) and b.a == pytest.approx(0.403113, abs=1e-6)


@pytest.mark.parametrize("task", TASKS, ids=lambda t: f"{t.kind.value}-{t.p1}-{t.p2}-{t.ellipse_sampling}")
def test_band_bounds_path_radii(task):
    band = band_for(task)
    r = np.hypot(*sample_path(task).T)
    assert np.all(r >= band.b - 1e-9) and np.all(r <= band.a + 1e-9)


@pytest.mark.parametrize("task", TASKS[:3])
def test_sampling_deterministic(task):
    np.testing.assert_array_equal(sample_path(task), sample_path(task))


def test_invalid_descriptors():
    with pytest.raises(ValueError):
        TaskPath.ellipse(0.4, 0.0)
    with pytest.raises(ValueError):
        Band(0.3, 0.2)
    with pytest.raises(ValueError):
        TaskPath(PathKind.CIRCLE, 0.4, n_samples=0)


def test_context_vector():
    ctx = context_vector(TaskPath.rectangle(0.70, 0.40))
    np.testing.assert_allclose(ctx, [0, 0, 1, 0.70, 0.40])
    assert context_vector(TaskPath.circle())[:3].sum() == 1
