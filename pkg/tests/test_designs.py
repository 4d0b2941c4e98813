import numpy as np
import pytest

from evigp import InvalidArgumentError, is_latin, maximin_lhs, random_lhs, scale_to_ranges
from utils import load_matrix_csv


def test_random_lhs_is_latin_and_seeded():
    design = random_lhs(20, 3, seed=7)
    assert design.points.shape == (20, 3)
    assert is_latin(design.points)
    np.testing.assert_array_equal(design.points, random_lhs(20, 3, seed=7).points)
    assert not np.array_equal(design.points, random_lhs(20, 3, seed=8).points)


def test_maximin_lhs_keeps_latin_property():
    design = maximin_lhs(15, 4, seed=3, restarts=3)
    assert is_latin(design.points)
    assert design.seed == 3


def test_maximin_lhs_is_reproducible():
    a = maximin_lhs(12, 2, seed=11, restarts=2)
    b = maximin_lhs(12, 2, seed=11, restarts=2)
    np.testing.assert_array_equal(a.points, b.points)


def test_maximin_min_distance_never_decreases():
    design = maximin_lhs(16, 3, seed=5, restarts=1)
    trace = np.array(design.min_distance_trace)
    assert len(trace) >= 1
    assert np.all(np.diff(trace) >= 0)
    assert design.min_distance() == pytest.approx(trace[-1])


def test_maximin_improves_on_its_starting_design():
    design = maximin_lhs(20, 2, seed=1, restarts=1)
    assert design.min_distance() >= design.min_distance_trace[0]


def test_is_latin_rejects_duplicate_strata():
    points = np.array([[0.05, 0.1], [0.07, 0.6]])
    assert not is_latin(points)
    assert not is_latin(np.array([[1.2], [0.1]]))


def test_scale_to_ranges_is_affine():
    design = random_lhs(10, 2, seed=0)
    physical = scale_to_ranges(design, [(0.0, 10.0), (-1.0, 1.0)])
    np.testing.assert_allclose(physical[:, 0], 10.0 * design.points[:, 0])
    np.testing.assert_allclose(physical[:, 1], -1.0 + 2.0 * design.points[:, 1])


def test_invalid_design_arguments():
    with pytest.raises(InvalidArgumentError):
        maximin_lhs(1, 2, seed=0)
    with pytest.raises(InvalidArgumentError):
        random_lhs(0, 2, seed=0)
    with pytest.raises(InvalidArgumentError):
        scale_to_ranges(random_lhs(4, 1, seed=0), [(1.0, 1.0)])


def test_design_csv_reads_back_every_point(tmp_path):
    design = maximin_lhs(6, 2, seed=4, restarts=1)
    path = tmp_path / "design.csv"
    design.to_csv(path)
    assert path.read_text().splitlines()[0] == "x1,x2"
    np.testing.assert_array_equal(load_matrix_csv(path), design.points)
