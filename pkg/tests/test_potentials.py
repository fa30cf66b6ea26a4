"""Trigonometric potential container: algebra, evaluation, serialization."""

import json

import numpy as np
import pytest

from torusspec.potentials import (FourierPotential, TWO_PI, cosine,
                                  load_potential, potential_extrema,
                                  potential_from_dict, potential_to_dict,
                                  save_potential, sine, sup_norm, wrap_angles,
                                  zero_potential)


def test_hermitian_symmetry_enforced():
    with pytest.raises(ValueError):
        FourierPotential(1, {(1,): 1.0 + 0.0j})   # missing conjugate partner
    with pytest.raises(ValueError):
        FourierPotential(1, {(1,): 0.5j, (-1,): 0.5j})


def test_zero_coefficients_are_dropped():
    pot = FourierPotential(1, {(1,): 0.0, (-1,): 0.0, (0,): 2.0})
    assert pot.coeffs == {(0,): 2.0 + 0.0j}
    assert pot.max_frequency == 0
    assert pot.mean == 2.0


def test_cosine_evaluates_to_cos():
    pot = cosine((1,))
    rng = np.random.default_rng(3)
    x = rng.uniform(0.0, TWO_PI, size=64)
    assert np.max(np.abs(pot.evaluate(x) - np.cos(x))) < 1e-14


def test_sine_and_amplitude():
    pot = sine((1,), 0.3)
    x = np.linspace(0.0, TWO_PI, 17)
    assert np.max(np.abs(pot.evaluate(x) - 0.3 * np.sin(x))) < 1e-14


def test_two_dimensional_evaluation():
    pot = cosine((1, 0)) + cosine((0, 1))
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.0, TWO_PI, size=(40, 2))
    ref = np.cos(pts[:, 0]) + np.cos(pts[:, 1])
    assert np.max(np.abs(pot.evaluate(pts) - ref)) < 1e-13


def test_gradient_matches_finite_differences():
    pot = cosine((1,)) + sine((2,), 0.4)
    rng = np.random.default_rng(11)
    x = rng.uniform(0.0, TWO_PI, size=32)
    step = 1e-6
    fd = (pot.evaluate(x + step) - pot.evaluate(x - step)) / (2 * step)
    assert np.max(np.abs(pot.gradient(x) - fd)) < 1e-8


def test_translate_and_reflect():
    pot = cosine((1,)) + sine((3,), 0.2)
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, TWO_PI, size=50)
    a = 0.77
    assert np.max(np.abs(pot.translate(a).evaluate(x) - pot.evaluate(x + a))) < 1e-13
    assert np.max(np.abs(pot.reflect().evaluate(x) - pot.evaluate(-x))) < 1e-13


def test_translate_round_trip_is_identity():
    pot = cosine((1,)) + sine((2,), -0.6)
    back = pot.translate(1.234).translate(-1.234)
    for q, c in pot.items():
        assert abs(back.coefficient(q) - c) < 1e-15


def test_algebra():
    a = cosine((1,))
    b = sine((1,), 2.0)
    x = np.linspace(0.0, TWO_PI, 33)
    total = a + b
    assert np.max(np.abs(total.evaluate(x) - (np.cos(x) + 2 * np.sin(x)))) < 1e-13
    assert np.max(np.abs((a * 3.0).evaluate(x) - 3 * np.cos(x))) < 1e-13
    assert np.max(np.abs((-a).evaluate(x) + np.cos(x))) < 1e-13


def test_extrema_of_cosine():
    rep = potential_extrema(cosine((1,)), res=2048)
    assert rep.max_value == pytest.approx(1.0, abs=1e-12)
    assert rep.min_value == pytest.approx(-1.0, abs=1e-12)
    assert sup_norm(cosine((1,))) == pytest.approx(1.0, abs=1e-12)


def test_wrap_angles_range():
    x = np.array([-0.1, 0.0, TWO_PI, TWO_PI + 0.3, 17.0])
    w = wrap_angles(x)
    assert np.all(w >= 0.0) and np.all(w < TWO_PI)
    assert np.max(np.abs(np.cos(w) - np.cos(x))) < 1e-12


def test_serialization_round_trip(tmp_path):
    pot = cosine((1,)) + sine((2,), 0.25)
    path = tmp_path / "pot.json"
    save_potential(pot, path)
    back = load_potential(path)
    assert back.dim == pot.dim
    for q, c in pot.items():
        assert abs(back.coefficient(q) - c) < 1e-15
    # the file is plain JSON, editable by hand
    data = json.loads(path.read_text())
    assert potential_from_dict(potential_to_dict(pot)).coeffs == pot.coeffs
    assert "dim" in data


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"dim": 1}))
    with pytest.raises((ValueError, KeyError)):
        load_potential(path)


def test_zero_potential_is_zero():
    pot = zero_potential(2)
    pts = np.zeros((4, 2))
    assert np.all(pot.evaluate(pts) == 0.0)
    assert pot.max_frequency == 0
