import math

import numpy as np
import pytest

from discretize.forms import energy, l2_mass
from geometry.registry import resolve_model
from geometry.weight import WeightSpec
from spectral.consistency import class_dichotomy_check, q_equals_mu_check
from spectral.eigensolver import Eigensolver, mu_bottom, mu_sweep, open_manifold_sign_check
from spectral.embedding import embedding_constant

from conftest import component_namespace, make_assembly, shifted


def test_sphere_mu_is_six():
    a = make_assembly("sphere3", math.pi, 400)
    result = mu_bottom(a)
    assert 6.0 - 1e-9 <= result.value < 6.05
    assert result.residual <= 1e-10 * result.value
    v = result.eigenfield
    assert np.all(v > 0)
    assert l2_mass(a, v) == pytest.approx(1.0)
    assert energy(a, v) == pytest.approx(result.value)


def test_hyperbolic_mu_matches_ball_formula():
    # a_3 (1 + pi^2/R^2) - 6 on the hyperbolic ball of radius R
    a = make_assembly("hyperbolic3", 10.0, 500)
    assert mu_bottom(a).value == pytest.approx(2.0 + 8.0 * math.pi**2 / 100.0, abs=1e-2)


def test_hyperbolic_mu_decreases_with_radius():
    sweep = mu_sweep(resolve_model("hyperbolic3"), WeightSpec(), [5.0, 10.0, 20.0], h=0.02)
    assert sweep.nonincreasing
    assert [entry.N for entry in sweep.entries] == [249, 499, 999]
    assert sweep.entries[-1].value == pytest.approx(2.0 + 8.0 * math.pi**2 / 400.0, abs=1e-2)


def test_flat_mu_scales_exactly_with_radius():
    small = mu_bottom(make_assembly("flat3", 1.0, 50)).value
    large = mu_bottom(make_assembly("flat3", 2.0, 50)).value
    assert large == pytest.approx(small / 4.0, rel=1e-9)
    assert small == pytest.approx(8.0 * math.pi**2, rel=1e-2)


def test_open_manifold_sign_check():
    sweep = mu_sweep(resolve_model("flat3"), WeightSpec(), [5.0, 10.0, 20.0], h=0.025)
    report = open_manifold_sign_check(sweep, q_estimate=43.8)
    assert report.mu_vanishing and report.q_positive and report.passed
    assert sweep.entries[-1].value < sweep.entries[0].value / 10


@pytest.mark.parametrize(
    "label, r_max",
    [("sphere3", math.pi), ("flat3", 10.0), ("hyperbolic3", 10.0)],
)
def test_q2_equals_mu(label, r_max):
    report = q_equals_mu_check(make_assembly(label, r_max, 200))
    assert report.passed
    assert report.gap <= 1e-8 * (1 + abs(report.mu))


def test_embedding_constant():
    a = make_assembly("flat3", 5.0, 100)
    c0 = embedding_constant(a, 0.0, 2.0)
    assert c0 == pytest.approx(1.0 / math.sqrt(1.0 + math.pi**2 / 25.0), rel=1e-2)
    assert embedding_constant(a, 0.5, 2.0) < c0
    assert embedding_constant(a, 0.0, 4.0) > 0


def test_sign_dichotomy(sphere_small):
    positive = class_dichotomy_check(sphere_small, [2.0, 4.0, 5.0])
    assert positive.witness == "minimizer"
    assert positive.mu > 0 and positive.liminf_positive and positive.passed
    assert len(positive.q_by_p) == 3

    negative = class_dichotomy_check(shifted(sphere_small, 10.0), [2.0, 4.0, 5.0])
    assert negative.mu == pytest.approx(positive.mu - 10.0, rel=1e-8)
    assert negative.witness == "eigenfield"
    assert all(q < 0 for q in negative.q_by_p.values())
    assert negative.passed


def test_eigensolver_component(flat_small):
    solver = Eigensolver(component_namespace(Eigensolver, mu_r_max_sweep=[2.5, 5.0])).initialize()
    assert solver.bottom(flat_small).value == pytest.approx(mu_bottom(flat_small).value)
    sweep = solver.sweep(flat_small.model, WeightSpec(), 5.0, flat_small.grid.h)
    assert len(sweep.entries) == 2 and sweep.nonincreasing


@pytest.mark.slow
@pytest.mark.parametrize("label, r_max", [("sphere3", math.pi), ("flat3", 10.0), ("hyperbolic3", 20.0)])
def test_q2_equals_mu_at_full_size(label, r_max):
    report = q_equals_mu_check(make_assembly(label, r_max, 2000))
    assert report.passed
    assert report.gap <= 1e-8 * (1 + abs(report.mu))


@pytest.mark.slow
def test_hyperbolic_mu_at_full_size():
    assert 2.0 <= mu_bottom(make_assembly("hyperbolic3", 20.0, 2000)).value <= 2.2
    sweep = mu_sweep(resolve_model("hyperbolic3"), WeightSpec(), [10.0, 20.0, 40.0], h=0.02)
    assert sweep.nonincreasing
    assert all(2.0 <= entry.value <= 2.2 for entry in sweep.entries[1:])
