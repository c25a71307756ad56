import math

import numpy as np
import pytest

from discretize.assembly import assemble, tridiagonal_apply
from discretize.forms import (
    dual_norm,
    el_residual,
    energy,
    l2_mass,
    nonlinear_load,
    quotient,
    quotient_gradient,
    weighted_p_norm,
)
from discretize.grid import BoundaryCondition, DiscreteField, build_exterior_grid, build_grid
from geometry.model_manifold import ModelManifold
from geometry.registry import resolve_model
from geometry.warp_profiles import custom_profile
from utils.errors import ArgumentError, AssemblyError, ConfigError

from conftest import make_assembly


def test_grid_boundary_conditions():
    sphere = resolve_model("sphere3")
    g = build_grid(sphere, 0.0, math.pi, 10)
    assert g.bc_inner == BoundaryCondition.POLE_NEUMANN
    assert g.size == 11 and g.first_active == 0
    assert g.h == pytest.approx(math.pi / 11)
    flat = resolve_model("flat3")
    annulus = build_grid(flat, 1.0, 3.0, 9)
    assert annulus.bc_inner == BoundaryCondition.DIRICHLET
    assert annulus.size == 9
    np.testing.assert_allclose(annulus.r_active, np.linspace(1.2, 2.8, 9))
    assert g.summary() == {"r_inner": 0.0, "r_max": math.pi, "N": 10, "bc": "pole_neumann"}


def test_grid_errors():
    flat = resolve_model("flat3")
    with pytest.raises(ConfigError):
        build_grid(flat, 2.0, 1.0, 10)
    with pytest.raises(ConfigError):
        build_grid(flat, 0.0, 1.0, 0)
    with pytest.raises(ConfigError):
        build_grid(resolve_model("sphere3"), 0.0, 4.0, 10)
    with pytest.raises(ConfigError):
        build_grid(flat, 1.0, 3.0, 10, bc_inner=BoundaryCondition.POLE_NEUMANN)


def test_stiffness_and_mass_by_hand():
    # flat3 on [0, 2] with one interior node: h = 1, active nodes r = 0 and r = 1
    a = make_assembly("flat3", 2.0, 1)
    np.testing.assert_allclose(a.stiffness_diag, [32 * math.pi / 3, 256 * math.pi / 3], rtol=1e-12)
    np.testing.assert_allclose(a.stiffness_off, [-32 * math.pi / 3], rtol=1e-12)
    np.testing.assert_allclose(a.mass_diag, [2 * math.pi / 15, 44 * math.pi / 15], rtol=1e-12)
    np.testing.assert_allclose(a.mass_off, [math.pi / 5], rtol=1e-12)
    np.testing.assert_allclose(a.potential_diag, 0.0, atol=1e-14)


def test_sphere_potential_is_six_times_mass(sphere_small):
    a = sphere_small
    np.testing.assert_allclose(a.potential_diag, 6.0 * a.mass_diag, rtol=1e-8)
    np.testing.assert_allclose(a.potential_off, 6.0 * a.mass_off, rtol=1e-8)
    assert a.sigma_bounds == pytest.approx((6.0, 6.0), rel=1e-6)


def test_energy_is_a_quadratic_form(flat_small):
    a = flat_small
    rng = np.random.default_rng(0)
    u, v = rng.uniform(0.1, 1.0, (2, a.size))
    assert energy(a, np.zeros(a.size)) == 0.0
    assert energy(a, 2.0 * v) == pytest.approx(4.0 * energy(a, v), rel=1e-12)
    polar = 0.25 * (energy(a, u + v) - energy(a, u - v))
    assert polar == pytest.approx(float(u @ a.apply(v)), rel=1e-10)
    assert energy(a, DiscreteField.from_values(v)) == energy(a, v)


def test_p2_norm_matches_mass(sphere_small, flat_small):
    for a in (sphere_small, flat_small):
        v = np.linspace(1.0, 2.0, a.size)
        assert weighted_p_norm(a, v, 0.0, 2.0) == pytest.approx(math.sqrt(l2_mass(a, v)), rel=1e-12)


def test_weighted_norm_decreases_with_alpha(flat_small):
    v = np.ones(flat_small.size)
    norms = [weighted_p_norm(flat_small, v, alpha, 4.0) for alpha in (0.0, 0.2, 0.5, 1.0)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_quotient_scale_invariance_and_errors(flat_small):
    a = flat_small
    v = np.exp(-a.r)
    assert quotient(a, 3.0 * v, 0.3, 4.0) == pytest.approx(quotient(a, v, 0.3, 4.0), rel=1e-12)
    with pytest.raises(ArgumentError):
        quotient(a, np.zeros(a.size), 0.0, 4.0)
    with pytest.raises(ArgumentError):
        quotient(a, v, 0.0, 7.0)
    with pytest.raises(ArgumentError):
        quotient(a, v, 0.0, 1.5)
    with pytest.raises(ArgumentError):
        quotient(a, v[:-1], 0.0, 4.0)


def test_quotient_gradient_matches_finite_differences():
    a = make_assembly("flat3", 5.0, 10)
    v = np.random.default_rng(1).uniform(0.2, 1.0, a.size)
    grad = quotient_gradient(a, v, 0.3, 4.0)
    step = 1e-6
    fd = np.array(
        [
            (quotient(a, v + step * e, 0.3, 4.0) - quotient(a, v - step * e, 0.3, 4.0)) / (2 * step)
            for e in np.eye(a.size)
        ]
    )
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-7 * np.linalg.norm(grad))


def test_dual_norm_of_mass_image(flat_small):
    v = np.linspace(0.0, 1.0, flat_small.size)
    assert dual_norm(flat_small, flat_small.apply_mass(v)) == pytest.approx(math.sqrt(l2_mass(flat_small, v)), rel=1e-10)


@pytest.mark.parametrize(
    "label, r_inner, r_max, num_nodes",
    [("flat3", 0.0, 5.0, 60), ("flat3", 1.0, 3.0, 9), ("flat3", 1.0, 3.0, 1), ("sphere3", 0.0, math.pi, 100)],
)
def test_stiffness_energy_matches_the_matrix(label, r_inner, r_max, num_nodes):
    a = make_assembly(label, r_max, num_nodes, r_inner=r_inner)
    v = np.random.default_rng(2).uniform(0.1, 1.0, a.size)
    direct = float(v @ tridiagonal_apply(a.stiffness_diag, a.stiffness_off, v))
    assert a.stiffness_energy(v) == pytest.approx(direct, rel=1e-10)
    assert a.energy(v) == pytest.approx(float(v @ a.apply(v)), rel=1e-10)


def test_weighted_mass(flat_small):
    a = flat_small
    diag, off = a.weighted_mass(0.0, 2.0)
    np.testing.assert_allclose(diag, a.mass_diag, rtol=1e-12)
    np.testing.assert_allclose(off, a.mass_off, rtol=1e-12)
    v = np.exp(-a.r)
    loaded = tridiagonal_apply(*a.weighted_mass(0.3, 4.0, v), v)
    np.testing.assert_allclose(loaded, nonlinear_load(a, v, 0.3, 4.0), rtol=1e-10, atol=1e-14)


def test_el_residual_is_scale_free(flat_small):
    a = flat_small
    v = np.exp(-a.r)
    residual = el_residual(a, v, 30.0, 0.2, 4.0)
    assert residual > 0
    # K(3v) = 3 Kv and the p = 4 load scales by 27
    assert el_residual(a, 3.0 * v, 30.0 / 9.0, 0.2, 4.0) == pytest.approx(residual, rel=1e-10)


def test_exterior_grids_are_nested():
    flat = resolve_model("flat3")
    h = 10.0 / 201
    near = build_exterior_grid(flat, 2.0, 10.0, h)
    far = build_exterior_grid(flat, 4.0, 10.0, h)
    assert near.bc_inner == BoundaryCondition.DIRICHLET
    assert np.all(np.isin(far.nodes, near.nodes))
    a_near, a_far = assemble(flat, near), assemble(flat, far)
    v_far = np.sin(np.pi * (a_far.r - far.r_inner) / (far.r_max - far.r_inner))
    v_near = np.zeros(a_near.size)
    v_near[a_near.size - a_far.size :] = v_far
    assert energy(a_near, v_near) == pytest.approx(energy(a_far, v_far), rel=1e-10)
    with pytest.raises(ConfigError):
        build_exterior_grid(flat, 9.99, 10.0, h)


def test_energy_converges_at_second_order():
    # v = (1 - r^2)^2 on the unit ball of R^3: a_3 * int |v'|^2 dV = 4096 pi / 315
    exact = 4096 * math.pi / 315
    errors = []
    for N in (19, 39):
        a = make_assembly("flat3", 1.0, N)
        v = (1.0 - a.r**2) ** 2
        errors.append(abs(energy(a, v) - exact))
    assert 3.0 < errors[0] / errors[1] < 5.0


def test_assembly_rejects_vanishing_warp():
    warp = custom_profile(lambda r: np.asarray(r) * (np.asarray(r) - 1.5) ** 2)
    m = ModelManifold(n=3, warp=warp, label="pinched3")
    with pytest.raises(AssemblyError) as info:
        assemble(m, build_grid(m, 0.0, 3.0, 5))
    assert info.value.node == 3
    assert info.value.radius == pytest.approx(1.5)
    assert "node 3" in str(info.value)
