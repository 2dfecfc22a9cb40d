import math

import numpy as np
import pytest

from nmplab.exceptions import ModelError, UsageError
from nmplab.harness import random_field, random_instance, random_vector_field
from nmplab.model import ScalarField, apply_laplacian, divergence, gradient, mode, zero_vector
from nmplab.norms import norm_star
from nmplab.solver import (
    ProblemInstance,
    check_moser_bound,
    check_solution_bound,
    check_theorem_A,
    energy,
    generate_subsolution,
    minimize_energy,
    rescaled_theorem_A_rhs,
    solve_poisson,
    weak_inequality_panel,
    weak_pairing_residual,
)

CSTAR = {"torus": 2 ** (-2 / 3) / 2, "sphere": 0.9895, "k4": 0.63, "c8": 0.5}


def star2(m, x):
    return norm_star(ScalarField(m, x), 2)


@pytest.mark.parametrize("name", ["torus", "sphere", "k4", "c8"])
def test_single_mode_inversion(fleet, name):
    m = fleet[name]
    v = solve_poisson(m, m.eigenvalues[1] * mode(m, 1).values)
    np.testing.assert_allclose(v.values, -mode(m, 1).values, atol=1e-10)


@pytest.mark.parametrize("name", ["torus", "sphere"])
def test_gradient_data(fleet, name):
    m = fleet[name]
    h = random_field(m, 10, 4, zero_mean=False)
    v = solve_poisson(m, np.zeros(m.size), gradient(m, h))
    # Lap v = div grad h = Lap h with zero mean, so v = h - h_M
    expected = h.values - h.values @ m.weights / m.volume
    np.testing.assert_allclose(v.values, expected, atol=1e-9 * np.abs(expected).max())


def test_constant_rhs_gives_zero(sphere64):
    assert np.max(np.abs(solve_poisson(sphere64, np.full(64, 2.5)).values)) <= 1e-12


@pytest.mark.parametrize("name", ["torus", "sphere", "k4"])
def test_poisson_residual_and_uniqueness(fleet, name):
    m = fleet[name]
    f = random_field(m, min(20, m.n_modes - 1), 1, zero_mean=False)
    Phi = random_vector_field(m, min(20, m.n_modes - 1), 2)
    v = solve_poisson(m, f, Phi)
    res = apply_laplacian(m, v).values - (f.values - f.values @ m.weights / m.volume) - divergence(m, Phi).values
    scale = norm_star(f, 2) + (norm_star(ScalarField(m, Phi.pointwise_norm()), 2) if Phi.components.size else 0) + 1
    assert star2(m, res) <= 1e-9 * scale
    assert abs(v.values @ m.weights) <= 1e-10 * m.volume * np.abs(v.values).max()
    assert np.max(np.abs(solve_poisson(m, f, Phi).values - v.values)) <= 1e-12


@pytest.mark.parametrize("name", ["torus", "sphere"])
def test_poisson_inverts_laplacian(fleet, name):
    m = fleet[name]
    u = random_field(m, 30, 9)
    np.testing.assert_allclose(solve_poisson(m, apply_laplacian(m, u)).values, u.values, atol=1e-9)
    f = random_field(m, 30, 10)
    np.testing.assert_allclose(apply_laplacian(m, solve_poisson(m, f)).values, f.values,
                               atol=1e-9 * np.abs(f.values).max())


def test_disconnected_rejected(k4):
    from dataclasses import replace

    with pytest.raises(ModelError):
        solve_poisson(replace(k4, eigenvalues=np.zeros(4)), np.ones(4))


def test_energy_trivial(torus3):
    res = minimize_energy(torus3, np.zeros(torus3.size))
    assert np.all(res.v.values == 0) and res.energy == 0 and res.converged


@pytest.mark.parametrize("name", ["torus", "sphere", "k4", "c8"])
def test_energy_descent_matches_spectral(fleet, name):
    m = fleet[name]
    band = min(20, m.n_modes - 1)
    f = random_field(m, band, 3, zero_mean=False)
    Phi = random_vector_field(m, band, 4)
    res = minimize_energy(m, f, Phi, iters=2000)
    v = solve_poisson(m, f, Phi)
    assert res.converged
    assert star2(m, res.v.values - v.values) <= 1e-6
    assert energy(m, f, Phi, v) <= res.energy + 1e-9
    assert res.energy <= 0.0


def test_energy_minimizer_is_stationary(torus3):
    f = random_field(torus3, 10, 5)
    Phi = random_vector_field(torus3, 10, 6)
    v = solve_poisson(torus3, f, Phi)
    e0 = energy(torus3, f, Phi, v)
    for seed in range(5):
        d = random_field(torus3, 10, 100 + seed).values * 1e-3
        assert energy(torus3, f, Phi, v.values + d) >= e0


def test_generate_subsolution_examples(torus3):
    z = np.zeros(torus3.size)
    inst = generate_subsolution(torus3, z, None, np.ones(torus3.size))
    np.testing.assert_array_equal(inst.f.values, -1.0)
    phi = np.abs(np.random.default_rng(0).standard_normal(torus3.size))
    assert weak_pairing_residual(inst, phi) == pytest.approx(-phi @ torus3.weights)

    u = random_field(torus3, 10, 1, zero_mean=False)
    eq = generate_subsolution(torus3, u)
    assert eq.residual() <= 1e-10
    with pytest.raises(UsageError):
        generate_subsolution(torus3, u, None, -np.ones(torus3.size))


@pytest.mark.parametrize("name", ["torus", "sphere", "k4"])
def test_weak_inequality_panel(fleet, name):
    m = fleet[name]
    band = min(20, m.n_modes - 1)
    u = random_field(m, band, 7, zero_mean=False)
    s = np.abs(mode(m, 1).values)
    inst = generate_subsolution(m, u, random_vector_field(m, band, 8), s)
    assert inst.residual() <= 1e-8 * (1 + norm_star(inst.f, 2))
    assert weak_inequality_panel(inst, 50, seed=1) <= 1e-9
    phi = np.abs(np.random.default_rng(2).standard_normal(m.size))
    assert weak_pairing_residual(inst, phi) == pytest.approx(-(s * phi) @ m.weights, rel=1e-8, abs=1e-8)


def test_instance_validation(torus3):
    u = ScalarField(torus3, np.zeros(torus3.size))
    with pytest.raises(UsageError):
        ProblemInstance(torus3, u, zero_vector(torus3), u, u, p=1.5)


def test_moser_trivial(torus3):
    c = ScalarField(torus3, np.full(torus3.size, 2.0))
    inst = generate_subsolution(torus3, c)
    rec = check_moser_bound(inst, 0.3, lam=2.0)
    assert rec.lhs == pytest.approx(0, abs=1e-12) and rec.passed


@pytest.mark.parametrize("name", ["torus", "sphere", "k4"])
@pytest.mark.parametrize("p", [2.0, 5.0])
def test_checks_pass_on_random_instances(fleet, name, p):
    m = fleet[name]
    band = min(25, m.n_modes - 1)
    for trial in range(8):
        inst = random_instance(m, band, 1000 + trial, p, trial)
        assert check_moser_bound(inst, CSTAR[name]).passed
        assert check_theorem_A(inst, CSTAR[name]).passed
        f = random_field(m, band, 2000 + trial, zero_mean=False)
        assert check_solution_bound(m, f, random_vector_field(m, band, 3000 + trial), CSTAR[name], p).passed


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_moser_scaling_invariance(torus3, c):
    inst = random_instance(torus3, 20, 55, 2.0, 1)
    a = check_moser_bound(inst, 0.3)
    b = check_moser_bound(inst.scaled(c), 0.3)
    assert b.lhs == pytest.approx(c * a.lhs, rel=1e-9)
    assert b.slack_ratio == pytest.approx(a.slack_ratio, rel=1e-9)


def test_solution_bound_trivial_and_single_mode(torus3):
    z = np.zeros(torus3.size)
    rec = check_solution_bound(torus3, z, None, 0.3)
    assert rec.lhs == 0 and rec.passed and math.isinf(rec.slack_ratio)
    phi = mode(torus3, 1).values
    rec = check_solution_bound(torus3, phi, None, 0.3)
    assert rec.lhs == pytest.approx(np.abs(phi).max() / torus3.eigenvalues[1], rel=1e-10)
    assert rec.passed


def test_theorem_A_constant_equality(sphere64):
    c = ScalarField(sphere64, np.full(64, -1.0))
    rec = check_theorem_A(generate_subsolution(sphere64, c), 1.0)
    assert rec.passed and rec.lhs == pytest.approx(0, abs=1e-12)


def test_theorem_A_intermediate_steps(torus3):
    inst = random_instance(torus3, 20, 77, 2.0, 1)
    rec = check_theorem_A(inst, CSTAR["torus"])
    e = rec.extras
    assert all(e["steps"].values())
    assert e["w_excess"] <= e["w_green_rhs"] + 1e-12 <= e["w_rhs"] + 1e-12
    assert e["v_sup"] <= e["v_rhs"]
    assert e["stated_rhs"] >= e["u_mean"]


def test_constant_set_mismatch(torus3):
    from nmplab.constants import constant_set

    inst = random_instance(torus3, 5, 1, 2.0, 1)
    with pytest.raises(UsageError):
        check_moser_bound(inst, 0.3, consts=constant_set(3, 5.0, 0.3))


def test_rescale_diagnostic(torus3):
    inst = random_instance(torus3, 10, 3, 2.0, 1)
    one = rescaled_theorem_A_rhs(inst, 0.3, 1.0)
    rec = check_theorem_A(inst, 0.3)
    assert one["rhs"] == pytest.approx(rec.rhs, rel=1e-12)
    four = rescaled_theorem_A_rhs(inst, 0.3, 4.0)
    assert four["lhs"] == one["lhs"] and four["rhs"] > 0
    with pytest.raises(UsageError):
        rescaled_theorem_A_rhs(inst, 0.3, 0.0)
