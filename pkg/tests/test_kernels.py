import math

import numpy as np
import pytest

from nmplab.constants import c0
from nmplab.exceptions import ModelError, NumericalFailure, UsageError
from nmplab.harness import random_field
from nmplab.kernels import (
    centered_kernel,
    expm_heat_oracle,
    gradient_matrices,
    gradient_representation_residual,
    graph_stiffness,
    green_by_time_integral,
    green_function,
    green_lower_bound_check,
    heat_kernel,
    heat_min_entry,
    kernel_identities,
    midpoint_time_weights,
    pseudoinverse_green,
    representation_residual,
    time_integral_sweep,
)
from nmplab.model import apply_laplacian, build_graph_model

from conftest import random_connected_graph
from oracles import dense_laplacian_pinv_green, stiffness_from_edges

MODELS = ["torus", "sphere", "k4", "c8"]


@pytest.mark.parametrize("name", MODELS)
@pytest.mark.parametrize("t", [0.01, 0.3, 2.0])
def test_kernel_invariants(fleet, name, t):
    m = fleet[name]
    H, G = heat_kernel(m, t), centered_kernel(m, t)
    assert H.symmetry_residual() <= 1e-10 and G.symmetry_residual() <= 1e-10
    assert np.max(np.abs(H.row_integrals() - 1)) <= 1e-10
    assert np.max(np.abs(G.row_integrals())) <= 1e-10
    np.testing.assert_allclose(H.matrix - 1 / m.volume, G.matrix, atol=1e-9 * np.abs(H.matrix).max())


@pytest.mark.parametrize("name", MODELS)
def test_kernels_at_large_time(fleet, name):
    m = fleet[name]
    t = 40 / m.eigenvalues[1]
    assert np.max(np.abs(heat_kernel(m, t).matrix - 1 / m.volume)) <= 1e-12
    assert np.max(np.abs(centered_kernel(m, t).matrix)) <= 1e-12


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_nonpositive_time(k4, t):
    with pytest.raises(UsageError):
        heat_kernel(k4, t)


@pytest.mark.parametrize("name", MODELS)
def test_diagonal_positive(fleet, name):
    m = fleet[name]
    for t in (0.01, 0.1, 1.0):
        assert np.all(np.diag(centered_kernel(m, t).matrix) > 0)


@pytest.mark.parametrize("name", ["k4", "c8"])
def test_heat_matches_expm(fleet, name):
    m = fleet[name]
    for t in (0.1, 1.0, 5.0):
        np.testing.assert_allclose(heat_kernel(m, t).matrix, expm_heat_oracle(m, t), atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_heat_positive_on_graphs(seed):
    m = random_connected_graph(30, seed)
    assert heat_min_entry(m, np.geomspace(0.01, 100, 12)) > -1e-12


@pytest.mark.parametrize("name", MODELS)
def test_identities(fleet, name):
    rep = kernel_identities(fleet[name], 0.05, 0.05)
    assert rep.passed(1e-10)
    rep = kernel_identities(fleet[name], 0.1, 0.02)
    assert rep.square_formula <= 1e-10 and rep.semigroup <= 1e-10


@pytest.mark.parametrize("name", MODELS)
def test_green_basic(fleet, name):
    m = fleet[name]
    G = green_function(m)
    assert G.symmetry_residual() <= 1e-10
    assert np.max(np.abs(G.row_integrals())) <= 1e-9 * max(1, np.abs(G.matrix).max())


@pytest.mark.parametrize("name", MODELS)
def test_green_inverts_laplacian(fleet, name):
    m = fleet[name]
    G = green_function(m).matrix
    # operator form of the Laplacian on node values
    L = m.eigenbasis @ np.diag(-m.eigenvalues) @ (m.eigenbasis.T * m.weights)
    proj = np.eye(m.size) - np.outer(np.ones(m.size), m.weights) / m.volume
    tol = 1e-9 * max(1.0, m.eigenvalues[-1] / m.eigenvalues[1])
    assert np.max(np.abs(-(G * m.weights) @ L - proj)) <= tol
    assert np.max(np.abs(-L @ (G * m.weights) - proj)) <= tol


@pytest.mark.parametrize("seed", range(5))
def test_green_vs_pseudoinverse(seed):
    m = random_connected_graph(int(np.random.default_rng(seed).integers(5, 120)), seed)
    K = stiffness_from_edges(m.size, m.edges)
    G = green_function(m).matrix
    assert np.max(np.abs(G - dense_laplacian_pinv_green(m.weights, K))) <= 1e-10
    assert np.max(np.abs(G - pseudoinverse_green(m.weights, graph_stiffness(m)))) <= 1e-10


def test_green_needs_gap(k4):
    from dataclasses import replace

    flat = replace(k4, eigenvalues=np.zeros(4))
    with pytest.raises(ModelError):
        green_function(flat)


def test_two_node_time_integral():
    m = build_graph_model([1.0, 1.0], [(0, 1, 1.5)], 3)
    phi = m.eigenbasis[:, 1]
    exact = np.outer(phi, phi) / m.eigenvalues[1]
    np.testing.assert_allclose(green_function(m).matrix, exact, atol=1e-15)
    np.testing.assert_allclose(green_by_time_integral(m).matrix, exact, atol=1e-12)


def test_midpoint_weights_scalar_integral():
    lam = np.array([0.5, 3.0, 400.0])
    approx = midpoint_time_weights(lam, 200.0, 1000) + np.exp(-lam * 200.0) / lam
    np.testing.assert_allclose(approx, 1 / lam, rtol=1e-10)


@pytest.mark.parametrize("name", ["torus", "k4"])
def test_time_integral_matches(fleet, name):
    m = fleet[name]
    Gt = green_by_time_integral(m, panels=2000)
    assert np.max(np.abs(Gt.matrix - green_function(m).matrix)) <= 1e-6
    assert Gt.meta["error_estimate"] <= 1e-6


def test_time_integral_too_few_panels(torus3):
    with pytest.raises(NumericalFailure):
        green_by_time_integral(torus3, panels=8, tol=1e-10)


def test_time_integral_improves_with_t_max(torus3):
    lam1 = torus3.eigenvalues[1]
    sweep = time_integral_sweep(torus3, [1 / lam1, 2 / lam1, 5 / lam1, 10 / lam1, 20 / lam1])
    errs = [e for _, e in sweep]
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("name", ["torus", "sphere"])
def test_representation_formulas(fleet, name):
    m = fleet[name]
    G = green_function(m)
    D = gradient_matrices(m)
    for seed in range(20):
        u = random_field(m, min(40, m.n_modes - 1), seed, zero_mean=False)
        assert representation_residual(m, u, G) <= 1e-8
        assert gradient_representation_residual(m, u, G, D) <= 1e-8


def test_representation_on_graph(k4):
    u = random_field(k4, 3, 0, zero_mean=False)
    assert representation_residual(k4, u) <= 1e-12
    with pytest.raises(ModelError):
        gradient_representation_residual(k4, u)


def test_lower_bound_on_unit_torus(torus3):
    cstar = 2 ** (-2 / 3) / 2
    rec = green_lower_bound_check(torus3, cstar)
    assert rec.passed and rec.slack_ratio >= 10
    assert rec.extras["sigma"] < 0
    assert rec.rhs == pytest.approx(c0(3) * cstar**2)


def test_lower_bound_two_node_huge_cstar():
    m = build_graph_model([1.0, 1.0], [(0, 1, 1.0)], 3)
    rec = green_lower_bound_check(m, 1e3)
    assert rec.passed and math.isfinite(rec.slack_ratio)
