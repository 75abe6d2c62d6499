import numpy as np
import pytest
from numpy.polynomial import chebyshev as cheb

from conftest import perturbed_metric
from kahlerflow.errors import CapabilityError, DegenerateMetricError, InputError, SolvabilityError
from kahlerflow.geometry import (
    FOUR_PI,
    ConformalMetric,
    ScalarField,
    derivative_stack,
    gauss_curvature,
    grad_norm_sq,
    l2_norm,
    laplacian,
    latitude_grid,
    poisson_solve,
    ricci_potential,
)


def smooth_random(g, rng, deg=8):
    c = rng.standard_normal(deg + 1) / (1.0 + np.arange(deg + 1)) ** 2
    return np.polynomial.polynomial.polyval(g.x, c)


@pytest.mark.parametrize("N", [8, 32, 256])
def test_grid_invariants(N):
    g = latitude_grid(N)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] > 0 and g.nodes[-1] < np.pi
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - FOUR_PI) < 1e-12


@pytest.mark.parametrize("N", [0, 7, 9, -4])
def test_grid_rejects_bad_sizes(N):
    with pytest.raises(InputError):
        latitude_grid(N)


def test_round_curvature_is_one():
    m = ConformalMetric.round(64)
    assert np.max(np.abs(gauss_curvature(m).values - 1.0)) < 1e-10


def test_constant_factor_rescales_curvature():
    g = latitude_grid(64)
    m = ConformalMetric(g, np.full(64, 0.3), check_area=False)
    assert np.allclose(gauss_curvature(m).values, np.exp(-0.6), rtol=0, atol=1e-12)


def test_curvature_matches_symbolic_profile(oracle):
    data = oracle["curvature_profile"]
    g = latitude_grid(128)
    u = 0.1 * g.x * g.sin**2
    R = gauss_curvature(ConformalMetric(g, u, check_area=False)).values
    vals = cheb.chebval(np.cos(data["xi"]), g.cheb_coeffs(R))
    assert np.max(np.abs(vals - data["R"])) < 1e-6


def test_curvature_refinement_agrees():
    out = []
    for N in (128, 512):
        g = latitude_grid(N)
        u = 0.1 * g.x * g.sin**2
        R = gauss_curvature(ConformalMetric(g, u, check_area=False)).values
        out.append(cheb.chebval(np.array([0.3, -0.7]), g.cheb_coeffs(R)))
    assert np.max(np.abs(out[0] - out[1])) < 1e-6


def test_laplacian_of_constant_vanishes():
    m = perturbed_metric(64)
    assert np.max(np.abs(laplacian(m, np.ones(64)).values)) < 1e-10


def test_laplacian_first_harmonic():
    m = ConformalMetric.round(64)
    g = m.grid
    assert np.max(np.abs(laplacian(m, g.x).values + g.x)) < 1e-10


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_laplacian_legendre_eigenvalues(oracle, ell):
    m = ConformalMetric.round(64)
    P = np.polynomial.legendre.legval(m.grid.x, np.eye(ell + 1)[ell])
    lam = oracle["laplacian_legendre_half_eigenvalues"][str(ell)]
    assert np.max(np.abs(laplacian(m, P).values - lam * P)) < 1e-9


def test_laplacian_integrates_to_zero(rng):
    m = perturbed_metric(128)
    for _ in range(5):
        f = smooth_random(m.grid, rng)
        assert abs(m.integrate(laplacian(m, f).values)) < 1e-10


def test_laplacian_self_adjoint(rng):
    m = perturbed_metric(128)
    f, h = smooth_random(m.grid, rng), smooth_random(m.grid, rng)
    a = m.integrate(laplacian(m, f).values * h)
    b = m.integrate(f * laplacian(m, h).values)
    nf, nh = np.sqrt(m.integrate(f * f)), np.sqrt(m.integrate(h * h))
    assert abs(a - b) / (nf * nh) < 1e-11


def test_laplacian_rejects_irregular_field():
    m = ConformalMetric.round(64)
    with pytest.raises(InputError):
        laplacian(m, m.grid.nodes)


def test_poisson_zero_rhs():
    m = perturbed_metric(64)
    assert np.max(np.abs(poisson_solve(m, np.zeros(64)).values)) == 0.0


def test_poisson_round_trip(rng):
    m = perturbed_metric(256)
    f = smooth_random(m.grid, rng)
    h = poisson_solve(m, laplacian(m, f).values).values
    target = f - m.integrate(f) / m.area
    assert np.max(np.abs(h - target)) < 1e-8


def test_poisson_first_harmonic():
    m = ConformalMetric.round(64)
    h = poisson_solve(m, -m.grid.x).values
    assert np.max(np.abs(h - m.grid.x)) < 1e-10


def test_poisson_rejects_nonzero_mean():
    m = ConformalMetric.round(64)
    with pytest.raises(SolvabilityError):
        poisson_solve(m, np.ones(64))


def test_ricci_potential_round():
    h, mu = ricci_potential(ConformalMetric.round(64))
    assert np.max(np.abs(h.values)) < 1e-12
    assert abs(mu - 1.0) < 1e-12


@pytest.mark.parametrize("N", [32, 128, 256])
def test_ricci_potential_perturbed(N):
    m = perturbed_metric(N, 0.2)
    h, mu = ricci_potential(m)
    R = gauss_curvature(m).values
    assert abs(m.integrate(R - mu)) < 1e-10
    # discrete Gauss-Bonnet
    assert abs(mu - 1.0) < 1e-10
    assert np.max(np.abs(laplacian(m, h).values - (R - mu))) < 1e-8


def test_gauss_bonnet_refinement_at_roundoff():
    # the quadrature integrates Delta_0 u exactly, so there is no grid error to refine
    errs = [abs(m.integrate(gauss_curvature(m).values) - FOUR_PI) for m in map(perturbed_metric, (32, 64, 128))]
    assert max(errs) < 1e-11


def test_metric_validation():
    g = latitude_grid(32)
    with pytest.raises(DegenerateMetricError):
        ConformalMetric(g, np.full(32, np.nan), check_area=False)
    with pytest.raises(DegenerateMetricError):
        ConformalMetric(g, np.full(32, -20.0), check_area=False)
    with pytest.raises(InputError):
        ConformalMetric(g, np.full(32, 0.1))
    with pytest.raises(InputError):
        ConformalMetric(g, 0.5 * g.nodes, check_area=False)
    with pytest.raises(InputError):
        ConformalMetric(g, np.zeros(31))


def test_scalar_field_validation():
    g = latitude_grid(16)
    with pytest.raises(InputError):
        ScalarField(g, np.zeros(15))
    with pytest.raises(InputError):
        ScalarField(g, np.full(16, np.inf))


def test_zero_stack():
    m = perturbed_metric(64)
    for r, s in [(1, 0), (1, 1), (2, 0), (2, 1), (0, 3)]:
        assert np.all(derivative_stack(m, np.zeros(64), r, s).values == 0)


def test_unsupported_order():
    m = ConformalMetric.round(32)
    with pytest.raises(CapabilityError):
        derivative_stack(m, np.zeros(32), 2, 2)
    with pytest.raises(CapabilityError):
        derivative_stack(m, np.zeros(32), -1, 0)


@pytest.mark.parametrize("N", [128, 256])
def test_trace_of_mixed_stack_is_laplacian(N):
    m = perturbed_metric(N)
    h, _ = ricci_potential(m)
    st = derivative_stack(m, h, 1, 1)
    assert np.max(np.abs(st.values - laplacian(m, h).values)) < 1e-8


@pytest.mark.parametrize("rs", [(1, 0), (2, 0), (2, 1), (3, 0)])
def test_reality_constraint(rs):
    m = perturbed_metric(64)
    h, _ = ricci_potential(m)
    a = derivative_stack(m, h, *rs)
    b = derivative_stack(m, h, rs[1], rs[0])
    assert a.spin == -b.spin
    theta = 0.7
    assert np.max(np.abs(a.at(theta) - np.conj(b.at(theta)))) < 1e-12


def test_gradient_norm_refinement():
    vals = []
    for N in (256, 512):
        m = perturbed_metric(N)
        h, _ = ricci_potential(m)
        vals.append(l2_norm(m, derivative_stack(m, h, 1, 0)))
    assert abs(vals[0] - vals[1]) / vals[1] < 1e-6


def test_l2_norm_scaling_and_ibp():
    m = ConformalMetric.round(64)
    h = m.grid.x
    n1 = l2_norm(m, derivative_stack(m, h, 1, 0))
    n2 = l2_norm(m, derivative_stack(m, 2 * h, 1, 0))
    assert abs(n2 - 4 * n1) < 1e-12
    # int |grad h|^2 = -int h Delta h, = int cos^2 = 4 pi / 3
    assert abs(n1 + m.integrate(h * laplacian(m, h).values)) < 1e-12
    assert abs(n1 - FOUR_PI / 3) < 1e-12
    assert abs(m.integrate(grad_norm_sq(m, h)) - n1) < 1e-12


def test_l2_norm_grid_mismatch():
    st = derivative_stack(ConformalMetric.round(32), np.zeros(32), 1, 0)
    with pytest.raises(InputError):
        l2_norm(ConformalMetric.round(64), st)
