import numpy as np
import pytest

from conftest import perturbed_metric
from kahlerflow.errors import DegeneracyError, InputError
from kahlerflow.geometry import ConformalMetric, latitude_grid, ricci_potential
from kahlerflow.spectral import (
    SectorVectorField,
    bochner_kodaira_residual,
    dbar_energy,
    default_basis_size,
    futaki,
    gradient_field,
    gram_matrix,
    holomorphic_kernel,
    inner,
    key_inequality_check,
    lambda_min,
    norm_sq,
    project_holo,
    projection_futaki_identity,
    rotation_generator,
    sector_field,
    sector_spectrum,
)


def random_field(m, k, rng, n=10):
    c = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / (1.0 + np.arange(n)) ** 2
    return sector_field(m, k, c)


def test_rotation_generator_is_holomorphic():
    m = ConformalMetric.round(128)
    assert dbar_energy(m, rotation_generator(m)) < 1e-10


def test_dbar_energy_scaling(rng):
    m = perturbed_metric(128)
    V = random_field(m, 2, rng)
    c = 1.5 - 2.0j
    assert abs(dbar_energy(m, V.scaled(c)) - abs(c) ** 2 * dbar_energy(m, V)) < 1e-12 * dbar_energy(m, V) * 10


def test_dbar_energy_refinement(rng):
    c = rng.standard_normal(10) / (1.0 + np.arange(10)) ** 2
    e = [dbar_energy(m, sector_field(m, 2, c)) for m in (perturbed_metric(128), perturbed_metric(512))]
    assert abs(e[0] - e[1]) / e[1] < 1e-6


def test_dbar_energy_grid_mismatch(rng):
    V = random_field(perturbed_metric(64), 1, rng)
    with pytest.raises(InputError):
        dbar_energy(perturbed_metric(128), V)


@pytest.mark.parametrize("k", [-3, -2, -1, 0, 1, 2, 3])
def test_round_sector_spectra_match_oracle(oracle, k):
    ref = np.array(oracle["dbar_round_sector_spectra"][str(k)])
    ev = sector_spectrum(ConformalMetric.round(128), k).eigenvalues
    n = min(4, ref.size)
    assert np.max(np.abs(ev[:n] - ref[:n])) < 1e-8


def test_round_lambda_matches_oracle(oracle):
    rep = lambda_min(ConformalMetric.round(128))
    assert abs(rep.lambda_min - oracle["lambda_round"]) < 1e-8
    assert rep.total_kernel_dim == 3
    assert rep.tail_increasing and not rep.warnings


def test_lambda_min_rejects_small_cap():
    with pytest.raises(InputError):
        lambda_min(ConformalMetric.round(32), K=2)


def test_lambda_scales_inversely_with_metric():
    m = perturbed_metric(128)
    c = 1.7
    scaled = ConformalMetric(m.grid, m.u + 0.5 * np.log(c), check_area=False)
    assert abs(lambda_min(scaled).lambda_min - lambda_min(m).lambda_min / c) < 1e-10


def test_lambda_grid_independent():
    vals = [lambda_min(perturbed_metric(N)).lambda_min for N in (64, 128, 256)]
    assert np.ptp(vals) < 1e-10


def test_lambda_continuity():
    lam0 = lambda_min(ConformalMetric.round(128)).lambda_min
    gaps = [abs(lambda_min(perturbed_metric(128, eps)).lambda_min - lam0) for eps in (1e-1, 1e-2, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2]
    # empirical order in eps is at least 1
    assert np.log10(gaps[1] / gaps[2]) > 0.9


def test_rayleigh_bound(rng):
    m = perturbed_metric(128)
    lam = lambda_min(m).lambda_min
    ker = holomorphic_kernel(m)
    for _ in range(10):
        k = int(rng.integers(-4, 5))
        V = random_field(m, k, rng)
        W = SectorVectorField(k, V.profile - project_holo(m, V, ker).profile, m)
        assert lam <= dbar_energy(m, W) / norm_sq(m, W) + 1e-10


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.2])
def test_kernel_dimension_and_gram(eps):
    m = perturbed_metric(128, eps)
    ker = holomorphic_kernel(m)
    assert ker.dim == 3
    assert sorted(V.k for V in ker.fields) == [-1, 0, 1]
    assert np.max(np.abs(gram_matrix(m, ker.fields) - np.eye(3))) < 1e-10
    for V in ker.fields:
        assert dbar_energy(m, V) < 1e-10


def test_kernel_dimension_error_is_raised(monkeypatch):
    import kahlerflow.spectral as sp

    monkeypatch.setattr(sp, "KERNEL_RTOL", 0.9)
    with pytest.raises(DegeneracyError):
        sp.holomorphic_kernel(ConformalMetric.round(64))


def test_projection_properties(rng):
    m = perturbed_metric(128)
    ker = holomorphic_kernel(m)
    E = ker.fields[1]
    P = project_holo(m, E, ker)
    assert np.max(np.abs(P.profile - E.profile)) < 1e-10
    V = random_field(m, 0, rng)
    P = project_holo(m, V, ker)
    rest = SectorVectorField(0, V.profile - P.profile, m)
    for F in ker.fields:
        assert abs(inner(m, rest, F)) < 1e-10
    assert abs(norm_sq(m, V) - norm_sq(m, P) - norm_sq(m, rest)) < 1e-10
    assert np.max(np.abs(project_holo(m, rest, ker).profile)) < 1e-10
    W = random_field(m, 3, rng)
    assert np.max(np.abs(project_holo(m, W, ker).profile)) == 0


def test_projection_identity_round():
    lhs, rhs, gap = projection_futaki_identity(ConformalMetric.round(64))
    assert max(abs(lhs), abs(rhs), gap) < 1e-20


@pytest.mark.parametrize("coeffs", [(0, 0, 1, 0.5), (0, 1.0), (0, 0.3, 0, 1.0)])
def test_projection_identity_perturbed(coeffs):
    m = perturbed_metric(256, 0.1, coeffs)
    lhs, rhs, gap = projection_futaki_identity(m)
    assert gap < 1e-8


def test_futaki_round_is_zero():
    m = ConformalMetric.round(64)
    for V in holomorphic_kernel(m).fields:
        assert abs(futaki(m, V)) < 1e-12


def test_futaki_rotation_metric_independent():
    vals = [futaki(m, rotation_generator(m)) for m in
            (perturbed_metric(128, e, c) for e, c in [(0.05, (0, 0, 1, 0.5)), (0.1, (0, 1)), (0.2, (0, 0, 0, 1))])]
    assert max(abs(v) for v in vals) < 1e-6


def test_futaki_linear():
    m = perturbed_metric(128, 0.2, (0, 1.0))
    W = rotation_generator(m)
    assert abs(futaki(m, W.scaled(2.0)) - 2 * futaki(m, W)) < 1e-15


def test_futaki_rejects_non_holomorphic(rng):
    m = perturbed_metric(64)
    with pytest.raises(InputError):
        futaki(m, random_field(m, 0, rng))


def test_bochner_kodaira_round_holomorphic():
    m = ConformalMetric.round(128)
    for V in holomorphic_kernel(m).fields:
        assert bochner_kodaira_residual(m, V) < 1e-9


def test_bochner_kodaira_zero_field():
    m = ConformalMetric.round(32)
    assert bochner_kodaira_residual(m, SectorVectorField(0, np.zeros(32), m)) == 0.0


@pytest.mark.parametrize("N", [128, 256])
def test_bochner_kodaira_random(rng, N):
    m = perturbed_metric(N, 0.1)
    for k in (-2, 0, 1, 3):
        assert bochner_kodaira_residual(m, random_field(m, k, rng)) < 1e-10
    h, _ = ricci_potential(m)
    assert bochner_kodaira_residual(m, gradient_field(m, h)) < 1e-10


def test_basis_size_default():
    assert default_basis_size(32) == 10
    assert default_basis_size(12) == 8


def test_key_inequality_round(round_traj):
    rows = key_inequality_check(round_traj)
    assert all(r.satisfied for r in rows)
    assert all(r.lhs == 0 and r.rhs == 0 for r in rows)


def test_key_inequality_perturbed(short_traj):
    rows = key_inequality_check(short_traj)
    assert all(r.satisfied for r in rows)


def test_key_inequality_needs_snapshots(short_traj):
    with pytest.raises(InputError):
        key_inequality_check(short_traj.truncated(0.01))
