import numpy as np
import pytest

from softdeflate.linalg import Factors, random_orthonormal, sym_eig_small
from softdeflate.synth import (
    PlantedInstance,
    SpectrumSpec,
    fro_error_factored,
    gen_planted,
    spectrum_gaps,
    subspace_errors,
)


def test_spectrum_gaps_simple_pair():
    gaps, gamma, gamma_star = spectrum_gaps([1.0, 0.5])
    assert gaps == [pytest.approx(0.5)]
    assert gamma == pytest.approx(0.5)
    assert gamma_star == pytest.approx(0.5)


def test_spectrum_gaps_flat_pair_with_small_tail():
    gaps, gamma, gamma_star = spectrum_gaps([1.0, 1.0, 0.1])
    assert gaps == [pytest.approx(0.0), pytest.approx(0.9)]
    assert gamma == pytest.approx(0.9)
    assert gamma_star == pytest.approx(0.9)  # gamma_k = 1 with sigma_4 = 0


def test_spectrum_gaps_all_equal_falls_back_to_floor():
    gaps, gamma, gamma_star = spectrum_gaps([2.0, 2.0, 2.0])
    assert gaps == [0.0, 0.0]
    assert gamma == pytest.approx(1.0 / 12.0)
    assert gamma_star == pytest.approx(1.0 / 12.0)


def test_spectrum_gaps_properties_and_validation():
    gaps, gamma, gamma_star = spectrum_gaps([1.0, 0.9, 0.5, 0.4])
    assert all(0.0 <= g < 1.0 for g in gaps)
    assert gamma_star <= gamma
    with pytest.raises(ValueError):
        spectrum_gaps([0.5, 1.0])
    with pytest.raises(ValueError):
        spectrum_gaps([1.0, -0.1])


def test_spectrum_spec_carries_derived_quantities():
    spec = SpectrumSpec((1.0, 1.0, 0.1))
    assert spec.k == 3
    assert spec.gamma == pytest.approx(0.9)
    assert spec.gamma_star == pytest.approx(0.9)


def test_gen_planted_matches_requested_spectrum():
    rng = np.random.default_rng(0)
    inst = gen_planted(40, (1.0, 1.0, 0.01), 0.0, rng)
    evals, _ = sym_eig_small(inst.dense())
    np.testing.assert_allclose(np.sort(evals)[::-1][:3], [1.0, 1.0, 0.01], atol=1e-8)
    assert abs(evals[3:]).max() <= 1e-10


def test_gen_planted_deterministic():
    a = gen_planted(30, (1.0, 0.5), 0.2, np.random.default_rng(42))
    b = gen_planted(30, (1.0, 0.5), 0.2, np.random.default_rng(42))
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.noise_basis, b.noise_basis)
    np.testing.assert_array_equal(a.noise_evals, b.noise_evals)


def test_gen_planted_u_coherence_is_modest():
    # random bases are incoherent: 95th percentile over 50 seeds stays
    # below a recorded envelope (measured once, with margin)
    n, k = 200, 4
    cohs = [gen_planted(n, (1.0,) * k, 0.0, np.random.default_rng(s)).mu_u for s in range(50)]
    assert np.percentile(cohs, 95) <= 8.0


def test_noise_is_orthogonal_to_u_and_scaled():
    rng = np.random.default_rng(1)
    inst = gen_planted(80, (1.0, 0.7), 0.05, rng)
    assert inst.noise_fro == pytest.approx(0.05, rel=1e-12)
    # orthogonality on both sides through the factored representation
    assert np.max(np.abs(inst.u.T @ inst.noise_basis)) <= 1e-10
    # rank <= 2q with q = 2k by default
    assert inst.noise_basis.shape[1] <= 4 * inst.k


def test_dense_noise_mode():
    rng = np.random.default_rng(2)
    inst = gen_planted(50, (1.0, 0.7), 0.3, rng, dense_noise=True)
    n_mat = (inst.noise_basis * inst.noise_evals) @ inst.noise_basis.T
    proj = inst.u @ (inst.u.T @ n_mat)
    assert np.max(np.abs(proj)) <= 1e-10
    assert np.linalg.norm(n_mat) <= 0.3 + 1e-12
    assert np.linalg.norm(n_mat, "fro") == pytest.approx(0.3, rel=1e-10)


def test_entry_oracle_matches_dense():
    rng = np.random.default_rng(3)
    inst = gen_planted(25, (1.0, 0.6), 0.1, rng)
    a = inst.dense()
    ii, jj = np.meshgrid(np.arange(25), np.arange(25), indexing="ij")
    np.testing.assert_allclose(
        inst.entry_oracle(ii.ravel(), jj.ravel()).reshape(25, 25), a, atol=1e-12
    )
    assert inst.entry_oracle(3, 4) == pytest.approx(a[3, 4], abs=1e-12)


def test_gen_planted_validation():
    with pytest.raises(ValueError):
        gen_planted(2, (1.0, 0.5, 0.2), 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gen_planted(10, (1.0, 0.5), -0.1, np.random.default_rng(0))


def test_fro_error_exact_factors_is_zero():
    rng = np.random.default_rng(4)
    inst = gen_planted(60, (1.0, 0.8, 0.3), 0.0, rng)
    rot = random_orthonormal(3, rng)
    half = inst.u @ (np.diag(np.sqrt(inst.sigmas)) @ rot)
    err = fro_error_factored(inst, Factors(half, half))
    assert err <= 1e-8 * inst.fro_norm


def test_fro_error_zero_factors_is_total_mass():
    rng = np.random.default_rng(5)
    inst = gen_planted(40, (1.0, 0.5), 0.25, rng)
    expect = np.sqrt(1.0 + 0.25 + 0.25**2)
    got = fro_error_factored(inst, Factors(np.zeros((40, 0)), np.zeros((40, 0))))
    assert got == pytest.approx(expect, rel=1e-12)
    assert got == pytest.approx(inst.fro_norm, rel=1e-12)


def test_fro_error_matches_dense_computation():
    rng = np.random.default_rng(6)
    inst = gen_planted(50, (1.0, 0.7, 0.2), 0.1, rng)
    x = rng.standard_normal((50, 3))
    y = rng.standard_normal((50, 3))
    dense = np.linalg.norm(inst.dense() - x @ y.T)
    got = fro_error_factored(inst, Factors(x, y))
    assert got == pytest.approx(dense, rel=1e-10)


def test_subspace_errors_identity_and_orthogonal():
    rng = np.random.default_rng(7)
    inst = gen_planted(30, (1.0, 0.8, 0.5), 0.0, rng)
    assert subspace_errors(inst, inst.u, [1, 2, 3]) == pytest.approx([0.0, 0.0, 0.0], abs=1e-7)
    # first column right, second column orthogonal to the whole of U
    comp = rng.standard_normal((30, 1))
    comp -= inst.u @ (inst.u.T @ comp)
    comp /= np.linalg.norm(comp)
    x = np.hstack([inst.u[:, :1], comp])
    errs = subspace_errors(inst, x, [1, 2])
    assert errs[0] == pytest.approx(0.0, abs=1e-7)
    assert errs[1] == pytest.approx(1.0, abs=1e-10)


def test_subspace_errors_match_dense_complement():
    rng = np.random.default_rng(8)
    n = 60
    inst = gen_planted(n, (1.0, 0.6, 0.3), 0.0, rng)
    x = np.linalg.qr(rng.standard_normal((n, 3)))[0]
    got = subspace_errors(inst, x, [1, 2, 3])
    for b, val in zip([1, 2, 3], got):
        u = inst.u[:, :b]
        xb = x[:, :b]
        dense = np.linalg.norm((np.eye(n) - xb @ xb.T) @ u, 2)
        assert val == pytest.approx(dense, abs=1e-10)
        assert 0.0 <= val <= 1.0


def test_subspace_errors_validation():
    rng = np.random.default_rng(9)
    inst = gen_planted(20, (1.0, 0.5), 0.0, rng)
    with pytest.raises(ValueError):
        subspace_errors(inst, inst.u, [2, 1])
    with pytest.raises(ValueError):
        subspace_errors(inst, inst.u, [3])
