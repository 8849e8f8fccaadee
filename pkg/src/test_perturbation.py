"""
Tests for the perturbation pipeline and its certificates
"""

import dataclasses

import numpy as np
import pytest

from commutant import Verdict, commutant_basis, relative_commutant, factor_embedding
from ensembles import ginibre, sample_matrix
from errors import CertificateFailed, NotHermitian, NotInAlgebra
from linalg_core import adjoint, hermitian_parts, offdiagonal_block_norms, operator_norm
from perturbation import (
    StageBounds,
    build_generator_pair,
    cluster_spectrum,
    fill_offdiagonal,
    generator_pair_certificate,
    inject_generators,
    perturb_to_irreducible,
    perturb_within_factor,
    read_trace,
    refine_decomposition,
    relabel_eigenvalues,
    spread_labels,
    verify_trace,
    write_trace,
)


# -----------------------------
# Clustering
# -----------------------------
def test_cluster_spectrum_groups_close_eigenvalues():
    clustering = cluster_spectrum(np.diag([0.0, 0.01, 1.0]), 0.05)
    assert clustering.reps == [0.0, 1.0]
    assert clustering.sizes == [2, 1]
    assert clustering.approx_error == pytest.approx(0.01)
    total = sum(p.matrix for p in clustering.projections)
    np.testing.assert_allclose(total, np.eye(3), atol=1e-12)


def test_cluster_spectrum_error_is_below_radius():
    rng = np.random.default_rng(0)
    g = ginibre(rng, 8)
    a = (g + adjoint(g)) / 2
    clustering = cluster_spectrum(a, 0.3)
    assert operator_norm(a - clustering.approximant()) < 0.3


def test_cluster_spectrum_rejects_bad_input():
    with pytest.raises(ValueError):
        cluster_spectrum(np.eye(2), 0.0)
    with pytest.raises(NotHermitian):
        cluster_spectrum(np.array([[0, 1], [0, 0]]), 0.1)


def test_spread_labels_single_block():
    assert spread_labels([0.0], [2], 0.8) == [[0.0, 0.025]]


def test_spread_labels_respect_neighbour_gap():
    labels = spread_labels([0.0, 0.1], [4, 1], 1.0)
    flat = [x for row in labels for x in row]
    assert all(b > a for a, b in zip(flat, flat[1:]))
    assert labels[0][-1] < 0.1


# -----------------------------
# Stages
# -----------------------------
def test_refine_decomposition_stage_one_bound():
    t = sample_matrix("block_diagonal_conjugated", 6, seed=1)
    eps = 0.3
    dec, t1 = refine_decomposition(t, eps)
    np.testing.assert_allclose(adjoint(dec.rotation) @ dec.rotation, np.eye(6), atol=1e-12)
    assert dec.blocks.dim == 6
    assert operator_norm(t - t1) < eps / 2


def test_refine_decomposition_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError):
        refine_decomposition(np.eye(2), 0.0)


def test_relabel_stays_within_eighth_of_epsilon():
    t = sample_matrix("ginibre", 5, seed=2)
    eps = 2.0
    dec, t1 = refine_decomposition(t, eps)
    a1, _ = hermitian_parts(t1)
    a2 = relabel_eigenvalues(dec, eps)
    assert operator_norm(a1 - a2) < eps / 8
    labels = dec.flat_labels
    assert all(b > a for a, b in zip(labels, labels[1:]))


def test_relabel_of_hermitian_input_keeps_cluster_representatives():
    t = sample_matrix("hermitian", 5, seed=2)
    dec, t1 = refine_decomposition(t, 2.0)
    a1, _ = hermitian_parts(t1)
    assert dec.inner_counts == [1] * len(dec.outer.reps)
    assert operator_norm(relabel_eigenvalues(dec, 2.0) - a1) < 1e-12


def test_fill_offdiagonal_on_two_scalar_blocks():
    eps = 0.4
    dec, t1 = refine_decomposition(np.diag([0.0, 1.0]), eps)
    _, b1 = hermitian_parts(t1)
    b2 = fill_offdiagonal(dec, b1, eps, rng_seed=3)
    assert abs(b2[0, 1]) == pytest.approx(eps / 16)
    assert b2[1, 0] == pytest.approx(np.conj(b2[0, 1]))
    assert abs(b2[0, 0]) < 1e-15 and abs(b2[1, 1]) < 1e-15


def test_fill_offdiagonal_leaves_nonzero_blocks_untouched():
    eps = 0.4
    t = np.diag([0.0, 1.0]) + 1j * np.array([[0.0, 0.5], [0.5, 0.0]])
    dec, t1 = refine_decomposition(t, eps)
    _, b1 = hermitian_parts(t1)
    np.testing.assert_array_equal(fill_offdiagonal(dec, b1, eps), b1)


def test_fill_offdiagonal_makes_every_block_pair_nonzero():
    eps = 0.2
    dec, t1 = refine_decomposition(np.diag([0.0, 1.0, 2.0, 3.0]), eps)
    _, b1 = hermitian_parts(t1)
    b2 = fill_offdiagonal(dec, b1, eps, rng_seed=0)
    norms = offdiagonal_block_norms(dec.to_block(b2), dec.blocks)
    k = dec.blocks.count
    floor = eps / (32 * k * (k - 1) // 2)
    assert all(norms[a, b] >= floor for a in range(k) for b in range(k) if a != b)
    assert operator_norm(b2 - b1) < eps / 8


def test_inject_generators_on_scalar_blocks():
    eps = 0.4
    dec, t1 = refine_decomposition(np.diag([0.0, 1.0]), eps)
    _, b1 = hermitian_parts(t1)
    a2 = relabel_eigenvalues(dec, eps)
    b2 = fill_offdiagonal(dec, b1, eps)
    t3, delta = inject_generators(dec, a2, b2, eps)
    assert delta == pytest.approx(eps / 16)
    np.testing.assert_allclose(t3 - (a2 + 1j * b2), delta * (1 + 1j) * np.eye(2), atol=1e-14)


# -----------------------------
# Generator pairs
# -----------------------------
@pytest.mark.parametrize("d", range(1, 17))
def test_generator_pair_has_trivial_joint_commutant(d):
    pair = build_generator_pair(d)
    result = generator_pair_certificate(pair)
    assert result.dimension == 1
    assert result.verdict == Verdict.IRREDUCIBLE
    for m in (pair.X, pair.Y):
        w = np.linalg.eigvalsh(m)
        assert w[0] > 0 and w[-1] <= 1 + 1e-12


def test_generator_pair_rejects_empty_block():
    with pytest.raises(ValueError):
        build_generator_pair(0)


# -----------------------------
# Full pipeline
# -----------------------------
@pytest.mark.parametrize("t", [
    np.diag([1.0, 2.0]),
    np.zeros((3, 3)),
    np.eye(4),
    np.kron(np.diag([1.0, 2.0]), np.eye(2)),
    np.array([[0, 1], [0, 0]]),
])
def test_perturb_structured_inputs(t):
    eps = 0.05
    trace = perturb_to_irreducible(t, eps)
    assert trace.certificate.verdict == Verdict.IRREDUCIBLE
    assert operator_norm(t - trace.T3) < eps
    assert not trace.bounds.violations(eps)


def test_perturb_diagonal_has_exact_first_stage():
    trace = perturb_to_irreducible(np.diag([1.0, 2.0]), 0.1)
    assert trace.bounds.t_t1 < 1e-14
    assert trace.block_sizes == [1, 1]


def test_robustly_irreducible_input_is_returned_unchanged():
    t = ginibre(np.random.default_rng(9), 4)
    trace = perturb_to_irreducible(t, 0.1)
    np.testing.assert_array_equal(trace.T3, t)
    assert trace.delta == 0.0
    assert trace.decomposition is None
    assert trace.bounds.t_t3 == 0.0


def test_perturbation_is_deterministic():
    t = sample_matrix("block_diagonal_conjugated", 6, seed=4)
    first = perturb_to_irreducible(t, 0.1, rng_seed=7)
    second = perturb_to_irreducible(t, 0.1, rng_seed=7)
    np.testing.assert_array_equal(first.T3, second.T3)
    assert first.bounds == second.bounds


@pytest.mark.parametrize("dim", [2, 4, 8])
@pytest.mark.parametrize("rel_eps", [0.5, 0.1, 0.01])
def test_block_diagonal_inputs_become_irreducible(dim, rel_eps):
    for seed in range(5):
        t = sample_matrix("block_diagonal_conjugated", dim, seed)
        eps = rel_eps * operator_norm(t)
        trace = perturb_to_irreducible(t, eps, rng_seed=seed)
        report = verify_trace(trace)
        assert report.passed, report.checks
        assert commutant_basis(t).dimension >= 2


@pytest.mark.slow
@pytest.mark.parametrize("dim", [2, 4, 8, 16])
def test_block_diagonal_acceptance_sweep(dim):
    for seed in range(200):
        t = sample_matrix("block_diagonal_conjugated", dim, seed)
        for rel_eps in (0.5, 0.1, 0.01):
            eps = rel_eps * operator_norm(t)
            trace = perturb_to_irreducible(t, eps, rng_seed=seed)
            bounds = trace.bounds
            assert bounds.t_t1 < eps / 2
            assert bounds.t_t2 < 3 * eps / 4
            assert bounds.t2_t3 < eps / 4
            assert bounds.t_t3 < eps
            assert trace.certificate.is_irreducible


# -----------------------------
# Trace verification
# -----------------------------
def test_verify_trace_flags_shrunken_epsilon():
    trace = perturb_to_irreducible(np.diag([1.0, 2.0, 3.0]), 0.2)
    assert verify_trace(trace).passed
    shrunk = dataclasses.replace(trace, epsilon=trace.bounds.t_t3 / 4)
    report = verify_trace(shrunk)
    assert not report.passed
    assert report.checks["t_t3"] is False


def test_verify_trace_flags_reducible_output():
    t = np.diag([1.0, 2.0])
    trace = perturb_to_irreducible(t, 0.2)
    tampered = dataclasses.replace(trace, T3=t)
    report = verify_trace(tampered)
    assert report.checks["certificate"] is False


def test_trace_file_can_be_reverified(tmp_path):
    trace = perturb_to_irreducible(sample_matrix("block_diagonal_conjugated", 4, seed=0), 0.2)
    path = tmp_path / "trace.json"
    write_trace(path, trace)
    loaded = read_trace(path)
    assert loaded.decomposition is None
    np.testing.assert_array_equal(loaded.T3, trace.T3)
    assert loaded.bounds == trace.bounds
    assert verify_trace(loaded).passed


def test_stage_limits():
    assert StageBounds.limits(1.0) == {"t_t1": 0.5, "t_t2": 0.75, "t2_t3": 0.25, "t_t3": 1.0}
    assert StageBounds(0.6, 0.0, 0.0, 0.0).violations(1.0) == ["t_t1"]


# -----------------------------
# Perturbation inside a factor
# -----------------------------
def test_perturb_within_factor():
    t = np.kron(np.diag([1.0, 2.0]), np.eye(2))
    eps = 0.1
    result = perturb_within_factor(t, 2, 2, eps)
    assert result.distance < eps
    assert result.certificate.verdict == Verdict.IRREDUCIBLE
    assert relative_commutant(result.T3, factor_embedding(2, 2)).dimension == 1
    assert commutant_basis(result.T3).dimension == 4


def test_perturb_within_factor_rejects_outside_operator():
    with pytest.raises(NotInAlgebra):
        perturb_within_factor(ginibre(np.random.default_rng(1), 4), 2, 2, 0.1)
    with pytest.raises(NotInAlgebra):
        perturb_within_factor(np.eye(5), 2, 2, 0.1)


def test_verify_trace_flags_second_stage_on_scalar_block():
    trace = perturb_to_irreducible(np.diag([1.0, 1.0]), 0.1)
    assert trace.block_sizes == [2]
    report = verify_trace(dataclasses.replace(trace, T3=trace.T2))
    assert report.checks["certificate"] is False


def test_commutant_of_output_is_block_diagonal_in_rotated_coordinates():
    t = sample_matrix("block_diagonal_conjugated", 6, seed=8)
    trace = perturb_to_irreducible(t, 0.2)
    dec = trace.decomposition
    for x in commutant_basis(trace.T3).basis:
        norms = offdiagonal_block_norms(dec.to_block(x), dec.blocks)
        assert norms.max() <= 1e-8 * np.sqrt(t.shape[0])


def test_spread_labels_two_blocks_stay_in_windows():
    eps = 0.8
    labels = spread_labels([0.0, 1.0], [2, 2], eps)
    flat = [x for row in labels for x in row]
    assert all(b > a for a, b in zip(flat, flat[1:]))
    for rep, row in zip([0.0, 1.0], labels):
        assert all(abs(x - rep) < eps / 8 for x in row)


def test_budget_below_rank_threshold_is_not_certified():
    t = np.diag([0.0, 1.0, 1e6])
    with pytest.raises(CertificateFailed):
        perturb_to_irreducible(t, 1e-3, rng_seed=0)
    result = perturb_to_irreducible(t / 100, 1e-3, rng_seed=0)
    assert result.certificate.verdict == Verdict.IRREDUCIBLE
