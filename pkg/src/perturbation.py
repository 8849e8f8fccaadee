"""
Perturbation of an arbitrary matrix into an irreducible one
Pipeline: T -> T1 (spectral clustering of A and of the diagonal blocks of B)
            -> T2 (strictly ordered labels, nonzero off-diagonal blocks)
            -> T3 (generator pairs injected into every block)
Every stage distance is measured and checked against its bound; T3 carries a commutant certificate.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from commutant import (
    CommutantResult,
    Verdict,
    commutant_basis,
    factor_embedding,
    joint_commutant,
    relative_commutant,
    span_residual,
)
from errors import CertificateFailed, DegenerateGap, InvalidMatrix, NotInAlgebra
from linalg_core import (
    DEFAULT_TOL,
    BlockIndex,
    CMatrix,
    Projection,
    adjoint,
    as_cmatrix,
    block_assemble,
    eigh,
    hermitian_parts,
    offdiagonal_block_norms,
    operator_norm,
    symmetrize,
)
from matrix_io import finite_or_none, matrix_from_json, matrix_to_json, read_json, write_json

logger = logging.getLogger(__name__)

# clustering radii are shrunk by this relative amount so measured norms stay strictly below the bounds
RADIUS_SLACK = 1e-6

ROBUST_MARGIN = 10.0


# -----------------------------
# Types
# -----------------------------
@dataclass
class SpectralClustering:
    """Representatives with orthogonal spectral projections summing to the identity of their range"""
    reps: List[float]
    projections: List[Projection]
    approx_error: float
    bases: List[np.ndarray] = field(default_factory=list, repr=False)
    members: List[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def sizes(self) -> List[int]:
        return [b.shape[1] for b in self.bases]

    def approximant(self) -> CMatrix:
        """sum_j rep_j E_j"""
        return sum(rep * p.matrix for rep, p in zip(self.reps, self.projections))


@dataclass
class RefinedDecomposition:
    """Two-level block structure E_i = sum_j F_ij with labels eta_ij and lambda_ij"""
    epsilon: float
    outer: SpectralClustering
    inner: List[SpectralClustering]
    relabeled: List[List[float]]
    rotation: CMatrix
    blocks: BlockIndex

    @property
    def etas(self) -> List[List[float]]:
        return [c.reps for c in self.inner]

    @property
    def inner_counts(self) -> List[int]:
        return [len(c.reps) for c in self.inner]

    @property
    def outer_blocks(self) -> BlockIndex:
        return BlockIndex.from_sizes(self.outer.sizes)

    @property
    def flat_labels(self) -> List[float]:
        return [lam for row in self.relabeled for lam in row]

    def to_block(self, m: CMatrix) -> CMatrix:
        """Rotate into coordinates where every F_ij is a contiguous diagonal block"""
        return adjoint(self.rotation) @ m @ self.rotation

    def from_block(self, m: CMatrix) -> CMatrix:
        return self.rotation @ m @ adjoint(self.rotation)


@dataclass
class GeneratorPair:
    """Positive contractions X, Y in M_d with trivial joint commutant"""
    X: CMatrix
    Y: CMatrix
    d: int


@dataclass
class StageBounds:
    t_t1: float
    t_t2: float
    t2_t3: float
    t_t3: float

    @staticmethod
    def limits(epsilon: float) -> Dict[str, float]:
        return {"t_t1": epsilon / 2, "t_t2": 3 * epsilon / 4, "t2_t3": epsilon / 4, "t_t3": epsilon}

    def violations(self, epsilon: float) -> List[str]:
        values = self.to_dict()
        return [name for name, limit in self.limits(epsilon).items() if not values[name] < limit]

    def to_dict(self) -> Dict[str, float]:
        return {"t_t1": self.t_t1, "t_t2": self.t_t2, "t2_t3": self.t2_t3, "t_t3": self.t_t3}


@dataclass
class PerturbationTrace:
    """Every intermediate operator and measured bound of one pipeline run"""
    T: CMatrix
    epsilon: float
    decomposition: Optional[RefinedDecomposition]
    T1: CMatrix
    T2: CMatrix
    T3: CMatrix
    delta: float
    bounds: StageBounds
    certificate: CommutantResult
    rng_seed: int = 0
    tol: float = DEFAULT_TOL

    @property
    def block_sizes(self) -> Optional[List[int]]:
        return self.decomposition.blocks.sizes if self.decomposition else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inputs": {
                "T": matrix_to_json(self.T),
                "epsilon": self.epsilon,
                "rng_seed": int(self.rng_seed),
                "tol": self.tol,
            },
            "delta": self.delta,
            "bounds": self.bounds.to_dict(),
            "certificate": {
                "dimension": self.certificate.dimension,
                "margin": finite_or_none(self.certificate.singular_value_margin),
                "verdict": self.certificate.verdict.value,
            },
            "block_sizes": self.block_sizes,
            "T1": matrix_to_json(self.T1),
            "T2": matrix_to_json(self.T2),
            "T3": matrix_to_json(self.T3),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PerturbationTrace":
        inputs = data["inputs"]
        cert = data["certificate"]
        margin = cert.get("margin")
        return cls(
            T=matrix_from_json(inputs["T"]),
            epsilon=float(inputs["epsilon"]),
            decomposition=None,
            T1=matrix_from_json(data["T1"]),
            T2=matrix_from_json(data["T2"]),
            T3=matrix_from_json(data["T3"]),
            delta=float(data["delta"]),
            bounds=StageBounds(**{k: float(v) for k, v in data["bounds"].items()}),
            certificate=CommutantResult(
                dimension=int(cert["dimension"]),
                basis=[],
                verdict=Verdict(cert["verdict"]),
                tol=float(inputs.get("tol", DEFAULT_TOL)),
                singular_value_margin=math.inf if margin is None else float(margin),
            ),
            rng_seed=int(inputs.get("rng_seed", 0)),
            tol=float(inputs.get("tol", DEFAULT_TOL)),
        )


@dataclass
class TraceReport:
    checks: Dict[str, bool]
    measured: StageBounds
    certificate: CommutantResult

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": dict(self.checks),
            "measured": self.measured.to_dict(),
            "certificate": self.certificate.summary(),
        }


@dataclass
class FactorPerturbation:
    """Perturbation carried out inside the factor M_k (x) I_m"""
    inner: PerturbationTrace
    T: CMatrix
    T3: CMatrix
    distance: float
    certificate: CommutantResult
    k: int
    m: int


# -----------------------------
# Stage 1: clustering
# -----------------------------
def _cluster_eigensystem(w: np.ndarray, v: np.ndarray, radius: float) -> SpectralClustering:
    """Greedy left-to-right grouping of ascending eigenvalues (w) with eigenvector columns v"""
    effective = radius * (1.0 - RADIUS_SLACK)
    starts = [0]
    for i in range(1, w.size):
        if w[i] - w[starts[-1]] >= effective:
            starts.append(i)
    stops = starts[1:] + [w.size]

    reps, bases, members = [], [], []
    error = 0.0
    for lo, hi in zip(starts, stops):
        reps.append(float(w[lo]))
        bases.append(v[:, lo:hi])
        members.append(w[lo:hi])
        error = max(error, float(w[hi - 1] - w[lo]))
    projections = [Projection.from_basis(b) for b in bases]
    return SpectralClustering(reps=reps, projections=projections, approx_error=error,
                              bases=bases, members=members)


def cluster_spectrum(a: CMatrix, radius: float) -> SpectralClustering:
    """
    Cluster the spectrum of a Hermitian matrix

    Every eigenvalue lies strictly within `radius` of its cluster's representative
    (the smallest member), so ||A - sum_j rep_j E_j|| < radius.

    Raises:
        NotHermitian: if A is not Hermitian within the band
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    w, v = eigh(a)
    clustering = _cluster_eigensystem(w, v, radius)
    logger.debug(f"Clustered {w.size} eigenvalues into {len(clustering.reps)} groups "
                 f"(radius {radius:.3e}, error {clustering.approx_error:.3e})")
    return clustering


def spread_labels(reps: List[float], counts: List[int], epsilon: float) -> List[List[float]]:
    """lambda_ij = lambda_i + (j-1) s_i, s_i = min(eps/(16 m_i), gap_i/(4 m_i))"""
    labels = []
    for i, (lam, m) in enumerate(zip(reps, counts)):
        neighbours = []
        if i > 0:
            neighbours.append(lam - reps[i - 1])
        if i + 1 < len(reps):
            neighbours.append(reps[i + 1] - lam)
        gap = min(neighbours) if neighbours else math.inf
        step = min(epsilon / (16 * m), gap / (4 * m))
        labels.append([lam + j * step for j in range(m)])
    return labels


def refine_decomposition(t: CMatrix, epsilon: float) -> Tuple[RefinedDecomposition, CMatrix]:
    """
    Build E_i (clusters of A) and F_ij (clusters of each E_i B E_i), and T1 = A1 + iB1

    A1 = sum_i lambda_i E_i; B1 keeps every off-diagonal block E_i B E_j and replaces
    each diagonal block by sum_j eta_ij F_ij.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    t = as_cmatrix(t)
    a, b = hermitian_parts(t)
    radius = epsilon / 4

    outer = cluster_spectrum(a, radius)
    inner: List[SpectralClustering] = []
    for basis in outer.bases:
        w, v = eigh(adjoint(basis) @ b @ basis)
        inner.append(_cluster_eigensystem(w, basis @ v, radius))

    rotation = np.hstack([col for c in inner for col in c.bases])
    blocks = BlockIndex.from_sizes([size for c in inner for size in c.sizes])
    dec = RefinedDecomposition(
        epsilon=epsilon,
        outer=outer,
        inner=inner,
        relabeled=spread_labels(outer.reps, [len(c.reps) for c in inner], epsilon),
        rotation=rotation,
        blocks=blocks,
    )

    a1 = symmetrize(outer.approximant())
    b_rot = dec.to_block(b)
    outer_idx = dec.outer_blocks
    for i, c in enumerate(inner):
        diagonal = np.concatenate([np.full(size, eta) for eta, size in zip(c.reps, c.sizes)])
        b_rot[outer_idx.slice(i), outer_idx.slice(i)] = np.diag(diagonal)
    b1 = symmetrize(dec.from_block(b_rot))
    t1 = a1 + 1j * b1

    logger.info(
        f"Stage 1: {len(outer.reps)} outer / {blocks.count} inner blocks, "
        f"||A-A1||={operator_norm(a - a1):.3e} ||B-B1||={operator_norm(b - b1):.3e} "
        f"||T-T1||={operator_norm(t - t1):.3e} (< {epsilon / 2:.3e})"
    )
    return dec, t1


# -----------------------------
# Stage 2: relabeling and off-diagonal fill
# -----------------------------
def relabel_eigenvalues(dec: RefinedDecomposition, epsilon: float) -> CMatrix:
    """A2 = sum_ij lambda_ij F_ij with strictly increasing labels within eps/8 of lambda_i"""
    labels = spread_labels(dec.outer.reps, dec.inner_counts, epsilon)
    flat = [lam for row in labels for lam in row]
    if any(b <= a for a, b in zip(flat, flat[1:])):
        raise DegenerateGap(f"Relabeled eigenvalues are not strictly increasing: {flat}")
    diagonal = np.concatenate([np.full(size, lam) for lam, size in zip(flat, dec.blocks.sizes)])
    a2 = symmetrize(dec.from_block(np.diag(diagonal).astype(np.complex128)))
    logger.debug(f"Relabeled {len(flat)} blocks, ||A1-A2||={operator_norm(dec.outer.approximant() - a2):.3e}")
    return a2


def fill_offdiagonal(dec: RefinedDecomposition, b1: CMatrix, epsilon: float, rng_seed: int = 0) -> CMatrix:
    """
    B2 = B1 plus a Hermitian corner entry in every (numerically) zero off-diagonal block pair

    A pair counts as zero below block_floor = eps / (32 P), P the number of block pairs;
    each of the z filled pairs gets |c| = eps / (16 z) with a seeded phase.
    """
    b1 = as_cmatrix(b1)
    idx = dec.blocks
    k = idx.count
    pairs = k * (k - 1) // 2
    if pairs == 0:
        return b1.copy()

    block_floor = epsilon / (32 * pairs)
    norms = offdiagonal_block_norms(dec.to_block(b1), idx)
    zero_pairs = [(a, b) for a in range(k) for b in range(a + 1, k) if norms[a, b] < block_floor]
    if not zero_pairs:
        logger.debug("Stage 2: every off-diagonal block already nonzero")
        return b1.copy()

    gamma = epsilon / (16 * len(zero_pairs))
    phases = np.exp(2j * np.pi * np.random.default_rng(rng_seed).random(len(zero_pairs)))
    fill = np.zeros_like(b1)
    for (a, b), phase in zip(zero_pairs, phases):
        c = gamma * phase
        fill[idx.offsets[a], idx.offsets[b]] += c
        fill[idx.offsets[b], idx.offsets[a]] += np.conj(c)
    b2 = b1 + symmetrize(dec.from_block(fill))

    filled_norms = offdiagonal_block_norms(dec.to_block(b2), idx)
    weakest = min(filled_norms[a, b] for a in range(k) for b in range(a + 1, k))
    if weakest < block_floor:
        logger.warning(f"Off-diagonal block norm {weakest:.3e} fell below floor {block_floor:.3e}")
    logger.info(f"Stage 2: filled {len(zero_pairs)}/{pairs} block pairs, "
                f"||B2-B1||={operator_norm(b2 - b1):.3e} (< {epsilon / 8:.3e})")
    return b2


# -----------------------------
# Stage 3: generator pairs
# -----------------------------
def build_generator_pair(d: int) -> GeneratorPair:
    """X = diag(1..d)/d and Y = (J_d + d I)/(2d); distinct diagonal plus all-nonzero Y forces scalars"""
    if d < 1:
        raise ValueError(f"Generator block dimension must be positive, got {d}")
    x = np.diag(np.arange(1, d + 1) / d).astype(np.complex128)
    y = ((np.ones((d, d)) + d * np.eye(d)) / (2 * d)).astype(np.complex128)
    return GeneratorPair(X=x, Y=y, d=d)


def generator_pair_certificate(pair: GeneratorPair, tol: float = DEFAULT_TOL) -> CommutantResult:
    return joint_commutant([pair.X, pair.Y], tol)


def inject_generators(dec: RefinedDecomposition, a2: CMatrix, b2: CMatrix, epsilon: float) -> Tuple[CMatrix, float]:
    """
    T3 = (A2 + delta X) + i (B2 + delta Y) with block-diagonal generator pairs

    delta = min(g/2, eps/16), g the smallest gap between consecutive labels, so the
    block spectra of A3 sit in disjoint intervals (lambda_ij, lambda_ij + delta].

    Raises:
        DegenerateGap: if labels coincide or the measured block spectra overlap
    """
    idx = dec.blocks
    a_rot = dec.to_block(a2)
    labels = [float(np.mean(np.diag(idx.block(a_rot, a, a)).real)) for a in range(idx.count)]
    gaps = np.diff(labels)
    g = float(gaps.min()) if gaps.size else math.inf
    if g <= 0:
        raise DegenerateGap(f"Consecutive block labels coincide (minimal gap {g:.3e})")
    delta = min(g / 2, epsilon / 16)

    pairs = [build_generator_pair(d) for d in idx.sizes]
    x = dec.from_block(block_assemble([p.X for p in pairs]))
    y = dec.from_block(block_assemble([p.Y for p in pairs]))
    a3 = symmetrize(a2 + delta * x)
    b3 = symmetrize(b2 + delta * y)
    t3 = a3 + 1j * b3

    a3_rot = dec.to_block(a3)
    intervals = []
    for a in range(idx.count):
        w = np.linalg.eigvalsh(symmetrize(idx.block(a3_rot, a, a)))
        intervals.append((w[0], w[-1]))
    for (lo1, hi1), (lo2, hi2) in zip(intervals, intervals[1:]):
        if hi1 >= lo2:
            raise DegenerateGap(f"Block spectra overlap: [{lo1:.6g}, {hi1:.6g}] vs [{lo2:.6g}, {hi2:.6g}]")

    step = operator_norm((a2 + 1j * b2) - t3)
    logger.info(f"Stage 3: delta={delta:.3e} over {idx.count} blocks, ||T2-T3||={step:.3e} (< {epsilon / 4:.3e})")
    return t3, delta


# -----------------------------
# Full pipeline
# -----------------------------
def measure_bounds(t: CMatrix, t1: CMatrix, t2: CMatrix, t3: CMatrix) -> StageBounds:
    return StageBounds(
        t_t1=operator_norm(t - t1),
        t_t2=operator_norm(t - t2),
        t2_t3=operator_norm(t2 - t3),
        t_t3=operator_norm(t - t3),
    )


def perturb_to_irreducible(
    t: CMatrix,
    epsilon: float,
    rng_seed: int = 0,
    tol: float = DEFAULT_TOL,
    robust_margin: float = ROBUST_MARGIN,
) -> PerturbationTrace:
    """
    Irreducible T3 with ||T - T3|| < epsilon, plus the trace of every stage

    Inputs already irreducible with a singular value margin above `robust_margin`
    are returned unchanged (all distances zero).

    Raises:
        CertificateFailed: if T3 is not certified Irreducible or a stage bound is violated
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    t = as_cmatrix(t)

    initial = commutant_basis(t, tol)
    if initial.is_irreducible and initial.singular_value_margin > robust_margin:
        logger.info(f"Input already irreducible (margin {initial.singular_value_margin:.3e}); returning it unchanged")
        return PerturbationTrace(
            T=t, epsilon=epsilon, decomposition=None,
            T1=t.copy(), T2=t.copy(), T3=t.copy(), delta=0.0,
            bounds=StageBounds(0.0, 0.0, 0.0, 0.0),
            certificate=initial, rng_seed=rng_seed, tol=tol,
        )

    dec, t1 = refine_decomposition(t, epsilon)
    _, b1 = hermitian_parts(t1)
    a2 = relabel_eigenvalues(dec, epsilon)
    b2 = fill_offdiagonal(dec, b1, epsilon, rng_seed)
    t2 = a2 + 1j * b2
    t3, delta = inject_generators(dec, a2, b2, epsilon)

    bounds = measure_bounds(t, t1, t2, t3)
    certificate = commutant_basis(t3, tol)
    trace = PerturbationTrace(
        T=t, epsilon=epsilon, decomposition=dec,
        T1=t1, T2=t2, T3=t3, delta=delta,
        bounds=bounds, certificate=certificate, rng_seed=rng_seed, tol=tol,
    )

    violated = bounds.violations(epsilon)
    if violated:
        raise CertificateFailed(f"Stage bounds violated: {violated} ({bounds.to_dict()}, eps={epsilon:.6g})")
    if not certificate.is_irreducible:
        raise CertificateFailed(
            f"T3 certificate is {certificate.verdict.value} (commutant dim {certificate.dimension}, "
            f"margin {certificate.singular_value_margin:.3e})"
        )
    logger.info(f"Perturbed to irreducible: ||T-T3||={bounds.t_t3:.3e} < eps={epsilon:.3e}")
    return trace


def verify_trace(trace: PerturbationTrace) -> TraceReport:
    """Re-measure every bound from scratch and re-run the commutant certificate"""
    eps = trace.epsilon
    measured = measure_bounds(trace.T, trace.T1, trace.T2, trace.T3)
    certificate = commutant_basis(trace.T3, trace.tol)
    limits = StageBounds.limits(eps)
    values = measured.to_dict()
    checks = {name: values[name] < limit for name, limit in limits.items()}
    checks["certificate"] = certificate.is_irreducible
    report = TraceReport(checks=checks, measured=measured, certificate=certificate)
    if not report.passed:
        failed = [name for name, ok in checks.items() if not ok]
        logger.warning(f"Trace verification failed: {failed}")
    return report


def perturb_within_factor(
    t: CMatrix,
    k: int,
    m: int,
    epsilon: float,
    rng_seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> FactorPerturbation:
    """
    Perturb T in the factor M_k (x) I_m to an operator irreducible relative to that factor

    Raises:
        NotInAlgebra: if T is not of the form T_k (x) I_m
        CertificateFailed: if the relative certificate or the distance bound fails
    """
    t = as_cmatrix(t)
    if t.shape[0] != k * m:
        raise NotInAlgebra(f"Operator of dim {t.shape[0]} cannot lie in M_{k} (x) I_{m}")
    factor = factor_embedding(k, m)
    q = factor.validate(tol)
    if span_residual(q, t) > tol * (1.0 + np.linalg.norm(t)):
        raise NotInAlgebra(f"Operator is not an element of {factor.label}")

    compressed = np.einsum('iaja->ij', t.reshape(k, m, k, m)) / m
    inner = perturb_to_irreducible(compressed, epsilon, rng_seed, tol)
    t3 = np.kron(inner.T3, np.eye(m))
    distance = operator_norm(t - t3)
    certificate = relative_commutant(t3, factor, tol)
    if not distance < epsilon or not certificate.is_irreducible:
        raise CertificateFailed(
            f"Factor perturbation failed: distance {distance:.3e} (eps {epsilon:.3e}), "
            f"relative verdict {certificate.verdict.value}"
        )
    return FactorPerturbation(inner=inner, T=t, T3=t3, distance=distance, certificate=certificate, k=k, m=m)


def write_trace(path, trace: PerturbationTrace) -> None:
    write_json(path, trace.to_dict())


def read_trace(path) -> PerturbationTrace:
    data = read_json(path)
    try:
        return PerturbationTrace.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidMatrix(f"{path} is not a perturbation trace: {e}") from e
