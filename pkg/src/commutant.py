"""
Commutants inside finite-dimensional factors
Computes W*(S)' (optionally relative to a *-subalgebra), decides irreducibility and
extracts a nontrivial reducing projection when one exists.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from errors import DegenerateCommutant, NotInAlgebra
from linalg_core import (
    DEFAULT_TOL,
    CMatrix,
    KernelSplit,
    Projection,
    adjoint,
    as_cmatrix,
    eigh,
    operator_norm,
    svd_kernel,
    symmetrize,
)
from matrix_io import finite_or_none, matrix_from_json, matrix_to_json, read_json

logger = logging.getLogger(__name__)

# singular values inside [low * tau, high * tau] make the rank call ambiguous
BORDERLINE_LOW = 0.1
BORDERLINE_HIGH = 10.0

# candidate eigenvalue cuts for reducing projections must exceed this fraction of the spread
_CUT_GAP_FRACTION = 1e-3


class Verdict(str, Enum):
    IRREDUCIBLE = "Irreducible"
    REDUCIBLE = "Reducible"
    BORDERLINE = "Borderline"


@dataclass
class CommutantResult:
    """Basis, dimension and irreducibility verdict of a commutant"""
    dimension: int
    basis: List[CMatrix]
    verdict: Verdict
    tol: float
    singular_value_margin: float
    threshold: float = 0.0
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def is_irreducible(self) -> bool:
        return self.verdict == Verdict.IRREDUCIBLE

    def summary(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "verdict": self.verdict.value,
            "margin": finite_or_none(self.singular_value_margin),
            "tol": self.tol,
        }


@dataclass
class SubalgebraSpec:
    """*-closed subspace of M_n given by spanning generators"""
    generators: List[CMatrix]
    label: str = ""

    def __post_init__(self):
        if not self.generators:
            raise NotInAlgebra(f"Subalgebra '{self.label}' has no generators")
        self.generators = [as_cmatrix(g) for g in self.generators]
        dims = {g.shape[0] for g in self.generators}
        if len(dims) != 1:
            raise NotInAlgebra(f"Generators of '{self.label}' have mixed dimensions {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    def span_basis(self, tol: float = DEFAULT_TOL) -> np.ndarray:
        """Orthonormal columns spanning the vectorized generators"""
        g = np.column_stack([m.reshape(-1) for m in self.generators])
        u, s, _ = np.linalg.svd(g, full_matrices=False)
        if s[0] == 0:
            raise NotInAlgebra(f"Subalgebra '{self.label}' is spanned by zero matrices")
        r = int(np.count_nonzero(s > tol * s[0]))
        return u[:, :r]

    def validate(self, tol: float = DEFAULT_TOL) -> np.ndarray:
        """Check *-closure and unitality; returns the span basis"""
        q = self.span_basis(tol)
        for i, g in enumerate(self.generators):
            if span_residual(q, adjoint(g)) > tol * (1.0 + np.linalg.norm(g)):
                raise NotInAlgebra(f"Adjoint of generator {i} of '{self.label}' is outside the span")
        identity = np.eye(self.dim)
        if span_residual(q, identity) > tol * (1.0 + math.sqrt(self.dim)):
            raise NotInAlgebra(f"Subalgebra '{self.label}' does not contain the identity")
        return q

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "generators": [matrix_to_json(g) for g in self.generators]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SubalgebraSpec":
        if "generators" not in data:
            raise NotInAlgebra("SubalgebraSpec JSON needs a 'generators' list")
        return cls(
            generators=[matrix_from_json(g) for g in data["generators"]],
            label=str(data.get("label", "")),
        )


def span_residual(q: np.ndarray, m: np.ndarray) -> float:
    v = m.reshape(-1)
    return float(np.linalg.norm(v - q @ (q.conj().T @ v)))


def factor_embedding(k: int, m: int) -> SubalgebraSpec:
    """The factor M_k (x) I_m inside M_{km}, spanned by matrix units E_ab (x) I_m"""
    if k < 1 or m < 1:
        raise ValueError(f"Factor sizes must be positive, got k={k}, m={m}")
    eye_m = np.eye(m)
    generators = []
    for a in range(k):
        for b in range(k):
            unit = np.zeros((k, k))
            unit[a, b] = 1.0
            generators.append(np.kron(unit, eye_m))
    return SubalgebraSpec(generators=generators, label=f"M_{k} (x) I_{m}")


# -----------------------------
# Linearized commutation
# -----------------------------
def commutation_operator(s: CMatrix) -> np.ndarray:
    """Matrix of X -> SX - XS acting on row-major vec(X)"""
    n = s.shape[0]
    eye = np.eye(n)
    return np.kron(s, eye) - np.kron(eye, s.T)


def trace_inner(x: CMatrix, y: CMatrix) -> complex:
    """Normalized trace inner product tr(X* Y) / n"""
    return complex(np.vdot(x, y) / x.shape[0])


def _classify(split: KernelSplit, dimension: int):
    s = split.singular_values
    tau = split.threshold
    if split.sigma_max == 0.0:
        borderline = False
        margin = math.inf
    else:
        band = (s >= BORDERLINE_LOW * tau) & (s <= BORDERLINE_HIGH * tau)
        borderline = bool(np.any(band))
        discarded = s[split.rank:]
        largest_discarded = max(float(discarded.max()) if discarded.size else 0.0,
                                np.finfo(float).eps * split.sigma_max)
        margin = float(s[split.rank - 1]) / largest_discarded if split.rank > 0 else math.inf

    if borderline:
        verdict = Verdict.BORDERLINE
    elif dimension == 1:
        verdict = Verdict.IRREDUCIBLE
    else:
        verdict = Verdict.REDUCIBLE
    return verdict, margin


def _kernel_result(system: np.ndarray, lift: Optional[np.ndarray], n: int, tol: float) -> CommutantResult:
    split = svd_kernel(system, tol, min_dimension=1)
    vectors = split.basis if lift is None else lift @ split.basis
    scale = math.sqrt(n)
    basis = [scale * vectors[:, j].reshape(n, n) for j in range(vectors.shape[1])]
    verdict, margin = _classify(split, len(basis))
    if verdict == Verdict.BORDERLINE:
        logger.warning(f"Borderline commutant rank decision (threshold {split.threshold:.3e})")
    logger.debug(f"Commutant dim={len(basis)} verdict={verdict.value} margin={margin:.3e}")
    return CommutantResult(
        dimension=len(basis),
        basis=basis,
        verdict=verdict,
        tol=tol,
        singular_value_margin=margin,
        threshold=split.threshold,
        singular_values=split.singular_values,
    )


def joint_commutant(generators: Sequence[CMatrix], tol: float = DEFAULT_TOL) -> CommutantResult:
    """Commutant {X : GX = XG for every generator G} inside M_n"""
    mats = [as_cmatrix(g) for g in generators]
    n = mats[0].shape[0]
    system = np.vstack([commutation_operator(g) for g in mats])
    return _kernel_result(system, None, n, tol)


def commutant_basis(s: CMatrix, tol: float = DEFAULT_TOL) -> CommutantResult:
    """W*(S)' = {X : SX = XS and S*X = XS*} as a joint numerical kernel"""
    s = as_cmatrix(s)
    return joint_commutant([s, adjoint(s)], tol)


def is_irreducible(s: CMatrix, tol: float = DEFAULT_TOL) -> Verdict:
    return commutant_basis(s, tol).verdict


def relative_commutant(s: CMatrix, amb: SubalgebraSpec, tol: float = DEFAULT_TOL) -> CommutantResult:
    """
    W*(S)' intersected with the span of amb.generators

    Raises:
        NotInAlgebra: if S is not in the ambient span, or the ambient is not a unital *-subspace
    """
    s = as_cmatrix(s)
    if s.shape[0] != amb.dim:
        raise NotInAlgebra(f"S has dim {s.shape[0]} but '{amb.label}' lives in M_{amb.dim}")
    q = amb.validate(tol)
    if span_residual(q, s) > tol * (1.0 + np.linalg.norm(s)):
        raise NotInAlgebra(f"Operator is not an element of '{amb.label}'")

    system = np.vstack([commutation_operator(s), commutation_operator(adjoint(s))]) @ q
    result = _kernel_result(system, q, s.shape[0], tol)
    logger.info(f"Relative commutant in '{amb.label}': dim={result.dimension} ({result.verdict.value})")
    return result


# -----------------------------
# Reducing projections
# -----------------------------
def _least_scalar_hermitian(basis: Sequence[CMatrix]):
    best, best_spread = None, -1.0
    for x in basis:
        for h in (x + adjoint(x), 1j * (x - adjoint(x))):
            h = symmetrize(h)
            w = np.linalg.eigvalsh(h)
            spread = float(w[-1] - w[0])
            if spread > best_spread:
                best, best_spread = h, spread
    return best, best_spread


def reducing_projection(s: CMatrix, tol: float = DEFAULT_TOL) -> Optional[Projection]:
    """
    Nontrivial projection commuting with S, or None when the commutant is scalar

    The least scalar Hermitian commutant element is split at the spectral gap
    nearest its median eigenvalue.

    Raises:
        DegenerateCommutant: if the commutant has dimension >= 2 yet every Hermitian element is scalar
    """
    s = as_cmatrix(s)
    result = commutant_basis(s, tol)
    if result.dimension < 2:
        return None

    h, spread = _least_scalar_hermitian(result.basis)
    if spread <= math.sqrt(tol) * max(1.0, operator_norm(h)):
        raise DegenerateCommutant(
            f"Commutant has dimension {result.dimension} but all Hermitian elements are scalar "
            f"(spread {spread:.3e}); tolerance {tol:.1e} is inconsistent"
        )

    w, v = eigh(h)
    n = w.size
    cuts = np.flatnonzero(np.diff(w) > _CUT_GAP_FRACTION * spread)
    cut = int(cuts[np.argmin(np.abs(cuts + 1 - n / 2))])
    projection = Projection.from_basis(v[:, cut + 1:], tol)

    residual = operator_norm(projection.matrix @ s - s @ projection.matrix)
    if residual > tol * operator_norm(s):
        logger.warning(f"Reducing projection residual {residual:.3e} exceeds tol * ||S||")
    logger.info(f"Reducing projection of rank {projection.rank} (commutant dim {result.dimension})")
    return projection


def read_subalgebra(path) -> SubalgebraSpec:
    data = read_json(path)
    if not isinstance(data, dict):
        raise NotInAlgebra(f"{path} must hold a SubalgebraSpec JSON object")
    return SubalgebraSpec.from_dict(data)
