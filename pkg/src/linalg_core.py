"""
Dense complex matrix primitives
- Hermitian/anti-Hermitian split, operator norm
- Hermitian eigendecomposition with reproducible eigenvector phases
- SVD-based numerical kernels (relative threshold)
- Projection and block-index value types
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as spla

from errors import InvalidMatrix, NotHermitian

logger = logging.getLogger(__name__)

# n x n complex128 ndarray; every public function returns fresh arrays
CMatrix = np.ndarray

DEFAULT_TOL = 1e-10
HERMITIAN_RTOL = 1e-10
PROJECTION_TOL = 1e-10

# first eigenvector component above this magnitude is rotated to the positive real axis
_PHASE_CUTOFF = 1e-10


# -----------------------------
# Validation
# -----------------------------
def as_cmatrix(x) -> CMatrix:
    """Coerce to a square, finite complex128 matrix of dimension >= 1"""
    try:
        m = np.array(x, dtype=np.complex128)
    except (TypeError, ValueError) as e:
        raise InvalidMatrix(f"Cannot interpret input as a complex matrix: {e}") from e
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"Expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise InvalidMatrix("Matrix dimension must be at least 1")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("Matrix has NaN or infinite entries")
    return m


def adjoint(m: np.ndarray) -> np.ndarray:
    return m.conj().T


# -----------------------------
# Norms and the A + iB split
# -----------------------------
def operator_norm(m: np.ndarray) -> float:
    """Largest singular value"""
    m = np.asarray(m, dtype=np.complex128)
    if m.size == 0:
        return 0.0
    return float(spla.svdvals(m)[0])


def hermitian_defect(m: np.ndarray) -> float:
    return operator_norm(m - adjoint(m))


def hermitian_tol(a: np.ndarray) -> float:
    return HERMITIAN_RTOL * (1.0 + operator_norm(a))


def symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + adjoint(m)) / 2


def hermitian_parts(t: CMatrix) -> Tuple[CMatrix, CMatrix]:
    """
    Split T = A + iB with A, B exactly Hermitian

    Returns:
        (A, B) with A = (T + T*)/2 and B = (T - T*)/(2i)
    """
    t = as_cmatrix(t)
    a = symmetrize(t)
    b = symmetrize((t - adjoint(t)) / 2j)
    return a, b


# -----------------------------
# Hermitian eigendecomposition
# -----------------------------
def eigh(a: CMatrix) -> Tuple[np.ndarray, CMatrix]:
    """
    Eigendecomposition of a Hermitian matrix

    Eigenvalues come back ascending; each eigenvector column is rotated so its
    first non-negligible component is real and positive.

    Raises:
        NotHermitian: if ||A - A*|| exceeds 1e-10 * (1 + ||A||)
    """
    a = as_cmatrix(a)
    defect = hermitian_defect(a)
    if defect > hermitian_tol(a):
        raise NotHermitian(f"||A - A*|| = {defect:.3e} exceeds Hermitian band {hermitian_tol(a):.3e}")

    w, v = spla.eigh(symmetrize(a))
    mask = np.abs(v) > _PHASE_CUTOFF
    first = mask.argmax(axis=0)
    pivots = v[first, np.arange(v.shape[1])]
    v = v * (pivots.conj() / np.abs(pivots))
    return w, v


# -----------------------------
# Numerical kernels
# -----------------------------
@dataclass
class KernelSplit:
    """SVD of a (possibly rectangular) matrix split at a relative threshold"""
    basis: np.ndarray                 # columns: orthonormal kernel vectors
    singular_values: np.ndarray       # descending, zero-padded to the column count
    threshold: float                  # tol * sigma_max
    rank: int

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0]) if self.singular_values.size else 0.0


def svd_kernel(m: np.ndarray, tol: float = DEFAULT_TOL, min_dimension: int = 0) -> KernelSplit:
    """
    Split the right singular vectors of M into range and kernel parts

    Singular values <= tol * sigma_max count as zero. At least `min_dimension`
    directions are always assigned to the kernel.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    m = np.asarray(m, dtype=np.complex128)
    rows, cols = m.shape
    _, s, vh = spla.svd(m, full_matrices=rows < cols)

    padded = np.zeros(cols)
    padded[:s.size] = s
    threshold = tol * (padded[0] if cols else 0.0)
    rank = int(np.count_nonzero(padded > threshold))
    rank = min(rank, cols - min_dimension)
    basis = vh[rank:].conj().T
    logger.debug(f"svd_kernel shape={m.shape} rank={rank} threshold={threshold:.3e}")
    return KernelSplit(basis=basis, singular_values=padded, threshold=threshold, rank=rank)


def null_space(m: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal kernel basis (columns) of a rectangular complex matrix"""
    return svd_kernel(m, tol).basis


# -----------------------------
# Value types
# -----------------------------
@dataclass(eq=False)
class Projection:
    """Hermitian idempotent within tolerance"""
    matrix: CMatrix
    tol: float = PROJECTION_TOL

    def __post_init__(self):
        self.matrix = as_cmatrix(self.matrix)
        herm, idem = self.defects()
        if herm > self.tol or idem > self.tol:
            raise ValueError(
                f"Not a projection within tol={self.tol:.1e}: "
                f"||P-P*||={herm:.3e}, ||P^2-P||={idem:.3e}"
            )

    @classmethod
    def from_basis(cls, basis: np.ndarray, tol: float = PROJECTION_TOL) -> "Projection":
        """Orthogonal projection onto the span of orthonormal columns"""
        return cls(symmetrize(basis @ adjoint(basis)), tol)

    def defects(self) -> Tuple[float, float]:
        p = self.matrix
        return hermitian_defect(p), operator_norm(p @ p - p)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


@dataclass(frozen=True)
class BlockIndex:
    """Contiguous partition of 0..n into blocks"""
    offsets: Tuple[int, ...]

    def __post_init__(self):
        offs = tuple(int(o) for o in self.offsets)
        object.__setattr__(self, 'offsets', offs)
        if len(offs) < 2 or offs[0] != 0:
            raise ValueError(f"Block offsets must start at 0 and contain a block: {offs}")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise ValueError(f"Block offsets must be strictly increasing: {offs}")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockIndex":
        return cls(tuple(np.concatenate([[0], np.cumsum(sizes)]).astype(int)))

    @property
    def count(self) -> int:
        return len(self.offsets) - 1

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @property
    def sizes(self) -> List[int]:
        return [b - a for a, b in zip(self.offsets, self.offsets[1:])]

    def slice(self, a: int) -> slice:
        return slice(self.offsets[a], self.offsets[a + 1])

    def block(self, m: np.ndarray, a: int, b: int) -> np.ndarray:
        return m[self.slice(a), self.slice(b)]


def block_assemble(blocks: Sequence[np.ndarray]) -> CMatrix:
    """Block-diagonal matrix from square blocks"""
    return np.asarray(spla.block_diag(*blocks), dtype=np.complex128)


def offdiagonal_block_norms(m: np.ndarray, index: BlockIndex) -> np.ndarray:
    """k x k table of ||m[a-block, b-block]|| with zero diagonal"""
    k = index.count
    norms = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            if a != b:
                norms[a, b] = operator_norm(index.block(m, a, b))
    return norms
