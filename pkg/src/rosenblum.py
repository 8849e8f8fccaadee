"""
Rosenblum operator X -> AX - XB and the Sylvester equation AX - XB = C
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as spla

from errors import NotHermitian, ShapeMismatch, SpectraOverlap
from linalg_core import DEFAULT_TOL, CMatrix, as_cmatrix, hermitian_defect, hermitian_tol, operator_norm, svd_kernel

logger = logging.getLogger(__name__)

GAP_FLOOR_RTOL = 1e-8


def _as_rect(c, name: str) -> np.ndarray:
    c = np.array(c, dtype=np.complex128)
    if c.ndim != 2:
        raise ShapeMismatch(f"{name} must be a 2-D matrix, got shape {c.shape}")
    return c


def spectrum(m: CMatrix) -> np.ndarray:
    """Eigenvalues of a general square matrix, computed after balancing"""
    balanced, _ = spla.matrix_balance(as_cmatrix(m))
    return spla.eigvals(balanced)


def spectral_gap(a: CMatrix, b: CMatrix) -> float:
    """min |alpha - beta| over alpha in sigma(A), beta in sigma(B)"""
    return float(np.min(np.abs(np.subtract.outer(spectrum(a), spectrum(b)))))


def gap_floor(a: CMatrix, b: CMatrix) -> float:
    return GAP_FLOOR_RTOL * (1.0 + operator_norm(a) + operator_norm(b))


@dataclass
class SylvesterProblem:
    """AX - XB = C with A (m x m), B (k x k), C (m x k)"""
    A: CMatrix
    B: CMatrix
    C: np.ndarray
    spectral_gap: Optional[float] = None

    def __post_init__(self):
        self.A = as_cmatrix(self.A)
        self.B = as_cmatrix(self.B)
        self.C = _as_rect(self.C, "C")
        _check_shapes(self.A, self.B, self.C)
        if self.spectral_gap is None:
            self.spectral_gap = spectral_gap(self.A, self.B)

    @property
    def gap_floor(self) -> float:
        return gap_floor(self.A, self.B)


def _check_shapes(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> None:
    if x.shape != (a.shape[0], b.shape[0]):
        raise ShapeMismatch(
            f"Expected X of shape {(a.shape[0], b.shape[0])} for A {a.shape} and B {b.shape}, got {x.shape}"
        )


def rosenblum_matrix(a: CMatrix, b: CMatrix) -> np.ndarray:
    """(mk x mk) matrix of X -> AX - XB on row-major vec(X)"""
    m, k = a.shape[0], b.shape[0]
    return np.kron(a, np.eye(k)) - np.kron(np.eye(m), b.T)


def rosenblum_apply(a: CMatrix, b: CMatrix, x) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    x = _as_rect(x, "X")
    _check_shapes(a, b, x)
    return a @ x - x @ b


def residual_norm(a: CMatrix, b: CMatrix, x: np.ndarray, c: np.ndarray) -> float:
    return operator_norm(a @ x - x @ b - c)


def sylvester_solve(p: SylvesterProblem, tol: float = DEFAULT_TOL, method: str = "dense") -> np.ndarray:
    """
    Unique solution of AX - XB = C for disjoint spectra

    Args:
        p: the problem (spectral gap precomputed)
        tol: relative residual tolerance used for the post-solve check
        method: "dense" (linearized solve) or "schur" (Bartels-Stewart)

    Raises:
        SpectraOverlap: if the spectral gap is at or below the gap floor
    """
    if p.spectral_gap <= p.gap_floor:
        raise SpectraOverlap(
            f"Spectral gap {p.spectral_gap:.3e} <= floor {p.gap_floor:.3e}; "
            "AX - XB = C may be singular"
        )

    m, k = p.C.shape
    if method == "dense":
        x = spla.solve(rosenblum_matrix(p.A, p.B), p.C.reshape(-1)).reshape(m, k)
    elif method == "schur":
        x = spla.solve_sylvester(p.A, -p.B, p.C)
    else:
        raise ValueError(f"Unknown Sylvester backend: {method}")

    residual = residual_norm(p.A, p.B, x, p.C)
    bound = tol * (operator_norm(p.A) + operator_norm(p.B)) * operator_norm(x) + tol * operator_norm(p.C)
    if residual > bound:
        logger.warning(f"Sylvester residual {residual:.3e} exceeds bound {bound:.3e} (gap {p.spectral_gap:.3e})")
    logger.debug(f"Sylvester solve method={method} residual={residual:.3e} gap={p.spectral_gap:.3e}")
    return x


def rosenblum_kernel_dim(a: CMatrix, b: CMatrix, tol: float = DEFAULT_TOL) -> int:
    """dim {X : AX = XB}"""
    a, b = as_cmatrix(a), as_cmatrix(b)
    return svd_kernel(rosenblum_matrix(a, b), tol).dimension


def conditioning_sweep(
    a: CMatrix,
    b: CMatrix,
    c: np.ndarray,
    gaps: Sequence[float] = (1.0, 0.1, 0.01, 0.001),
    tol: float = DEFAULT_TOL,
) -> List[Dict[str, float]]:
    """
    Solve AX - XB' = C while B' = B + shift*I is moved so the Hermitian spectra sit `gap` apart

    Returns one record per gap with the residual and ||X||; nothing is asserted.
    """
    a, b = as_cmatrix(a), as_cmatrix(b)
    for name, m in (("A", a), ("B", b)):
        if hermitian_defect(m) > hermitian_tol(m):
            raise NotHermitian(f"{name} must be Hermitian for a conditioning sweep")

    top_a = float(np.linalg.eigvalsh(a)[-1])
    bottom_b = float(np.linalg.eigvalsh(b)[0])
    records = []
    for gap in gaps:
        shifted = b + (top_a - bottom_b + gap) * np.eye(b.shape[0])
        problem = SylvesterProblem(a, shifted, c)
        x = sylvester_solve(problem, tol)
        record = {
            "gap": float(gap),
            "measured_gap": float(problem.spectral_gap),
            "residual": residual_norm(a, shifted, x, problem.C),
            "solution_norm": operator_norm(x),
        }
        logger.info(
            f"gap={gap:.0e} residual={record['residual']:.3e} ||X||={record['solution_norm']:.3e}"
        )
        records.append(record)
    return records
