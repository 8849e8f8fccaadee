"""
Seeded random matrix ensembles for the density experiment
"""

import logging

import numpy as np

from linalg_core import CMatrix, adjoint, block_assemble, symmetrize

logger = logging.getLogger(__name__)

ENSEMBLES = ("ginibre", "block_diagonal_conjugated", "hermitian")


def ginibre(rng: np.random.Generator, n: int) -> CMatrix:
    """Independent standard complex Gaussian entries (E|z|^2 = 1)"""
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)


def haar_unitary(rng: np.random.Generator, n: int) -> CMatrix:
    """Haar-distributed unitary: QR of a Ginibre matrix with R's diagonal made positive"""
    q, r = np.linalg.qr(ginibre(rng, n))
    d = np.diag(r)
    phases = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * phases


def sample_matrix(ensemble: str, dim: int, seed: int) -> CMatrix:
    """
    Draw one matrix from a named ensemble; identical (ensemble, dim, seed) give identical matrices

    block_diagonal_conjugated is reducible by construction for dim >= 2: two independent
    Ginibre blocks of sizes ceil(n/2), floor(n/2) conjugated by a Haar unitary.
    """
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    rng = np.random.default_rng(seed)
    if ensemble == "ginibre":
        return ginibre(rng, dim)
    if ensemble == "hermitian":
        return symmetrize(ginibre(rng, dim))
    if ensemble == "block_diagonal_conjugated":
        upper = (dim + 1) // 2
        blocks = [ginibre(rng, upper)]
        if dim - upper:
            blocks.append(ginibre(rng, dim - upper))
        u = haar_unitary(rng, dim)
        return u @ block_assemble(blocks) @ adjoint(u)
    raise ValueError(f"Unknown ensemble {ensemble!r}; expected one of {ENSEMBLES}")
