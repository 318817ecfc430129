"""Nystrom eigendecomposition of a kernel on a grid and the norms it induces.

The gram matrix is whitened by the quadrature weights before the symmetric
eigensolve, so the resulting eigenpairs approximate the continuum operator:
eigenfunction columns are exactly orthonormal under the grid inner product
and the eigenvalue sum reproduces the integrated kernel trace. On a uniform
interior this reduces to the usual lambda_j = nu_j * dx, phi_j = u_j / sqrt(dx)
rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateKernelError
from .grid import FunctionOnGrid, GridSpec

__all__ = [
    "SpectralBasis",
    "CoefficientVector",
    "decompose",
    "project",
    "reconstruct",
    "cameron_martin_norm",
    "weighted_l1_norm",
    "power_norm",
    "partial_trace",
    "save_basis_csv",
]

# A coefficient vector is a plain float array of length basis.floor_index.
CoefficientVector = np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigenpairs of a kernel operator estimated on a grid.

    ``eigenvalues`` holds the full decreasing spectrum (clamped at zero);
    only the first ``floor_index`` entries are retained for norms,
    projections, and noise. ``eigenfunctions`` column j is the j-th
    eigenfunction sampled at the grid nodes.
    """

    grid: GridSpec
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    floor_index: int

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        phi = np.asarray(self.eigenfunctions, dtype=float)
        n = self.grid.n_nodes
        if phi.shape[0] != n or lam.size != phi.shape[1]:
            raise DataError("basis arrays do not match the grid size")
        if not 1 <= self.floor_index <= lam.size:
            raise DataError("floor_index out of range")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenfunctions", phi)

    @property
    def j_max(self) -> int:
        return self.floor_index

    @property
    def lam(self) -> np.ndarray:
        """Retained eigenvalues."""
        return self.eigenvalues[: self.floor_index]

    @property
    def phi(self) -> np.ndarray:
        """Retained eigenfunction columns (n_nodes, j_max)."""
        return self.eigenfunctions[:, : self.floor_index]

    def truncate(self, j: int) -> "SpectralBasis":
        """Restrict the retained span to the leading ``j`` components."""
        if not 1 <= j <= self.floor_index:
            raise ConfigError(f"truncation index {j} outside [1, {self.floor_index}]")
        return SpectralBasis(self.grid, self.eigenvalues,
                             self.eigenfunctions, floor_index=j)

    def eigenfunction(self, j: int) -> FunctionOnGrid:
        """The j-th (1-based) retained eigenfunction as a curve."""
        if not 1 <= j <= self.floor_index:
            raise ConfigError(f"eigenfunction index {j} outside [1, {self.floor_index}]")
        return FunctionOnGrid(self.grid, self.eigenfunctions[:, j - 1])


def _fix_signs(phi: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax breaks ties at the lowest index
    idx = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[idx, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    return phi * signs


def decompose(gram_matrix: np.ndarray, grid: GridSpec,
              floor_rel: float = 1e-12) -> SpectralBasis:
    """Quadrature-weighted eigendecomposition of a gram matrix.

    Parameters
    ----------
    gram_matrix : (n, n) array
        Symmetric kernel values on the grid nodes.
    grid : GridSpec
        Grid carrying the quadrature weights.
    floor_rel : float in (0, 1)
        Eigenvalues at or below ``floor_rel * lambda_1`` are dropped from
        the retained span (they would blow up the weighted l1 norm).

    Returns
    -------
    SpectralBasis
    """
    if not 0 < floor_rel < 1:
        raise ConfigError("floor_rel must lie in (0, 1)")
    g = np.asarray(gram_matrix, dtype=float)
    n = grid.n_nodes
    if n > 3000:
        raise ConfigError(
            f"dense eigendecomposition is limited to 3000 nodes, got {n}; "
            "use a coarser grid")
    if g.shape != (n, n):
        raise DataError(f"gram matrix must be {n}x{n}, got {g.shape}")
    scale = max(np.max(np.abs(g)), 1e-300)
    if np.max(np.abs(g - g.T)) > 1e-10 * scale:
        raise DataError("gram matrix is not symmetric")

    sqrt_w = np.sqrt(grid.weights)
    a = g * np.outer(sqrt_w, sqrt_w)
    a = 0.5 * (a + a.T)
    nu, u = np.linalg.eigh(a)
    order = np.argsort(nu)[::-1]
    lam = np.maximum(nu[order], 0.0)
    phi = u[:, order] / sqrt_w[:, None]
    phi = _fix_signs(phi)

    if lam[0] <= 0:
        raise DegenerateKernelError("gram matrix has no positive eigenvalue")
    retained = int(np.sum(lam > floor_rel * lam[0]))
    if retained == 0:
        raise DegenerateKernelError(
            "all eigenvalues fell below the spectral floor")
    return SpectralBasis(grid, lam, phi, floor_index=retained)


def project(f: FunctionOnGrid, basis: SpectralBasis) -> CoefficientVector:
    """Coefficients <f, phi_j> over the retained span, via quadrature."""
    if f.grid != basis.grid:
        raise DataError("function and basis live on different grids")
    return (f.grid.weights * f.values) @ basis.phi


def reconstruct(coeffs: CoefficientVector, basis: SpectralBasis) -> FunctionOnGrid:
    """Sum of coefficients times retained eigenfunctions."""
    c = np.asarray(coeffs, dtype=float)
    if c.size != basis.floor_index:
        raise DataError(
            f"expected {basis.floor_index} coefficients, got {c.size}")
    return FunctionOnGrid(basis.grid, basis.phi @ c)


def cameron_martin_norm(f: FunctionOnGrid, basis: SpectralBasis) -> float:
    """Weighted l2 coefficient norm with weights 1/lambda_j."""
    c = project(f, basis)
    return float(np.sqrt(np.sum(c * c / basis.lam)))


def weighted_l1_norm(f: FunctionOnGrid, basis: SpectralBasis) -> float:
    """Weighted l1 coefficient norm with weights 1/sqrt(lambda_j).

    This is the norm that governs pure-DP feasibility of the Laplace
    process mechanism.
    """
    c = project(f, basis)
    return float(np.sum(np.abs(c) / np.sqrt(basis.lam)))


def power_norm(f: FunctionOnGrid, basis: SpectralBasis, eta: float) -> float:
    """Weighted l2 norm with weights 1/lambda_j^eta."""
    if eta < 0:
        raise ConfigError("power exponent eta must be nonnegative")
    c = project(f, basis)
    return float(np.sqrt(np.sum(c * c / np.power(basis.lam, eta))))


def partial_trace(basis: SpectralBasis, eta: float) -> float:
    """Sum of retained eigenvalues raised to ``eta``."""
    if eta < 0:
        raise ConfigError("power exponent eta must be nonnegative")
    return float(np.sum(np.power(basis.lam, eta)))


def save_basis_csv(basis: SpectralBasis, path) -> None:
    """Write retained eigenpairs: column one eigenvalues, then eigenfunctions."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# spectral basis: eigenvalue, eigenfunction values\n")
        for j in range(basis.floor_index):
            row = np.concatenate(([basis.lam[j]], basis.phi[:, j]))
            fh.write(",".join("%.17g" % v for v in row) + "\n")
