import numpy as np
import pytest

from iclp.grid import unit_interval_grid
from iclp.kernels import KernelSpec, gram, trace_normalized
from iclp.spectral import SpectralBasis, decompose

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    """Collect one pass/fail line per acceptance criterion."""
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid101():
    return unit_interval_grid(101)


@pytest.fixture(scope="session")
def grid201():
    return unit_interval_grid(201)


@pytest.fixture(scope="session")
def matern_basis_120():
    """Matern(1.5, 0.1) trace-normalized basis on a 120-node grid."""
    grid = unit_interval_grid(120)
    spec = trace_normalized(KernelSpec.matern(1.5, 0.1), grid)
    return decompose(gram(spec, grid), grid)


@pytest.fixture(scope="session")
def matern_basis_200():
    grid = unit_interval_grid(200)
    spec = trace_normalized(KernelSpec.matern(1.5, 0.1), grid)
    return decompose(gram(spec, grid), grid)


def make_synthetic_basis(eigenvalues, points=80) -> SpectralBasis:
    """Basis with prescribed eigenvalues and quadrature-orthonormal columns.

    Columns come from cosine functions orthonormalized against the
    trapezoid weights, so hand-computed sensitivity examples are exact.
    """
    grid = unit_interval_grid(points)
    lam = np.asarray(eigenvalues, dtype=float)
    t = grid.axis(0)
    raw = np.column_stack([np.cos(j * np.pi * t) for j in range(lam.size)])
    sqrt_w = np.sqrt(grid.weights)
    q, _ = np.linalg.qr(sqrt_w[:, None] * raw)
    phi = q / sqrt_w[:, None]
    signs = np.sign(phi[np.argmax(np.abs(phi), axis=0), np.arange(lam.size)])
    return SpectralBasis(grid, lam, phi * signs, floor_index=lam.size)
