"""Functions sampled on uniform grids, with trapezoid quadrature.

A curve is a plain value vector on a shared :class:`GridSpec`; all L2
geometry (inner products, norms, distances) goes through composite
trapezoid weights, so integrals of affine functions are exact and the
endpoints carry half weight. Two-dimensional functions are stored
row-major over the tensor grid and use product weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, GridMismatchError, ParseError

__all__ = [
    "GridSpec",
    "FunctionOnGrid",
    "inner_product",
    "l2_norm",
    "l2_distance",
    "load_csv",
    "save_csv",
    "unit_interval_grid",
]

# Shortest representation that round-trips float64 exactly.
_FMT = "%.17g"


@dataclass(frozen=True)
class GridSpec:
    """Uniform evaluation grid on a product of closed intervals.

    Parameters
    ----------
    dim : int
        Domain dimension, 1 or 2.
    points_per_axis : int
        Number of nodes per axis, at least 2.
    bounds : tuple of (low, high) pairs
        One closed interval per axis, low < high.
    """

    dim: int
    points_per_axis: int
    bounds: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DataError(f"grid dim must be 1 or 2, got {self.dim}")
        if self.points_per_axis < 2:
            raise DataError("grid needs at least 2 points per axis")
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if len(bounds) != self.dim:
            raise DataError(
                f"expected {self.dim} bound pairs, got {len(bounds)}")
        for a, b in bounds:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise DataError(f"invalid axis bounds [{a}, {b}]")
        object.__setattr__(self, "bounds", bounds)

    @property
    def n_nodes(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def spacing(self) -> tuple:
        """Per-axis node spacing (b - a) / (K - 1)."""
        k = self.points_per_axis
        return tuple((b - a) / (k - 1) for a, b in self.bounds)

    def axis(self, i: int = 0) -> np.ndarray:
        a, b = self.bounds[i]
        return np.linspace(a, b, self.points_per_axis)

    @cached_property
    def nodes(self) -> np.ndarray:
        """All nodes as an (n_nodes, dim) array, row-major over the tensor grid."""
        axes = [self.axis(i) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        out = np.column_stack([m.ravel(order="C") for m in mesh])
        out.setflags(write=False)
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        """Flattened product trapezoid weights; sums to the domain volume."""
        per_axis = []
        for i in range(self.dim):
            w = np.full(self.points_per_axis, self.spacing[i])
            w[0] *= 0.5
            w[-1] *= 0.5
            per_axis.append(w)
        w = per_axis[0]
        for extra in per_axis[1:]:
            w = np.outer(w, extra).ravel(order="C")
        w.setflags(write=False)
        return w


def unit_interval_grid(points: int) -> GridSpec:
    """One-dimensional grid on [0, 1]."""
    return GridSpec(dim=1, points_per_axis=points, bounds=((0.0, 1.0),))


@dataclass(frozen=True, eq=False)
class FunctionOnGrid:
    """A functional datum: finite values at every node of a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel(order="C")
        if vals.size != self.grid.n_nodes:
            raise DataError(
                f"expected {self.grid.n_nodes} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise DataError("function values must all be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "FunctionOnGrid") -> "FunctionOnGrid":
        _check_same_grid(self, other)
        return FunctionOnGrid(self.grid, self.values + other.values)

    def __sub__(self, other: "FunctionOnGrid") -> "FunctionOnGrid":
        _check_same_grid(self, other)
        return FunctionOnGrid(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "FunctionOnGrid":
        return FunctionOnGrid(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def _check_same_grid(f: FunctionOnGrid, g: FunctionOnGrid) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(
            f"grids differ: {f.grid} vs {g.grid}")


def inner_product(f: FunctionOnGrid, g: FunctionOnGrid) -> float:
    """Trapezoid approximation of the L2 inner product <f, g>."""
    _check_same_grid(f, g)
    return float(np.dot(f.grid.weights * f.values, g.values))


def l2_norm(f: FunctionOnGrid) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def l2_distance(f: FunctionOnGrid, g: FunctionOnGrid) -> float:
    _check_same_grid(f, g)
    return l2_norm(FunctionOnGrid(f.grid, f.values - g.values))


# ---------------------------------------------------------------------------
# CSV I/O
#
# Layout: optional '#'-prefixed comment lines, then (1D) one header row of
# grid nodes followed by one row per curve. save_csv always writes a
# '# grid ...' comment so that round trips are exact; load_csv also accepts
# bare files and falls back to a unit-interval grid.
# ---------------------------------------------------------------------------


def _parse_row(line: str, row_no: int) -> list:
    cells = line.split(",")
    out = []
    for col, cell in enumerate(cells, start=1):
        text = cell.strip()
        try:
            out.append(float(text))
        except ValueError:
            raise ParseError(
                f"non-numeric cell {text!r}", row=row_no, column=col) from None
        if not np.isfinite(out[-1]):
            raise ParseError(
                f"non-finite cell {text!r}", row=row_no, column=col)
    return out


def _grid_from_comment(comment: str) -> GridSpec:
    # "# grid dim=2 points=50 bounds=0:1;0:1"
    fields = dict(part.split("=", 1) for part in comment.split()[2:])
    dim = int(fields["dim"])
    pts = int(fields["points"])
    bounds = tuple(
        tuple(float(x) for x in pair.split(":"))
        for pair in fields["bounds"].split(";"))
    return GridSpec(dim=dim, points_per_axis=pts, bounds=bounds)


def _grid_from_nodes(nodes: Sequence[float], row_no: int) -> GridSpec:
    arr = np.asarray(nodes, dtype=float)
    diffs = np.diff(arr)
    if np.any(diffs <= 0):
        col = int(np.argmax(diffs <= 0)) + 2
        raise ParseError("non-monotone grid row", row=row_no, column=col)
    span = arr[-1] - arr[0]
    if np.max(np.abs(diffs - diffs[0])) > 1e-8 * span:
        raise ParseError("non-uniform grid spacing", row=row_no)
    return GridSpec(dim=1, points_per_axis=arr.size,
                    bounds=((float(arr[0]), float(arr[-1])),))


def load_csv(path, header: str = "auto") -> list:
    """Read curves from a CSV file.

    Parameters
    ----------
    path : str or Path
        File to read. '#'-prefixed lines are treated as comments; a
        '# grid ...' comment written by :func:`save_csv` restores the
        exact grid, including 2D grids.
    header : {"auto", "grid", "none"}
        Whether the first data row holds the grid nodes. "auto" treats a
        strictly increasing first row as nodes.

    Returns
    -------
    list of FunctionOnGrid
    """
    if header not in ("auto", "grid", "none"):
        raise ParseError(f"unknown header mode {header!r}")
    grid = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# grid "):
                    grid = _grid_from_comment(line)
                continue
            rows.append((row_no, _parse_row(line, row_no)))
    if not rows and grid is None:
        raise ParseError("empty file")

    width = len(rows[0][1]) if rows else grid.n_nodes
    for row_no, row in rows:
        if len(row) != width:
            raise ParseError(
                f"ragged row: expected {width} cells, got {len(row)}",
                row=row_no)

    if grid is None:
        first = np.asarray(rows[0][1])
        looks_like_nodes = first.size > 1 and np.all(np.diff(first) > 0)
        if header == "grid" or (header == "auto" and looks_like_nodes):
            grid = _grid_from_nodes(rows[0][1], rows[0][0])
            rows = rows[1:]
        else:
            grid = unit_interval_grid(width)
    elif rows and grid.dim == 1 and len(rows[0][1]) == grid.n_nodes:
        # node row written by save_csv follows the comment; drop it
        if np.allclose(rows[0][1], grid.axis(0)):
            rows = rows[1:]

    if grid.dim == 2:
        # one block of points_per_axis rows per surface
        k = grid.points_per_axis
        if len(rows) % k != 0:
            raise ParseError(
                f"2D file needs a multiple of {k} rows, got {len(rows)}")
        if width != k:
            raise ParseError(f"2D file needs {k} columns, got {width}")
        out = []
        for start in range(0, len(rows), k):
            block = np.array([r for _, r in rows[start:start + k]])
            out.append(FunctionOnGrid(grid, block.ravel(order="C")))
        return out

    return [FunctionOnGrid(grid, np.asarray(r)) for _, r in rows]


def _format_row(values: Iterable[float]) -> str:
    return ",".join(_FMT % v for v in values)


def save_csv(curves, path) -> None:
    """Write curves so that load_csv round-trips exactly.

    Accepts a single curve, a sequence of curves, or a sanitized release
    (whose private summary is written).
    """
    if hasattr(curves, "summary"):
        curves = curves.summary
    if isinstance(curves, FunctionOnGrid):
        curves = [curves]
    if not curves:
        raise DataError("nothing to save")
    grid = curves[0].grid
    for c in curves[1:]:
        _check_same_grid(curves[0], c)
    bounds = ";".join(_FMT % a + ":" + _FMT % b for a, b in grid.bounds)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# grid dim={grid.dim} points={grid.points_per_axis} "
                 f"bounds={bounds}\n")
        if grid.dim == 1:
            fh.write(_format_row(grid.axis(0)) + "\n")
            for c in curves:
                fh.write(_format_row(c.values) + "\n")
        else:
            k = grid.points_per_axis
            for c in curves:
                block = c.values.reshape(k, k)
                for row in block:
                    fh.write(_format_row(row) + "\n")
