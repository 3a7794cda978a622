"""Exact direct solvers for the constant-coefficient implicit pieces.

All three linear systems in a time step are constant-coefficient Laplacians
on a uniform box, so they are solved exactly (to round-off) by fast
trigonometric transforms instead of iterations:

  cell-centered Neumann Laplacian   -> DCT-II, eigenvalues
        lam_k = 4 sin^2(pi k / (2 N)) / h^2,  k = 0..N-1  (per axis)
  no-slip normal direction (values on interior faces, walls at the end
  faces)                            -> DST-I on N-1 points,
        lam_k = 4 sin^2(pi k / (2 N)) / h^2,  k = 1..N-1
  no-slip transverse direction (wall half a cell outside the first
  sample, ghost = -value)           -> DST-II,
        lam_k = 4 sin^2(pi k / (2 N)) / h^2,  k = 1..N

With norm='ortho' each transform is its own inverse's adjoint, so a
forward transform, a diagonal divide, and an inverse transform solve
(I - a Lap) x = b or the Poisson problem exactly.  Residuals of these
solves sit at machine precision; callers still verify them post hoc.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn, dst, idst

from .grid import Grid, axslice, divergence, face_diff, full_faces


class SpectralCache:
    """Precomputed transform eigenvalues for one grid.

    Holds the positive eigenvalue array Lam of -Lap_h for the cell-centered
    Neumann operator and, per velocity component, for the mixed
    DST-I/DST-II face operator.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        dim = grid.dim

        # cell-centered Neumann: modes k = 0..N-1 over N cells
        cell = []
        for a in range(dim):
            n, h = grid.cells[a], grid.h[a]
            k = np.arange(n)
            cell.append(4.0 * np.sin(np.pi * k / (2.0 * n)) ** 2 / (h * h))
        self.cell_lam = _broadcast_sum(cell)

        # face operators: DST-I along the own axis (N-1 interior faces,
        # modes k = 1..N-1), DST-II along the others (N samples, modes
        # k = 1..N); same eigenvalue formula with denominator 2N
        self.face_lam = []
        for a in range(dim):
            per_axis = []
            for b in range(dim):
                n, h = grid.cells[b], grid.h[b]
                k = np.arange(1, n) if b == a else np.arange(1, n + 1)
                per_axis.append(4.0 * np.sin(np.pi * k / (2.0 * n)) ** 2 / (h * h))
            self.face_lam.append(_broadcast_sum(per_axis))


def _broadcast_sum(per_axis):
    """Sum 1-D eigenvalue vectors into a full broadcast array."""
    dim = len(per_axis)
    total = 0.0
    for a, lam in enumerate(per_axis):
        shape = [1] * dim
        shape[a] = lam.size
        total = total + lam.reshape(shape)
    return total


def solve_neumann_poisson(cache: SpectralCache, rhs: np.ndarray) -> np.ndarray:
    """Solve Lap_h phi = rhs - mean(rhs) with Neumann walls, mean(phi) = 0.

    The constant mode is projected out (compatibility); the caller is
    expected to pass an rhs whose mean is already at round-off.
    """
    rhat = dctn(rhs, type=2, norm="ortho")
    origin = (0,) * rhs.ndim
    lam = cache.cell_lam.copy()
    lam[origin] = 1.0           # avoid 0/0; mode is zeroed anyway
    phat = -rhat / lam
    phat[origin] = 0.0
    return idctn(phat, type=2, norm="ortho")


def solve_cell_helmholtz(cache: SpectralCache, rhs: np.ndarray,
                         a: float) -> np.ndarray:
    """Solve (I - a Lap_h) x = rhs on cells with Neumann walls."""
    xhat = dctn(rhs, type=2, norm="ortho") / (1.0 + a * cache.cell_lam)
    return idctn(xhat, type=2, norm="ortho")


def solve_face_helmholtz(cache: SpectralCache, rhs_interior: np.ndarray,
                         axis: int, a: float) -> np.ndarray:
    """Solve (I - a Lap_h) x = rhs on the interior faces of `axis`.

    No-slip walls: Dirichlet zero at the end faces along the component's
    own axis (DST-I) and via ghost reflection half a cell outside along
    transverse axes (DST-II).
    """
    dim = rhs_interior.ndim
    xhat = rhs_interior
    for b in range(dim):
        xhat = dst(xhat, type=1 if b == axis else 2, axis=b, norm="ortho")
    xhat = xhat / (1.0 + a * cache.face_lam[axis])
    for b in range(dim):
        xhat = idst(xhat, type=1 if b == axis else 2, axis=b, norm="ortho")
    return xhat


# ---------- explicit operators for residual verification ----------

def neumann_laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """div(grad f) with zero-flux walls; matches the DCT-II operator."""
    return divergence(
        grid, [full_faces(grid, face_diff(grid, f, a), a)
               for a in range(grid.dim)])


def face_laplacian(grid: Grid, u_full: np.ndarray, axis: int) -> np.ndarray:
    """Laplacian of one velocity component on its interior faces.

    Along the own axis the boundary faces (zeros) in u_full provide the
    Dirichlet data; along transverse axes the wall ghost is -u (no-slip
    half a cell outside), giving the (u_1 - 3 u_0)/h^2 end rows that the
    DST-II diagonalizes.
    """
    ui = axslice(u_full, axis, slice(1, -1))
    out = np.zeros_like(ui)
    for b in range(grid.dim):
        h2 = grid.h[b] * grid.h[b]
        if b == axis:
            out += (axslice(u_full, axis, slice(2, None))
                    - 2.0 * ui
                    + axslice(u_full, axis, slice(0, -2))) / h2
        else:
            n = ui.shape[b]
            padded_lo = axslice(ui, b, slice(0, 1))
            padded_hi = axslice(ui, b, slice(n - 1, n))
            ghosted = np.concatenate([-padded_lo, ui, -padded_hi], axis=b)
            out += (axslice(ghosted, b, slice(2, None))
                    - 2.0 * ui
                    + axslice(ghosted, b, slice(0, -2))) / h2
    return out
