"""Graded radial mesh and finite-volume assembly of the per-mode quadratic form.

For angular mode ``ell`` a radial profile ``f`` carries the form

    int f'^2 r^{N-1} dr + int [ell(ell+N-2)/r^2 + r^beta/(1+r^alpha)] f^2 r^{N-1} dr

against the mass ``int f^2 r^{N-1}/(1+r^alpha) dr``.  The two-point flux
discretization gives a symmetric tridiagonal stiffness and a diagonal mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes ``r_j = R_max (j/(M+1))^g``, j = 1..M, with interleaved cell faces.

    ``faces`` has M+1 entries: ``faces[0] = r_1/2`` (inner face), midpoints of
    consecutive nodes, and ``faces[M] = R_max`` (outer, Dirichlet, face).
    """

    nodes: np.ndarray
    faces: np.ndarray
    r_max: float
    grading: float

    @property
    def M(self):
        return self.nodes.size

    @property
    def widths(self):
        """Cell lengths ``r_{j+1/2} - r_{j-1/2}``."""
        return np.diff(self.faces)

    @property
    def spacing(self):
        """Distances to the next node; the last entry is the distance to R_max."""
        return np.diff(np.append(self.nodes, self.r_max))

    def cell_volumes(self, N):
        """Radial volumes ``int r^{N-1} dr`` of the cells, innermost cell taken from 0."""
        outer = self.faces[1:] ** N
        inner = np.concatenate(([0.0], self.faces[1:-1] ** N))
        return (outer - inner) / N

    def key(self):
        return {"r_max": float(self.r_max), "m": int(self.M), "grading": float(self.grading)}

    def nearest(self, r):
        """Index of the node closest to each radius in ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = np.searchsorted(self.nodes, r)
        idx = np.clip(idx, 1, self.M - 1)
        left = self.nodes[idx - 1]
        right = self.nodes[idx]
        return np.where(np.abs(r - left) <= np.abs(right - r), idx - 1, idx)


def build_grid(r_max, M, grading=1.5, min_nodes=16):
    """Build a graded radial grid on (0, r_max).

    ``min_nodes`` is the resolution floor; lowering it is only meant for
    inspecting tiny grids.
    """
    if not r_max > 0:
        raise GridError(f"r_max must be positive, got {r_max}")
    if not grading >= 1:
        raise GridError(f"grading exponent must be >= 1, got {grading}")
    if int(M) != M or M < max(min_nodes, 2):
        raise GridError(f"M={M} nodes is too few to resolve the problem (need >= {min_nodes})")
    M = int(M)
    j = np.arange(1, M + 1, dtype=float)
    nodes = r_max * (j / (M + 1)) ** grading
    faces = np.empty(M + 1)
    faces[0] = 0.5 * nodes[0]
    faces[1:M] = 0.5 * (nodes[:-1] + nodes[1:])
    faces[M] = r_max
    return RadialGrid(nodes=nodes, faces=faces, r_max=float(r_max), grading=float(grading))


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Stiffness/mass pair for one angular mode.

    The stiffness is ``diag(-lower_left - upper_right) + diag(reaction)`` plus the
    off-diagonal couplings ``off`` (all <= 0).  ``flux_in``/``flux_out`` hold the
    magnitudes of the couplings to the neighbours on either side; ``flux_out[-1]``
    is the coupling to the Dirichlet value at R_max.
    """

    ell: int
    params: ModelParams
    grid: RadialGrid
    mass: np.ndarray
    off: np.ndarray
    flux_in: np.ndarray
    flux_out: np.ndarray
    reaction: np.ndarray
    laplacian_only: bool = False

    @property
    def diag(self):
        return self.flux_in + self.flux_out + self.reaction

    @property
    def M(self):
        return self.mass.size

    def dense_stiffness(self):
        K = np.diag(self.diag)
        K += np.diag(self.off, 1) + np.diag(self.off, -1)
        return K

    def stiffness_apply(self, u):
        """Compute ``K u`` without forming K."""
        u = np.asarray(u, dtype=float)
        shape = (-1,) + (1,) * (u.ndim - 1)
        off = self.off.reshape(shape)
        out = self.diag.reshape(shape) * u
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out

    def form(self, u):
        """Discrete quadratic form ``u^T K u``."""
        u = np.asarray(u, dtype=float)
        return float(u @ self.stiffness_apply(u))

    def gradient_form(self, u):
        """Gradient-only part of the form (no centrifugal, no potential)."""
        u = np.asarray(u, dtype=float)
        du = np.diff(u)
        fo = self.flux_out
        return float(np.sum(fo[:-1] * du ** 2) + fo[-1] * u[-1] ** 2)

    def check(self):
        if not np.all(self.mass > 0):
            raise GridError("mass entries must be strictly positive")
        if not np.all(self.off <= 0):
            raise GridError("off-diagonal stiffness must be nonpositive")
        if not np.all(self.reaction >= 0):
            raise GridError("reaction terms must be nonnegative")
        return self


def assemble_mode(params: ModelParams, grid: RadialGrid, ell: int, laplacian_only=False):
    """Assemble the finite-volume stiffness/mass pair for mode ``ell``.

    ``laplacian_only`` replaces the coefficients by ``a = 1, V = 0`` (diagnostic
    override; the mass then carries no ``(1+r^alpha)^{-1}`` weight).
    """
    if ell < 0 or int(ell) != ell:
        raise ValueError(f"ell must be a nonnegative integer, got {ell}")
    ell = int(ell)
    N = params.N
    r = grid.nodes
    h = grid.widths
    d = grid.spacing
    f = grid.faces

    # couplings across interior faces r_{j+1/2}, j = 1..M-1, and to R_max
    flux_out = f[1:] ** (N - 1) / d
    flux_in = np.concatenate(([0.0], flux_out[:-1]))  # zero flux at the inner face
    off = -flux_out[:-1]

    vol = r ** (N - 1) * h
    centrifugal = ell * (ell + N - 2) * r ** (N - 3) * h
    if laplacian_only:
        mass = vol
        reaction = centrifugal
    else:
        a = params.diffusion(r)
        mass = vol / a
        reaction = centrifugal + params.potential(r) * vol / a
    op = ModeOperator(ell=ell, params=params, grid=grid, mass=mass, off=off,
                      flux_in=flux_in, flux_out=flux_out, reaction=reaction,
                      laplacian_only=laplacian_only)
    return op.check()
