"""Seeded families of radial test functions and the deterministic (x, y) sample pairs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RadialGrid

FAMILY_KINDS = ("gaussian", "hat", "eigen")
ANGLES = (1.0, 0.5, 0.0, -0.5, -1.0)


@dataclass(frozen=True)
class TestFunctionFamily:
    """A reproducible draw of radial test functions.

    Members are described by physical parameters (not node indices), so the
    same family can be evaluated on a refined grid.
    """

    __test__ = False  # not a pytest class

    kind: str
    seed: int
    n: int
    r_max: float
    params: dict = field(default_factory=dict, compare=False)

    @classmethod
    def draw(cls, kind, n, seed, grid: RadialGrid, n_eigen=10):
        if kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {kind!r}; expected one of {FAMILY_KINDS}")
        rng = np.random.default_rng(seed)
        half = grid.r_max / 2.0
        if kind == "gaussian":
            params = {"center": rng.uniform(0.0, half, n),
                      "width": np.exp(rng.uniform(np.log(0.05), np.log(2.0), n))}
        elif kind == "hat":
            centers = rng.uniform(0.0, half, n)
            idx = np.clip(grid.nearest(centers), 1, grid.M - 2)
            # three nodes of the drawing grid, kept as physical radii
            params = {"left": grid.nodes[idx - 1], "center": grid.nodes[idx],
                      "right": grid.nodes[idx + 1]}
        else:
            params = {"coefficients": rng.standard_normal((n_eigen, n))}
        return cls(kind=kind, seed=int(seed), n=int(n), r_max=float(grid.r_max), params=params)

    def evaluate(self, grid: RadialGrid, basis=None):
        """Node values, one column per member.  ``basis`` (ell = 0) is needed for "eigen"."""
        r = grid.nodes[:, None]
        p = self.params
        if self.kind == "gaussian":
            with np.errstate(over="ignore"):
                return np.exp(-((r - p["center"]) / p["width"]) ** 2)
        if self.kind == "hat":
            up = (r - p["left"]) / (p["center"] - p["left"])
            down = (p["right"] - r) / (p["right"] - p["center"])
            return np.clip(np.minimum(up, down), 0.0, None)
        if basis is None:
            raise ValueError("eigen-mixture family needs the ell = 0 eigenbasis")
        C = p["coefficients"]
        V = basis.vectors[:, :C.shape[0]]
        V = V * np.where(V[0] < 0, -1.0, 1.0)
        return V @ C

    def describe(self):
        return {"kind": self.kind, "seed": self.seed, "n": self.n}


def admissible(u, mass, phi):
    """Columns with positive L2(mu) norm and finite weighted L1(mu) norm."""
    l2 = np.sum(mass[:, None] * u * u, axis=0)
    l1 = np.sum(mass[:, None] * np.abs(u) * phi[:, None], axis=0)
    return (l2 > 0) & np.isfinite(l1) & np.isfinite(l2)


def radial_ladder(grid: RadialGrid, n=24, outer_fraction=0.7):
    """Geometric ladder from the first node to ``outer_fraction * R_max``, snapped to nodes."""
    raw = np.geomspace(grid.nodes[0], outer_fraction * grid.r_max, n)
    idx = np.unique(grid.nearest(raw))
    return idx, grid.nodes[idx]


@dataclass(frozen=True)
class SamplePairs:
    r_x: np.ndarray
    r_y: np.ndarray
    cos_gamma: np.ndarray
    ladder: np.ndarray

    @property
    def size(self):
        return self.r_x.size

    @property
    def outer(self):
        return float(self.ladder[-1])


def sample_pairs(grid: RadialGrid, n=24, angles=ANGLES, outer_fraction=0.7):
    """All ladder x ladder pairs at each angle, plus the on-axis pairs (x, 0)."""
    _, lad = radial_ladder(grid, n, outer_fraction)
    X, Y = np.meshgrid(lad, lad, indexing="ij")
    rx = np.concatenate([X.ravel()] * len(angles) + [lad])
    ry = np.concatenate([Y.ravel()] * len(angles) + [np.zeros_like(lad)])
    cg = np.concatenate([np.full(X.size, c) for c in angles] + [np.ones_like(lad)])
    return SamplePairs(r_x=rx, r_y=ry, cos_gamma=cg, ladder=lad)
