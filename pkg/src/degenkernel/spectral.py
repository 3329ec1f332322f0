"""Per-mode eigendecomposition, heat-kernel synthesis and the exact semigroup action.

Eigenvalues stored here are those of ``-A`` (positive).  The top of the
spectrum of ``A`` is therefore ``lambda0 = -lambda1``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, special

from . import __version__
from .grid import ModeOperator, RadialGrid, assemble_mode
from .model import ModelParams, sphere_area

log = logging.getLogger(__name__)

# e^{-lambda t} below this fraction of e^{-lambda_1 t} is dropped from spectral sums
DROP_LOG = 16.0 * math.log(10.0)
# relative level below which dense eigenvector entries are replaced by the tail recurrence
TAIL_MATCH_LEVEL = 1e-6


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Mass-orthonormal eigenpairs of one mode: ``K v = lambda M v``.

    ``vectors[:, i]`` holds node values of the i-th eigenvector.
    """

    ell: int
    eigenvalues: np.ndarray
    vectors: np.ndarray
    op: ModeOperator
    residual: float
    refined: int = 0

    @property
    def mass(self):
        return self.op.mass

    @property
    def grid(self) -> RadialGrid:
        return self.op.grid

    @property
    def M(self):
        return self.eigenvalues.size

    def t_min(self, level=1e-12):
        """Smallest time at which the top of the discrete spectrum is damped below ``level``."""
        return -math.log(level) / self.eigenvalues[-1]

    def orthonormality_error(self):
        V = self.vectors
        G = V.T @ (self.mass[:, None] * V)
        return float(np.max(np.abs(G - np.eye(self.M))))

    def kept(self, t):
        """Number of leading eigenpairs that matter at time t."""
        if t <= 0:
            return self.M
        lam = self.eigenvalues
        return int(np.searchsorted(lam, lam[0] + DROP_LOG / t, side="right"))


@dataclass(frozen=True, eq=False)
class GroundState:
    lambda1: float
    psi0: np.ndarray
    grid: RadialGrid
    mass: np.ndarray

    @property
    def lambda0(self):
        """Top of the spectrum of A (sign convention: ``-lambda1``)."""
        return -self.lambda1


@dataclass(frozen=True)
class KernelEvaluation:
    t: float
    r_x: float
    r_y: float
    cos_gamma: float
    value_kmu: float
    value_k: float
    tail_bound: float
    l_max: int
    resolved: bool


def _refine_tails(op: ModeOperator, lam, V):
    """Recompute the decaying outer tails of the eigenvectors.

    Beyond the last turning point a dense solver only resolves entries down to
    ~1e-16 of the peak.  There the eigen-relation, run inward from the
    Dirichlet end, is a recurrence for ratios ``s_j = v_{j-1}/v_j > 1`` whose
    terms are all positive, so it reproduces tiny entries to full relative
    precision.  Entries below ``TAIL_MATCH_LEVEL`` of the peak are replaced.
    Returns the number of refined vectors.
    """
    M = lam.size
    fin, fout, c, m = op.flux_in, op.flux_out, op.reaction, op.mass
    S = np.empty((M, M))
    tnext = np.zeros(M)  # v_{j+1}/v_j, zero at the Dirichlet end
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for j in range(M - 1, 0, -1):
            s = 1.0 + (fout[j] * (1.0 - tnext) + c[j] - lam * m[j]) / fin[j]
            S[j] = s
            tnext = 1.0 / s
    S[0] = np.nan
    good = S > 1.0
    good[0] = False
    # k0: start of the monotone suffix for each mode
    bad_rev = ~good[::-1]
    any_bad = bad_rev.any(axis=0)
    last_bad = np.where(any_bad, M - 1 - np.argmax(bad_rev, axis=0), -1)
    k0 = last_bad + 1
    absV = np.abs(V)
    peak = absV.max(axis=0)
    above = absV >= TAIL_MATCH_LEVEL * peak
    kstar = M - 1 - np.argmax(above[::-1], axis=0)
    usable = (kstar >= k0 - 1) & (kstar < M - 1) & (k0 < M)
    logS = np.where(good, np.log(np.where(good, S, 1.0)), 0.0)
    L = np.cumsum(logS, axis=0)
    count = 0
    for i in np.nonzero(usable)[0]:
        k = kstar[i]
        seg = L[k + 1:, i] - L[k, i]
        V[k + 1:, i] = V[k, i] * np.exp(-seg)
        count += 1
    return count


def solve_mode(op: ModeOperator) -> EigenBasis:
    """Full generalized eigendecomposition of one mode via a symmetric tridiagonal problem."""
    d = 1.0 / np.sqrt(op.mass)
    hd = op.diag * d * d
    he = op.off * d[:-1] * d[1:]
    try:
        lam, Q = linalg.eigh_tridiagonal(hd, he, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(
            f"tridiagonal eigensolve failed for ell={op.ell}: diag range "
            f"[{hd.min():.3e}, {hd.max():.3e}], min |offdiag| {np.abs(he).min():.3e}"
        ) from exc
    V = d[:, None] * Q
    refined = _refine_tails(op, lam, V)
    R = op.stiffness_apply(V) - op.mass[:, None] * V * lam
    res = float(np.max(np.linalg.norm(R, axis=0)))
    if not np.all(lam > 0):
        raise SpectralError(f"non-positive eigenvalue {lam[0]:.3e} for ell={op.ell}")
    if res > 1e-8 * lam[-1]:
        raise SpectralError(f"eigen-residual {res:.3e} exceeds 1e-8 * lambda_max for ell={op.ell}")
    return EigenBasis(ell=op.ell, eigenvalues=lam, vectors=V, op=op, residual=res,
                      refined=refined)


def default_cache_dir():
    env = os.environ.get("DEGENKERNEL_CACHE_DIR")
    return Path(env) if env else None


def cache_key(params: ModelParams, grid: RadialGrid, ell, laplacian_only=False):
    payload = {"model": params.as_dict(), "grid": grid.key(), "ell": int(ell),
               "laplacian_only": bool(laplacian_only), "version": __version__}
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


class ModeBank:
    """Lazily solved eigenbases for ell = 0, 1, 2, ... on a fixed grid.

    Solved bases are kept in memory and, when ``cache_dir`` is set, in
    ``<cache_dir>/mode-<hash>.npz`` keyed on model, grid, mode and code version.
    """

    def __init__(self, params: ModelParams, grid: RadialGrid, cache_dir=None,
                 laplacian_only=False):
        self.params = params
        self.grid = grid
        self.laplacian_only = laplacian_only
        self.cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
        self._bases = {}
        self.solves = 0
        self.cache_hits = 0

    def __getitem__(self, ell) -> EigenBasis:
        ell = int(ell)
        if ell not in self._bases:
            self._bases[ell] = self._load_or_solve(ell)
        return self._bases[ell]

    def __contains__(self, ell):
        return int(ell) in self._bases

    def bases(self, l_max):
        return [self[ell] for ell in range(l_max + 1)]

    def _load_or_solve(self, ell):
        op = assemble_mode(self.params, self.grid, ell, laplacian_only=self.laplacian_only)
        path = None
        if self.cache_dir is not None:
            key = cache_key(self.params, self.grid, ell, self.laplacian_only)
            path = self.cache_dir / f"mode-{key}.npz"
            if path.exists():
                with np.load(path) as z:
                    self.cache_hits += 1
                    log.info("cache hit for ell=%d (%s), eigensolve skipped", ell, path.name)
                    return EigenBasis(ell=ell, eigenvalues=z["eigenvalues"], vectors=z["vectors"],
                                      op=op, residual=float(z["residual"]),
                                      refined=int(z["refined"]))
        log.info("solving mode ell=%d (M=%d)", ell, self.grid.M)
        basis = solve_mode(op)
        self.solves += 1
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp.npz")
            np.savez(tmp, eigenvalues=basis.eigenvalues, vectors=basis.vectors,
                     residual=basis.residual, refined=basis.refined)
            os.replace(tmp, path)
        return basis


def _check_t(t):
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")


def kmu_mode(basis: EigenBasis, t, a, b):
    """Mode kernel ``sum_i exp(-lambda_i t) v_i[a] v_i[b]`` at node indices a, b."""
    _check_t(t)
    n = basis.kept(t)
    lam = basis.eigenvalues[:n]
    V = basis.vectors[:, :n]
    w = np.exp(-lam * t)
    a = np.asarray(a)
    b = np.asarray(b)
    # symmetric in (a, b) by construction: the product is commutative elementwise
    return np.sum(w * (V[a] * V[b]), axis=-1)


def kmu_mode_matrix(basis: EigenBasis, t, rows=None):
    """Mode kernel on a node subset as a dense matrix (all nodes by default)."""
    _check_t(t)
    n = basis.kept(t)
    V = basis.vectors[:, :n] if rows is None else basis.vectors[np.asarray(rows), :n]
    w = np.exp(-basis.eigenvalues[:n] * t)
    G = (V * w) @ V.T
    return 0.5 * (G + G.T)  # exactly symmetric


def zonal(N, ell, c):
    """Zonal harmonic Z_ell(c): reproducing kernel of degree-ell harmonics on S^{N-1}."""
    c = np.asarray(c, dtype=float)
    area = sphere_area(N)
    if ell == 0:
        return np.full_like(c, 1.0 / area)
    if N == 3:
        return (2 * ell + 1) / area * special.eval_legendre(ell, c)
    lam = (N - 2) / 2.0
    return (2 * ell + N - 2) / (N - 2) / area * special.eval_gegenbauer(ell, lam, c)


def zonal_at_one(N, ell):
    """Z_ell(1) = dim(harmonics of degree ell) / |S^{N-1}|."""
    dim = (2 * ell + N - 2) * math.comb(ell + N - 3, ell) / (N - 2)
    return dim / sphere_area(N)


def _interp_vectors(basis: EigenBasis, t, radii):
    """Eigenvector values at arbitrary radii by linear interpolation between nodes.

    Below the first node the ell = 0 profile is held constant (zero flux at the
    origin) and ell >= 1 profiles go linearly to 0; beyond the last node all
    profiles go linearly to the Dirichlet value 0 at R_max.
    """
    n = basis.kept(t)
    V = basis.vectors[:, :n]
    g = basis.grid
    xs = np.concatenate(([0.0], g.nodes, [g.r_max]))
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0) or np.any(radii > g.r_max):
        raise ValueError("radius outside the grid range [0, R_max]")
    hi = np.clip(np.searchsorted(xs, radii, side="right"), 1, xs.size - 1)
    lo = hi - 1
    w = (radii - xs[lo]) / (xs[hi] - xs[lo])
    first = V[0] if basis.ell == 0 else np.zeros(n)
    Vaug = np.vstack((first, V, np.zeros(n)))
    exact = w == 0.0
    out = (1.0 - w)[:, None] * Vaug[lo] + w[:, None] * Vaug[hi]
    out[exact] = Vaug[lo[exact]]
    return out


def mode_kernel_at(basis: EigenBasis, t, rx, ry):
    """Mode kernel at arbitrary radius pairs (vectorized over pairs)."""
    _check_t(t)
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    uniq, inv = np.unique(np.concatenate((rx, ry)), return_inverse=True)
    U = _interp_vectors(basis, t, uniq)
    w = np.exp(-basis.eigenvalues[:U.shape[1]] * t)
    ix, iy = inv[:rx.size], inv[rx.size:]
    if uniq.size <= 2048:
        G = (U * w) @ U.T
        return G[ix, iy]
    return np.einsum("pi,pi,i->p", U[ix], U[iy], w)


def kernel_values(bank, t, rx, ry, cos_gamma, l_max=32, tail_rtol=1e-12, l_cap=None):
    """Zonal synthesis of k_mu(t, x, y) for many pairs with a tail bound on the truncation.

    Returns ``(kmu, tail)``.  The tail bound sums ``|k_ell(t, r, r')| Z_ell(1)``
    for ell > l_max until three consecutive terms fall below ``tail_rtol`` times
    the running absolute sum; pairs that do not settle by ``l_cap`` get ``inf``.
    """
    _check_t(t)
    N = bank.params.N
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    c = np.broadcast_to(np.asarray(cos_gamma, dtype=float), rx.shape)
    if l_cap is None:
        l_cap = l_max + 256
    on_axis = (rx == 0) | (ry == 0)
    kmu = np.zeros(rx.size)
    abs_sum = np.zeros(rx.size)
    for ell in range(l_max + 1):
        kl = mode_kernel_at(bank[ell], t, rx, ry)
        if ell > 0:
            kl = np.where(on_axis, 0.0, kl)
        kmu += kl * zonal(N, ell, c)
        abs_sum += np.abs(kl) * zonal_at_one(N, ell)
    tail = np.zeros(rx.size)
    quiet = np.zeros(rx.size, dtype=int)
    active = ~on_axis
    ell = l_max
    while np.any(active & (quiet < 3)):
        ell += 1
        if ell > l_cap:
            tail[active & (quiet < 3)] = np.inf
            break
        sel = np.nonzero(active & (quiet < 3))[0]
        term = np.abs(mode_kernel_at(bank[ell], t, rx[sel], ry[sel])) * zonal_at_one(N, ell)
        tail[sel] += term
        abs_sum[sel] += term
        small = term <= tail_rtol * abs_sum[sel]
        quiet[sel] = np.where(small, quiet[sel] + 1, 0)
    return kmu, tail


def assemble_kernel(bank, t, r_x, r_y, cos_gamma=1.0, l_max=32) -> KernelEvaluation:
    """Single evaluation of k_mu and k = k_mu / (1 + |y|^alpha) with its tail bound."""
    kmu, tail = kernel_values(bank, t, [r_x], [r_y], [cos_gamma], l_max=l_max)
    value = float(kmu[0])
    tb = float(tail[0])
    return KernelEvaluation(t=float(t), r_x=float(r_x), r_y=float(r_y),
                            cos_gamma=float(cos_gamma), value_kmu=value,
                            value_k=value / float(bank.params.diffusion(r_y)),
                            tail_bound=tb, l_max=int(l_max),
                            resolved=bool(tb <= 1e-6 * abs(value)))


def apply_semigroup(basis: EigenBasis, t, f):
    """Exact spectral action ``sum_i exp(-lambda_i t) (v_i^T M f) v_i`` on node values.

    ``f`` may be a vector or a (M, k) array of column profiles.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy()
    n = basis.kept(t)
    V = basis.vectors[:, :n]
    w = np.exp(-basis.eigenvalues[:n] * t)
    coef = V.T @ (basis.mass[:, None] * f if f.ndim == 2 else basis.mass * f)
    coef = coef * (w[:, None] if f.ndim == 2 else w)
    return V @ coef


def apply_semigroup_modes(bank, t, profiles):
    """Mode-resolved action: ``profiles`` maps ell to node values."""
    return {ell: apply_semigroup(bank[ell], t, f) for ell, f in profiles.items()}


def ground_state(bank) -> GroundState:
    """Lowest ell = 0 eigenpair with the eigenvector made positive."""
    basis = bank[0] if not isinstance(bank, EigenBasis) else bank
    if basis.ell != 0:
        raise SpectralError("the ground state lives in the ell = 0 mode")
    v = basis.vectors[:, 0].copy()
    if v.sum() < 0:
        v = -v
    if not np.all(v > 0):
        bad = int(np.sum(v <= 0))
        raise SpectralError(f"ground state has {bad} non-positive node values after sign fix")
    return GroundState(lambda1=float(basis.eigenvalues[0]), psi0=v, grid=basis.grid,
                       mass=basis.mass)


def spectral_gap(bank, l_max=1):
    """Distance from lambda_1 to the next eigenvalue over modes 0..l_max."""
    lam1 = bank[0].eigenvalues[0]
    nxt = [bank[0].eigenvalues[1]] + [bank[ell].eigenvalues[0] for ell in range(1, l_max + 1)]
    return float(min(nxt) - lam1)
