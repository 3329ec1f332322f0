"""Crank-Nicolson time stepping of a single mode, used to cross-check the spectral engine.

Nothing here touches eigen-decompositions: each step is one banded SPD solve of
``(M + dt/2 K) u_{n+1} = (M - dt/2 K) u_n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .grid import ModeOperator


class EvolutionError(RuntimeError):
    pass


@dataclass
class EvolutionState:
    ell: int
    time: float
    values: np.ndarray
    dt: float
    steps: int


def delta_init(mass, b):
    """Discrete Dirac mass at node b with unit mu-mass: ``e_b / m_b``."""
    mass = np.asarray(mass, dtype=float)
    if not 0 <= b < mass.size:
        raise IndexError(f"node index {b} out of range")
    f = np.zeros(mass.size)
    f[b] = 1.0 / mass[b]
    return f


def mu_norm(mass, u):
    """L2(mu) norm of node values (column-wise for 2-D input)."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.tensordot(mass, u * u, axes=(0, 0)))


def _banded_upper(op: ModeOperator, scale):
    """Upper banded storage of ``M + scale * K`` for cholesky_banded."""
    ab = np.zeros((2, op.M))
    ab[1] = op.mass + scale * op.diag
    ab[0, 1:] = scale * op.off
    return ab


def evolve(op: ModeOperator, f0, t, steps, return_state=False):
    """Advance ``f0`` (vector or column stack) to time ``t`` in ``steps`` CN steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not t > 0:
        raise ValueError("time must be positive")
    dt = t / steps
    try:
        chol = linalg.cholesky_banded(_banded_upper(op, 0.5 * dt))
    except linalg.LinAlgError as exc:
        raise EvolutionError(f"CN system is not positive definite for dt={dt}") from exc
    u = np.array(f0, dtype=float, copy=True)
    mass = op.mass if u.ndim == 1 else op.mass[:, None]
    for _ in range(steps):
        rhs = mass * u - 0.5 * dt * op.stiffness_apply(u)
        u = linalg.cho_solve_banded((chol, False), rhs, check_finite=False)
    if return_state:
        return EvolutionState(ell=op.ell, time=steps * dt, values=u, dt=dt, steps=steps)
    return u


def kernel_column(op: ModeOperator, b, t, steps):
    """CN approximation of the mode kernel column ``k_mu(t, ., r_b)``."""
    return evolve(op, delta_init(op.mass, b), t, steps)
