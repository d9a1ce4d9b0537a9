"""Constructors for symplectic test matrices: rotations, blocks, random conjugators."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .symcore import SymplecticSpace


def rotation(theta: float) -> np.ndarray:
    """``[[cos, -sin], [sin, cos]]`` on one ``(q, p)`` plane; ``(1, -i)`` has eigenvalue ``e^{i theta}``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def hyperbolic(a: float) -> np.ndarray:
    return np.diag([a, 1.0 / a])


def shear(s: float = 1.0) -> np.ndarray:
    return np.array([[1.0, s], [0.0, 1.0]])


def embed_blocks(blocks) -> np.ndarray:
    """Direct sum of 2x2 blocks, block i acting on the plane ``(q_i, p_i)``."""
    n = len(blocks)
    S = np.zeros((2 * n, 2 * n), dtype=np.result_type(*blocks))
    for i, B in enumerate(blocks):
        idx = [i, n + i]
        S[np.ix_(idx, idx)] = B
    return S


def random_hamiltonian_matrix(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """``Omega @ Sym`` for a random symmetric ``Sym``: the generator of a linear Hamiltonian flow."""
    A = rng.standard_normal((2 * n, 2 * n))
    return SymplecticSpace(n).omega @ (scale * (A + A.T) / 2)


def random_symplectic(n: int, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    return sla.expm(random_hamiltonian_matrix(n, rng, scale))


def conjugate(S: np.ndarray, P: np.ndarray) -> np.ndarray:
    return P @ S @ np.linalg.inv(P)


def random_block_matrix(n: int, rng: np.random.Generator, kinds=("rotation", "identity", "hyperbolic", "shear"),
                        scale: float = 0.3):
    """Random direct sum of 2x2 blocks conjugated by a random symplectic matrix.

    Returns the matrix and the block kinds used.
    """
    chosen = [str(rng.choice(kinds)) for _ in range(n)]
    blocks = []
    for kind in chosen:
        if kind == "rotation":
            blocks.append(rotation(rng.uniform(0.2, np.pi - 0.2) * rng.choice([-1, 1])))
        elif kind == "identity":
            blocks.append(np.eye(2) * rng.choice([-1.0, 1.0]))
        elif kind == "hyperbolic":
            blocks.append(hyperbolic(rng.uniform(1.01, 2.0) * rng.choice([-1.0, 1.0])))
        elif kind == "shear":
            blocks.append(shear(rng.uniform(0.2, 1.0)))
        else:
            raise ValueError(f"unknown block kind {kind}")
    P = random_symplectic(n, rng, scale)
    return conjugate(embed_blocks(blocks), P), chosen


def random_stable(n: int, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    return random_block_matrix(n, rng, ("rotation", "rotation", "identity"), scale)[0]


def random_family(n: int, rng: np.random.Generator, scale: float = 0.3) -> list[np.ndarray]:
    """``[S, S^2, S^m]`` for a random stable ``S`` and a random power ``m`` in 3..6."""
    S = random_stable(n, rng, scale)
    m = int(rng.integers(3, 7))
    return [S, S @ S, np.linalg.matrix_power(S, m)]
