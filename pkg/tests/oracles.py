"""Brute-force reference implementations used by the tests.

Nothing here imports the package's linear-algebra code paths: matrices are
built with explicit Kronecker products and bit manipulations, evolution uses
``scipy.linalg.expm``.
"""
from __future__ import annotations

import math
from functools import reduce

import numpy as np
import scipy.linalg as sla

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"x": X, "y": Y, "z": Z}


def kron_sites(n: int, factors: dict[int, np.ndarray]) -> np.ndarray:
    """⊗ over linear indices 0..n-1, index 0 most significant."""
    return reduce(np.kron, [factors.get(i, I2) for i in range(n)])


def ising_dense(n: int, eps: float, periodic: bool = True) -> np.ndarray:
    H = sum(kron_sites(n, {i: (I2 - Z) / 2}) for i in range(n))
    bonds = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if periodic and n > 2 else [])
    for i, j in bonds:
        H = H - eps * kron_sites(n, {i: X, j: X})
    return H


def shift_matrix(n: int, s: int) -> np.ndarray:
    """Permutation moving the spin at linear index i to index i + s (mod n)."""
    dim = 2 ** n
    P = np.zeros((dim, dim))
    for b in range(dim):
        bits = [(b >> (n - 1 - i)) & 1 for i in range(n)]
        new = [0] * n
        for i in range(n):
            new[(i + s) % n] = bits[i]
        c = int("".join(map(str, new)), 2)
        P[c, b] = 1
    return P


def heisenberg_expm(H: np.ndarray, A: np.ndarray, t: float) -> np.ndarray:
    U = sla.expm(-1j * H * t)
    return U.conj().T @ A @ U


def ising_certificate(eps: float) -> tuple[float, float, float]:
    """(λ*, C, v*) in closed form for F(r) = (1+r)^-2 on the chain.

    ‖Φ‖_λ = max(1 + 2ε, 4ε e^λ), C = 8(π²/3 - 1); v_λ = 2‖Φ‖_λ C/λ is
    minimal at the kink e^λ = (1 + 2ε)/(4ε) whenever that λ exceeds 1.
    """
    C = 8 * (math.pi ** 2 / 3 - 1)
    lam = math.log((1 + 2 * eps) / (4 * eps))
    return lam, C, 2 * (1 + 2 * eps) * C / lam


def momentum_dims(n: int) -> list[int]:
    """Dimension of each momentum sector from the spectrum of the shift."""
    w = np.linalg.eigvals(shift_matrix(n, 1))
    k = np.mod(np.rint(np.angle(w) * n / (2 * np.pi)), n).astype(int)
    return np.bincount(k, minlength=n).tolist()
