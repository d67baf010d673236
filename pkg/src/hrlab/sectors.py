"""Block diagonalization by lattice momentum and an optional Z2 charge.

Basis states are grouped into translation orbits.  For a representative r
with orbit O(r), the sector vector at momentum p is

    |r, p> = |O(r)|^{-1/2} Σ_{x ∈ G/Stab(r)} e^{i p·x} |T_x r>

which satisfies U(y)|r, p> = e^{-i p·y}|r, p>.  Representatives whose
stabilizer carries a nontrivial character at p are dropped for that p.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalError
from .interactions import basis_permutation, translation_defect
from .lattice import Lattice
from .operators import LocalOperator

#: sectors up to this dimension are diagonalized densely even when only a
#: few levels are requested
DENSE_SECTOR = 1200


def parity_charges(n_sites: int) -> np.ndarray:
    """Spin-flip parity (+1 / -1) of every basis state."""
    b = np.arange(2 ** n_sites, dtype=np.int64)
    pop = np.zeros_like(b)
    for i in range(n_sites):
        pop += (b >> i) & 1
    return np.where(pop % 2, -1, 1)


def respects_charges(H: sp.spmatrix, charges: np.ndarray) -> bool:
    c = sp.coo_matrix(H)
    return bool(np.all(charges[c.row] == charges[c.col]))


@dataclass
class Sector:
    k: int                    # momentum-grid index
    charge: int
    basis: sp.csc_matrix      # full_dim x sector_dim, orthonormal columns
    energies: np.ndarray | None = None
    vectors: np.ndarray | None = None   # in sector coordinates

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


class SectorBasis:
    """Translation orbits of the computational basis of a periodic lattice."""

    def __init__(self, lattice: Lattice, charges: np.ndarray | None = None):
        if not lattice.periodic:
            raise DomainError("momentum sectors need a periodic lattice; use gap_flow for open chains")
        self.lattice = lattice
        self.shifts = np.array(lattice.translations(), dtype=int)
        n = lattice.n
        images = np.stack([basis_permutation(lattice.translation_permutation(x)) for x in self.shifts])
        g = np.argmin(images, axis=0)
        self.rep = images[g, np.arange(images.shape[1])]
        # s = T_{x_s} rep(s) with x_s = -shift[g]
        self.offset = (-self.shifts[g]) % n
        self.reps = np.unique(self.rep)
        stab = images[:, self.reps] == self.reps[None, :]
        self.orbit = len(self.shifts) // stab.sum(axis=0)
        # (k, rep) compatibility: k·x ≡ 0 mod n on the stabilizer
        grid = lattice.momentum_grid()
        kx = (grid.ks @ self.shifts.T) % n          # (n_k, n_shift)
        ok = np.ones((len(grid), len(self.reps)), dtype=bool)
        for j in range(len(self.shifts)):
            hit = stab[j]
            if hit.any():
                ok[:, hit] &= (kx[:, j] == 0)[:, None]
        self.compatible = ok
        self.grid = grid
        self.charges = charges
        self.rep_pos = {int(r): i for i, r in enumerate(self.reps)}

    def sector(self, k: int, charge: int | None = None) -> Sector:
        cols = np.flatnonzero(self.compatible[k])
        if self.charges is not None:
            cols = cols[self.charges[self.reps[cols]] == charge]
        col_of = np.full(len(self.reps), -1)
        col_of[cols] = np.arange(len(cols))
        rep_idx = np.searchsorted(self.reps, self.rep)
        states = np.flatnonzero(col_of[rep_idx] >= 0)
        ri = rep_idx[states]
        n = self.lattice.n
        phase = 2 * np.pi * (self.offset[states] @ self.grid.ks[k]) / n
        vals = np.exp(1j * phase) / np.sqrt(self.orbit[ri])
        Q = sp.csc_matrix((vals, (states, col_of[ri])), shape=(self.rep.size, len(cols)))
        return Sector(int(k), charge if charge is not None else 0, Q)

    def sectors(self) -> list[Sector]:
        qs = [None] if self.charges is None else sorted(set(np.unique(self.charges[self.reps]).tolist()), reverse=True)
        out = []
        for k in range(len(self.grid)):
            for q in qs:
                s = self.sector(k, q)
                if s.dim:
                    out.append(s)
        return out


def diagonalize_sectors(h: LocalOperator, lattice: Lattice, charges="auto", levels: int | None = None,
                        check: bool = True) -> list[Sector]:
    """Diagonalize ``h`` in every momentum (and charge) sector.

    ``levels`` keeps only the lowest few levels per sector, obtained with a
    sparse Lanczos solver when the sector is large.
    """
    if not lattice.periodic:
        raise DomainError("momentum sectors need a periodic lattice; use gap_flow for open chains")
    if check:
        dev = translation_defect(h, lattice)
        if dev > 1e-9:
            raise NumericalError(f"H does not commute with translations (defect {dev:.3g})", residual=dev)
    H = h.sparse()
    if isinstance(charges, str) and charges == "auto":
        c = parity_charges(lattice.size)
        charges = c if respects_charges(H, c) else None
    basis = SectorBasis(lattice, charges)
    out = []
    for s in basis.sectors():
        Hs = (s.basis.conj().T @ (H @ s.basis))
        if levels is None or s.dim <= max(DENSE_SECTOR, 3 * levels):
            Hd = Hs.toarray()
            Hd = (Hd + Hd.conj().T) / 2
            w, v = np.linalg.eigh(Hd)
            if levels is not None:
                w, v = w[:levels], v[:, :levels]
        else:
            v0 = np.ones(s.dim, dtype=complex)
            w, v = spla.eigsh(Hs, k=levels, which="SA", v0=v0, tol=1e-13)
            order = np.argsort(w)
            w, v = w[order], v[:, order]
        s.energies, s.vectors = w, v
        out.append(s)
    total = sum(s.dim for s in out)
    if total != 2 ** lattice.size:
        raise NumericalError(f"sector dimensions sum to {total}, expected {2 ** lattice.size}")
    return out
