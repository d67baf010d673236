"""Free-fermion solution of the periodic transverse-field Ising chain.

Independent of the exact-diagonalization path: the chain

    H = Σ_j (1 - σ3_j)/2 - ε Σ_j σ1_j σ1_{j+1}

maps under Jordan-Wigner (σ3 = 1 - 2n) to quadratic fermions.  The even
fermion-parity sector has antiperiodic momenta k = (2m+1)π/N, the odd sector
periodic momenta k = 2πm/N.  Paired modes (k, -k) are Bogoliubov rotated; the
self-conjugate momenta 0 and π stay unpaired.  Quasiparticle energy:

    Λ(k) = sqrt(1 + 4ε² - 4ε cos k)

Momenta are integers ``m`` with p = 2πm/N, matching a translation eigenvalue
e^{-ip}.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def quasiparticle_energy(k, eps: float):
    return np.sqrt(1 + 4 * eps ** 2 - 4 * eps * np.cos(k))


@dataclass(frozen=True)
class _Sector:
    parity: int            # required fermion parity, +1 even / -1 odd
    kappa: np.ndarray      # momenta in units of π/N
    energy: np.ndarray     # excitation energy of each mode
    vacuum: float
    vacuum_parity: int
    vacuum_kappa: int


@dataclass(frozen=True)
class IsingChainOracle:
    """Exact many-body spectrum of the periodic chain of ``n`` sites."""

    eps: float
    n: int

    def _sector(self, parity: int) -> _Sector:
        n, eps = self.n, self.eps
        kappa = np.arange(n) * 2 + (1 if parity > 0 else 0)
        kappa = kappa % (2 * n)
        k = np.pi * kappa / n
        a = 1 - 2 * eps * np.cos(k)
        lam = quasiparticle_energy(k, eps)
        unpaired = (kappa == 0) | (kappa == n)
        # paired modes: vacuum energy a - Λ per pair, i.e. (a - Λ)/2 per mode
        vac = 0.5 * np.sum((a - lam)[~unpaired]) + np.sum(np.minimum(a[unpaired], 0.0))
        filled = unpaired & (a < 0)
        energy = np.where(unpaired, np.abs(a), lam)
        return _Sector(parity, kappa, energy, float(vac),
                       -1 if filled.sum() % 2 else 1, int(kappa[filled].sum()))

    @cached_property
    def sectors(self) -> tuple[_Sector, _Sector]:
        return self._sector(+1), self._sector(-1)

    @cached_property
    def _levels(self):
        n = self.n
        occ = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
        count = occ.sum(axis=1)
        E, K, P = [], [], []
        for s in self.sectors:
            par = s.vacuum_parity * np.where(count % 2, -1, 1)
            sel = par == s.parity
            o = occ[sel]
            E.append(s.vacuum + o @ s.energy)
            kap = (s.vacuum_kappa + o @ s.kappa) % (2 * n)
            assert np.all(kap % 2 == 0)
            K.append((kap // 2) % n)
            P.append(np.full(sel.sum(), s.parity))
        E, K, P = map(np.concatenate, (E, K, P))
        order = np.lexsort((K, E))
        return E[order], K[order], P[order]

    def levels(self):
        """All 2^n eigenvalues with momentum index and spin-flip parity."""
        return self._levels

    @property
    def ground_energy(self) -> float:
        return float(self._levels[0][0])

    def spectrum(self) -> np.ndarray:
        """Sorted eigenvalues."""
        return self._levels[0]

    def gap(self) -> float:
        """E_1 - E_0, counting multiplicity."""
        e = self._levels[0]
        return float(e[1] - e[0])

    @property
    def band_offset(self) -> float:
        """Vacuum energy difference between odd and even sectors."""
        even, odd = self.sectors
        return odd.vacuum - even.vacuum

    def dispersion(self, p):
        """One-particle band Σ(p) measured from the ground state."""
        return self.band_offset + quasiparticle_energy(p, self.eps)

    def band(self) -> np.ndarray:
        """Σ on the momentum grid, indexed by m with p = 2πm/n."""
        p = 2 * np.pi * np.arange(self.n) / self.n
        return self.dispersion(p)

    def group_velocity(self, p):
        """dΣ/dp = 2ε sin p / Λ(p)."""
        return 2 * self.eps * np.sin(p) / quasiparticle_energy(p, self.eps)

    def curvature(self, p):
        lam = quasiparticle_energy(p, self.eps)
        return 2 * self.eps * np.cos(p) / lam - (2 * self.eps * np.sin(p)) ** 2 / lam ** 3
