"""Joint energy-momentum spectra, mass shells and the checks built on them.

Energies are always measured from the ground state, momenta are indices
``k`` on the grid p_k = 2πk/N (translation eigenvalue e^{-ip}).

The measure-theoretic shell conditions are replaced by finite-grid
surrogates: curvature counts as vanishing when |Σ''| ≤ 1e-6, and spectral
coincidences are judged with a tolerance of 10 median level spacings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import AmbiguityError, CoverageError, DomainError
from .interactions import Interaction, build_hamiltonian
from .lattice import Lattice, MomentumGrid
from .operators import LocalOperator
from .sectors import Sector, diagonalize_sectors

CURVATURE_TOL = 1e-6
SPACING_FACTOR = 10.0


@dataclass
class JointSpectrum:
    """Levels (E - E0, k, charge) with access to their eigenvectors."""

    lattice: Lattice
    energies: np.ndarray
    k: np.ndarray
    charge: np.ndarray
    e0: float
    sectors: list[Sector] = field(repr=False)
    slot: np.ndarray = field(repr=False)      # (level, 2): sector number, column
    ceiling: float = np.inf                   # every level below is retained

    def __len__(self) -> int:
        return self.energies.size

    @property
    def grid(self) -> MomentumGrid:
        return self.lattice.momentum_grid()

    @property
    def momenta(self) -> np.ndarray:
        return self.grid.points[self.k]

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0]) if len(self) > 1 else np.inf

    @property
    def ground_multiplicity(self) -> int:
        return int(np.sum(self.energies <= 1e-10))

    @property
    def complete(self) -> bool:
        return len(self) == 2 ** self.lattice.size

    def vector(self, i: int) -> np.ndarray:
        s, j = self.slot[i]
        sec = self.sectors[s]
        return sec.basis @ sec.vectors[:, j]

    def vectors(self, idx) -> np.ndarray:
        """Full-space eigenvectors as columns, one sector product per group."""
        idx = np.asarray(idx)
        out = np.empty((2 ** self.lattice.size, idx.size), dtype=complex)
        for s in np.unique(self.slot[idx, 0]):
            sel = np.flatnonzero(self.slot[idx, 0] == s)
            sec = self.sectors[s]
            out[:, sel] = sec.basis @ sec.vectors[:, self.slot[idx[sel], 1]]
        return out

    def at_momentum(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.k == k)

    def points(self, tol: float = 1e-9) -> list[tuple[float, int, int]]:
        """Distinct (E, k, multiplicity) triples."""
        out = []
        for k in np.unique(self.k):
            e = np.sort(self.energies[self.k == k])
            start = 0
            for i in range(1, e.size + 1):
                if i == e.size or e[i] - e[i - 1] > tol:
                    out.append((float(e[start]), int(k), i - start))
                    start = i
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def median_spacing(self) -> float:
        e = np.unique(np.round(self.energies, 9))
        return float(np.median(np.diff(e))) if e.size > 1 else 1.0

    def to_dict(self) -> dict:
        return {"E0": self.e0, "gap": self.gap, "ceiling": self.ceiling if np.isfinite(self.ceiling) else None,
                "points": [{"E": e, "p_index": k, "mult": m} for e, k, m in self.points()]}


def momentum_sectors(h: LocalOperator, lattice: Lattice, charges="auto", levels: int | None = None,
                     ceiling: float | None = None) -> JointSpectrum:
    """Joint eigenbasis of H and the translations on a periodic lattice.

    ``levels`` keeps the lowest levels per sector; ``ceiling`` drops levels
    above E - E0 = ceiling.  The returned ``ceiling`` is the energy below
    which the spectrum is known to be complete.
    """
    secs = diagonalize_sectors(h, lattice, charges, levels)
    E = np.concatenate([s.energies for s in secs])
    e0 = float(E.min())
    slot = np.concatenate([np.column_stack([np.full(s.energies.size, i), np.arange(s.energies.size)]) for i, s in enumerate(secs)])
    K = np.concatenate([np.full(s.energies.size, s.k) for s in secs])
    Q = np.concatenate([np.full(s.energies.size, s.charge) for s in secs])
    E = E - e0
    top = np.inf
    if levels is not None:
        for s in secs:
            if s.energies.size < s.dim:
                top = min(top, float(s.energies.max() - e0))
    if ceiling is not None:
        keep = E <= ceiling
        E, K, Q, slot = E[keep], K[keep], Q[keep], slot[keep]
        top = min(top, ceiling)
    order = np.lexsort((K, E))
    return JointSpectrum(lattice, E[order], K[order], Q[order], e0, secs, slot[order], top)


def energy_residual(js: JointSpectrum, h: LocalOperator, idx=None) -> float:
    """max |<v|H|v> - E| over stored eigenvectors."""
    idx = np.arange(len(js)) if idx is None else np.asarray(idx)
    V = js.vectors(idx)
    ev = np.einsum("ij,ij->j", V.conj(), h.sparse() @ V).real
    return float(np.max(np.abs(ev - js.e0 - js.energies[idx])))


# -- trigonometric interpolation ---------------------------------------------------
def _frequencies(n: int) -> np.ndarray:
    m = np.fft.fftfreq(n, 1.0 / n)
    return m


class TrigInterpolant:
    """Periodic interpolant through samples on the grid p_k = 2πk/n.

    For even n the Nyquist coefficient is split evenly between ±n/2 so the
    interpolant of real data is real.
    """

    def __init__(self, samples: np.ndarray, dim: int = 1):
        self.dim = dim
        self.n = samples.shape[0]
        self.coef = np.fft.fftn(samples) / samples.size
        m = _frequencies(self.n)
        terms = [(m, np.ones(self.n))]
        if self.n % 2 == 0:
            half = self.n // 2
            m_alt = m.copy()
            m_alt[half] = half
            terms = [(m, np.where(np.arange(self.n) == half, 0.5, 1.0)),
                     (m_alt, np.where(np.arange(self.n) == half, 0.5, 0.0))]
        self._terms = terms
        self.order = self.n // 2

    def _eval(self, p, deriv):
        p = np.atleast_2d(np.asarray(p, float).T).T if self.dim > 1 else np.asarray(p, float)
        if self.dim == 1:
            out = np.zeros(np.shape(p), dtype=complex)
            for m, w in self._terms:
                fac = (1j * m) ** deriv[0] * w * self.coef
                out = out + np.tensordot(np.exp(1j * np.multiply.outer(p, m)), fac, axes=([-1], [0]))
            return out.real
        # separable evaluation for dim > 1
        p = np.asarray(p, float).reshape(-1, self.dim)
        out = np.zeros(p.shape[0], dtype=complex)
        for row, q in enumerate(p):
            acc = self.coef
            for a in range(self.dim - 1, -1, -1):
                vec = 0
                for m, w in self._terms:
                    vec = vec + w * (1j * m) ** deriv[a] * np.exp(1j * m * q[a])
                acc = acc @ vec
            out[row] = acc
        return out.real

    def __call__(self, p):
        return self._eval(p, (0,) * self.dim)

    def derivative(self, p, order: int = 1, axis: int = 0):
        d = [0] * self.dim
        d[axis] = order
        return self._eval(p, tuple(d))


@dataclass
class MassShell:
    """Isolated band Σ(p_k) with margins, classification and an interpolant."""

    n: int
    dim: int
    sigma: np.ndarray
    margin: np.ndarray
    levels: np.ndarray           # index of each shell point in the JointSpectrum
    window: tuple[float, float]
    interpolant: TrigInterpolant = field(repr=False)
    regular: bool | None = None
    valid: bool | None = None
    pseudo_relativistic: bool | None = None
    residual: float = 0.0
    curvature_tol: float = CURVATURE_TOL
    spectral_tol: float = 0.0

    @property
    def grid(self) -> MomentumGrid:
        return MomentumGrid(self.n, self.dim)

    def __call__(self, p):
        return self.interpolant(p)

    def velocity(self, p):
        return self.interpolant.derivative(p, 1)

    def curvature(self, p):
        return self.interpolant.derivative(p, 2)

    def to_dict(self) -> dict:
        return {"window": list(self.window), "sigma": self.sigma.tolist(), "isolation": self.margin.tolist(),
                "regular": self.regular, "valid": self.valid, "pseudo_relativistic": self.pseudo_relativistic,
                "interpolant_order": self.interpolant.order, "interpolant_residual": self.residual,
                "surrogates": {"curvature_tol": self.curvature_tol, "spectral_tol": self.spectral_tol}}


def _isolated_zeros(flags: np.ndarray) -> bool:
    """True when no two neighbouring grid points are flagged (periodic)."""
    if flags.all():
        return False
    return not np.any(flags & np.roll(flags, 1))


def extract_mass_shell(js: JointSpectrum, window: tuple[float, float], tol: float = 1e-9) -> MassShell:
    """Pick the single spectral point per momentum inside ``window``."""
    lo, hi = window
    n, dim = js.lattice.n, js.lattice.dim
    nk = n ** dim
    sigma = np.empty(nk)
    margin = np.empty(nk)
    levels = np.empty(nk, dtype=int)
    offenders, missing = [], []
    for k in range(nk):
        idx = js.at_momentum(k)
        e = js.energies[idx]
        inside = idx[(e >= lo) & (e <= hi)]
        distinct = np.unique(np.round(js.energies[inside] / tol)) if inside.size else []
        if len(distinct) == 0:
            missing.append(k)
            continue
        if len(distinct) > 1:
            offenders.append((k, js.energies[inside].tolist()))
            continue
        i = inside[0]
        sigma[k] = js.energies[i]
        levels[k] = i
        others = e[np.abs(e - sigma[k]) > tol]
        margin[k] = np.min(np.abs(others - sigma[k])) if others.size else np.inf
    if offenders:
        raise AmbiguityError(f"window {window} holds several levels at {len(offenders)} momenta", offenders)
    if missing:
        raise CoverageError(f"window {window} holds no level at momenta {missing}", missing)
    samples = sigma.reshape((n,) * dim)
    interp = TrigInterpolant(samples, dim)
    pts = js.grid.points
    resid = float(np.max(np.abs(interp(pts[:, 0] if dim == 1 else pts) - sigma)))
    shell = MassShell(n, dim, sigma, margin, levels, (lo, hi), interp, residual=resid)
    _classify(shell, js)
    return shell


def _classify(shell: MassShell, js: JointSpectrum):
    pts = shell.grid.points
    if shell.dim == 1:
        curv = shell.curvature(pts[:, 0])
        flat = np.abs(curv) <= shell.curvature_tol
        shell.regular = _isolated_zeros(flat)
        shell.valid = shell.regular
    else:
        hess_zero = np.ones(len(pts), dtype=bool)
        for a in range(shell.dim):
            for b in range(shell.dim):
                d = [0] * shell.dim
                d[a] += 1
                d[b] += 1
                h = shell.interpolant._eval(pts, tuple(d))
                hess_zero &= np.abs(h) <= shell.curvature_tol
        shell.valid = not hess_zero.all()
        shell.regular = None        # undecided beyond one dimension
    tol = SPACING_FACTOR * js.median_spacing()
    shell.spectral_tol = tol
    grid = shell.grid
    vac = np.flatnonzero((js.energies <= tol) & (js.k == 0))
    by_k = {k: np.delete(js.energies, vac)[np.delete(js.k, vac) == k] for k in range(len(grid))}
    worst = np.inf
    for i in range(len(grid)):
        for j in range(len(grid)):
            dk = grid.index(tuple(grid.ks[i] - grid.ks[j]))
            e = by_k[dk]
            if e.size:
                worst = min(worst, float(np.min(np.abs(e - (shell.sigma[i] - shell.sigma[j])))))
    shell.pseudo_relativistic = bool(worst > tol)


@dataclass
class VelocityReport:
    finite_difference: np.ndarray
    interpolant: np.ndarray
    discrepancy: float

    @property
    def max_speed(self) -> float:
        return float(np.max(np.abs(self.interpolant)))

    def to_dict(self) -> dict:
        return {"fd": self.finite_difference.tolist(), "interp": self.interpolant.tolist(),
                "discrepancy": self.discrepancy, "max_speed": self.max_speed}


def group_velocity(shell: MassShell) -> VelocityReport:
    """Σ'(p_k) by centred differences and by differentiating the interpolant (1D)."""
    if shell.dim != 1:
        raise DomainError("group velocity samples are implemented for one dimension")
    if shell.n < 4:
        raise DomainError("need at least 4 grid points")
    dp = 2 * np.pi / shell.n
    fd = (np.roll(shell.sigma, -1) - np.roll(shell.sigma, 1)) / (2 * dp)
    p = 2 * np.pi * np.arange(shell.n) / shell.n
    der = shell.velocity(p)
    return VelocityReport(fd, der, float(np.max(np.abs(fd - der))))


# -- bands and additivity -------------------------------------------------------------
def band_constant(js: JointSpectrum, eps: float, e_max: float) -> float:
    """Smallest c with |E - n| ≤ c n ε for every level below ``e_max``."""
    e = js.energies[js.energies < e_max]
    nearest = np.rint(e)
    pos = nearest >= 1
    if eps == 0:
        return 0.0
    zero_dev = np.abs(e[~pos]).max() if (~pos).any() else 0.0
    if zero_dev > 1e-9:
        return np.inf
    return float(np.max(np.abs(e[pos] - nearest[pos]) / (nearest[pos] * eps))) if pos.any() else 0.0


@dataclass
class AdditivityReport:
    tested: int
    skipped: int
    worst: float
    worst_pair: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return self.tested > 0 and self.worst <= self.tol + 1e-9

    def to_dict(self) -> dict:
        return {"tested": self.tested, "skipped": self.skipped, "worst": self.worst,
                "worst_pair": list(self.worst_pair), "tol": self.tol, "passed": self.passed}


def check_additivity(js: JointSpectrum, samples: int, tol_E: float, seed: int = 0,
                     sample_ceiling: float | None = None) -> AdditivityReport:
    """Sample spectral pairs and test that their sums lie in the spectrum.

    Pairs are drawn from levels below ``sample_ceiling`` (default: a quarter
    of the retained range, away from the saturated top of a finite spectrum);
    a pair is only tested when its energy sum lies below the retained ceiling.
    """
    rng = np.random.default_rng(seed)
    top = js.ceiling if np.isfinite(js.ceiling) else float(js.energies.max())
    cap = top / 4 if sample_ceiling is None else sample_ceiling
    pool = np.flatnonzero(js.energies <= cap)
    if pool.size == 0:
        raise DomainError("no levels below the sampling ceiling")
    grid = js.grid
    tested = skipped = 0
    worst, worst_pair = 0.0, ()
    attempts = 0
    while tested < samples and attempts < 50 * samples:
        attempts += 1
        a, b = rng.choice(pool, 2)
        e = js.energies[a] + js.energies[b]
        if e > top:
            skipped += 1
            continue
        k = grid.add(int(js.k[a]), int(js.k[b]))
        d = float(np.min(np.abs(js.energies[js.k == k] - e)))
        tested += 1
        if d > worst:
            worst, worst_pair = d, (float(js.energies[a]), int(js.k[a]), float(js.energies[b]), int(js.k[b]))
    return AdditivityReport(tested, skipped, worst, worst_pair, tol_E)


# -- gap flow -----------------------------------------------------------------------------
@dataclass
class GapFlow:
    sizes: list[int]
    gaps: list[float]
    limit: float
    slope: float
    floor: float
    judged: bool

    @property
    def monotone(self) -> str:
        d = np.diff(self.gaps)
        if np.all(d <= 1e-12):
            return "nonincreasing"
        if np.all(d >= -1e-12):
            return "nondecreasing"
        return "mixed"

    @property
    def verdict(self) -> str:
        if not self.judged:
            return "REPORT"
        return "PASS" if min(self.gaps) > self.floor else "FAIL"

    def to_dict(self) -> dict:
        return {"sizes": self.sizes, "gaps": self.gaps, "extrapolated": self.limit, "slope_in_1_over_N": self.slope,
                "trend": self.monotone, "floor": self.floor, "verdict": self.verdict}


def lowest_levels(h: LocalOperator, k: int = 3) -> np.ndarray:
    H = h.sparse()
    if H.shape[0] <= 2 ** 10:
        return np.linalg.eigvalsh(H.toarray())[:k]
    w = spla.eigsh(H, k=k, which="SA", tol=1e-13, v0=np.ones(H.shape[0]), return_eigenvectors=False)
    return np.sort(w)


def gap_flow(phi: Interaction, sizes, floor: float = 0.5, boundary: str = "periodic",
             small_coupling: float = 0.25) -> GapFlow:
    """γ(N) = E_1 - E_0 across system sizes with a 1/N extrapolation.

    Couplings at or above ``small_coupling`` are reported without a verdict.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise DomainError("gap flow needs at least three sizes")
    gaps = []
    for n in sizes:
        lat = Lattice(n, phi.dim, boundary)
        e = lowest_levels(build_hamiltonian(phi, lat), 2)
        gaps.append(float(e[1] - e[0]))
    slope, limit = np.polyfit(1.0 / np.array(sizes, float), gaps, 1)
    coupling = abs(phi.params.get("eps", 0.0))
    return GapFlow(sizes, gaps, float(limit), float(slope), floor, coupling < small_coupling)
