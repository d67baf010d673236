"""Energy-momentum filtering of operators and their Arveson spectra.

Operators live in a :class:`SpectralFrame`, the joint eigenbasis of H and
the lattice translations (optionally truncated to levels with E - E0 below
a ceiling).  With U(t, x) = e^{iHt} U(x) and U(x)|m> = e^{-ip_m x}|m>,

    <m| U(t,x) A U(t,x)* |n> = e^{i(E_m - E_n)t - i(p_m - p_n)x} <m|A|n>,

so smearing with f multiplies each matrix element by f̂(E_m - E_n, p_m - p_n)
where

    f̂(E, p) = (2π)^{-(d+1)/2} Σ_x ∫dt e^{iEt - ipx} f(t, x).

On a ring of N sites the spatial profile belonging to ĝ is the Riemann sum
g(x) = (2π)^{-d/2} (2π/N)^d Σ_k e^{ip_k x} ĝ(p_k), which reproduces ĝ exactly
on the momentum grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, NumericalError
from .lattice import Lattice, wrap_momentum
from .interactions import translation_unitary
from .operators import LocalOperator, conditional_expectation, embed, matrix_norm, translate
from .spectral import JointSpectrum, MassShell


# -- filters ---------------------------------------------------------------------
def smooth_step(u):
    """C∞ step: 0 for u ≤ 0, 1 for u ≥ 1, built from e^{-1/u}."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class Window:
    """Plateau bump on one axis: 1 within half_width/2 of the center, 0 beyond half_width.

    ``axis`` is ``"E"`` or a momentum axis number; momentum windows measure
    distance on the circle.
    """

    axis: object
    center: float
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError("window half-width must be positive")
        if self.axis != "E" and self.half_width > np.pi:
            raise DomainError("momentum window wider than the Brillouin zone")

    def __call__(self, x):
        d = np.asarray(x, dtype=float) - self.center
        if self.axis != "E":
            d = wrap_momentum(d)
        w = self.half_width
        return smooth_step((w - np.abs(d)) / (w / 2))

    def reflected(self) -> "Window":
        return Window(self.axis, -self.center, self.half_width)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.half_width, self.center + self.half_width


@dataclass(frozen=True)
class FilterFunction:
    """f̂(E, p) as a product of windows; the empty product is the all-pass filter."""

    windows: tuple[Window, ...] = ()

    @classmethod
    def box(cls, E0: float | None = None, wE: float | None = None, p0=None, wp: float | None = None,
            dim: int = 1) -> "FilterFunction":
        ws = []
        if E0 is not None:
            ws.append(Window("E", float(E0), float(wE)))
        if p0 is not None:
            p0 = np.broadcast_to(np.asarray(p0, dtype=float), (dim,))
            ws.extend(Window(a, float(p0[a]), float(wp)) for a in range(dim))
        return cls(tuple(ws))

    def __call__(self, E, p):
        """Evaluate on broadcastable arrays; ``p`` carries a trailing axis in d > 1."""
        E = np.asarray(E, dtype=float)
        p = np.asarray(p, dtype=float)
        out = np.ones(np.broadcast_shapes(E.shape, p.shape[:-1] if p.ndim > E.ndim else p.shape))
        for w in self.windows:
            if w.axis == "E":
                out = out * w(E)
            else:
                out = out * w(p[..., w.axis] if p.ndim > E.ndim else p)
        return out

    def __mul__(self, other: "FilterFunction") -> "FilterFunction":
        return FilterFunction(self.windows + other.windows)

    def reflected(self) -> "FilterFunction":
        """f̃(E, p) = conj f̂(-E, -p); the windows are real."""
        return FilterFunction(tuple(w.reflected() for w in self.windows))

    def energy_part(self) -> "FilterFunction":
        return FilterFunction(tuple(w for w in self.windows if w.axis == "E"))

    def momentum_part(self) -> "FilterFunction":
        return FilterFunction(tuple(w for w in self.windows if w.axis != "E"))

    @property
    def energy_support(self) -> tuple[float, float] | None:
        ws = [w.support for w in self.windows if w.axis == "E"]
        if not ws:
            return None
        return max(a for a, _ in ws), min(b for _, b in ws)

    def describe(self) -> list[dict]:
        return [{"axis": w.axis, "center": w.center, "half_width": w.half_width, "shape": "bump"}
                for w in self.windows]


# -- spectral frame ----------------------------------------------------------------
class SpectralFrame:
    """Joint (E, p) eigenbasis, possibly truncated to E - E0 ≤ ceiling."""

    def __init__(self, js: JointSpectrum, ceiling: float | None = None):
        keep = np.arange(len(js)) if ceiling is None else np.flatnonzero(js.energies <= ceiling)
        if ceiling is not None and ceiling > js.ceiling:
            raise DomainError(f"ceiling {ceiling} above the completeness ceiling {js.ceiling} of the spectrum")
        self.js = js
        self.lattice: Lattice = js.lattice
        self.levels = keep
        self.energies = js.energies[keep]
        self.k = js.k[keep]
        self.grid = js.grid
        self.ks = self.grid.ks[self.k]                 # integer momenta, (n, d)
        self.momenta = self.grid.points[self.k]        # (n, d) in (-π, π]
        self.ceiling = js.ceiling if ceiling is None else float(ceiling)
        self.complete = keep.size == 2 ** self.lattice.size

    def __len__(self) -> int:
        return self.energies.size

    @cached_property
    def V(self) -> np.ndarray:
        return self.js.vectors(self.levels)

    @property
    def vacuum(self) -> np.ndarray:
        if self.js.ground_multiplicity != 1:
            raise DomainError("the ground state is degenerate")
        e = np.zeros(len(self), dtype=complex)
        e[0] = 1.0
        return e

    @cached_property
    def transfers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(ΔE, Δp, Δk) for all level pairs, Δ = row - column."""
        dE = self.energies[:, None] - self.energies[None, :]
        n = self.grid.n
        dk = (self.ks[:, None, :] - self.ks[None, :, :]) % n
        dp = wrap_momentum(2 * np.pi * dk / n)
        return dE, dp, dk

    @cached_property
    def eigenspaces(self) -> np.ndarray:
        """Label of the (E, k) eigenspace of every level."""
        lab = np.empty(len(self), dtype=int)
        order = np.lexsort((self.energies, self.k))
        cur, prev = -1, None
        for i in order:
            key = (int(self.k[i]), self.energies[i])
            if prev is None or key[0] != prev[0] or key[1] - prev[1] > 1e-9:
                cur += 1
            lab[i] = cur
            prev = key
        return lab

    def represent(self, a) -> "FrameOperator":
        """Matrix elements <m|a|n> of a local or full-space operator."""
        if isinstance(a, FrameOperator):
            return a
        if isinstance(a, LocalOperator):
            M = embed(a, self.lattice.full()).matrix
        else:
            M = a
        AV = M @ self.V
        return FrameOperator(self, self.V.conj().T @ np.asarray(AV))

    def full(self, op: "FrameOperator") -> np.ndarray:
        """Full-space matrix V M V†; only exact for a complete frame."""
        return (self.V @ op.matrix) @ self.V.conj().T

    def mask(self, predicate) -> np.ndarray:
        """Levels whose (E, p) satisfies ``predicate(E, p)`` (vectorized)."""
        p = self.momenta if self.grid.dim > 1 else self.momenta[:, 0]
        return np.asarray(predicate(self.energies, p), dtype=bool)

    def projector_residual(self, vec: np.ndarray, mask: np.ndarray) -> float:
        """‖(1 - P) vec‖ for the spectral projection onto ``mask``."""
        return float(np.linalg.norm(vec[~mask]))

    def to_dict(self) -> dict:
        return {"levels": len(self), "ceiling": self.ceiling if np.isfinite(self.ceiling) else None,
                "complete": self.complete}


@dataclass
class FrameOperator:
    """Operator given by its matrix in a spectral frame."""

    frame: SpectralFrame = field(repr=False)
    matrix: np.ndarray

    def __add__(self, other: "FrameOperator") -> "FrameOperator":
        return FrameOperator(self.frame, self.matrix + other.matrix)

    def __sub__(self, other: "FrameOperator") -> "FrameOperator":
        return FrameOperator(self.frame, self.matrix - other.matrix)

    def __matmul__(self, other):
        if isinstance(other, FrameOperator):
            return FrameOperator(self.frame, self.matrix @ other.matrix)
        return self.matrix @ other

    def scale(self, c: complex) -> "FrameOperator":
        return FrameOperator(self.frame, c * self.matrix)

    @property
    def adjoint(self) -> "FrameOperator":
        return FrameOperator(self.frame, self.matrix.conj().T)

    def norm(self) -> float:
        if not np.any(self.matrix):
            return 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def translate(self, x) -> "FrameOperator":
        """τ_x = U(x) · U(x)*."""
        ph = np.exp(-1j * (self.frame.momenta @ np.atleast_1d(np.asarray(x, dtype=float))))
        return FrameOperator(self.frame, ph[:, None] * self.matrix * ph.conj()[None, :])

    def evolve(self, t: float) -> "FrameOperator":
        """τ_t = e^{iHt} · e^{-iHt}."""
        ph = np.exp(1j * self.frame.energies * t)
        return FrameOperator(self.frame, ph[:, None] * self.matrix * ph.conj()[None, :])


def commutator_frame(a: FrameOperator, b: FrameOperator) -> FrameOperator:
    return FrameOperator(a.frame, a.matrix @ b.matrix - b.matrix @ a.matrix)


# -- smearing ----------------------------------------------------------------------
def smear(a, f: FilterFunction, frame: SpectralFrame) -> FrameOperator:
    """τ_f(a) by filtering matrix elements with f̂(ΔE, Δp)."""
    A = frame.represent(a)
    dE, dp, _ = frame.transfers
    w = f(dE, dp if frame.grid.dim > 1 else dp[..., 0])
    return FrameOperator(frame, A.matrix * w)


@dataclass
class QuadratureReport:
    operator: FrameOperator
    t_max: float
    step: float
    nodes: int
    truncation: float


def spatial_profile(f: FilterFunction, lattice: Lattice) -> np.ndarray:
    """g(x) on the lattice sites for the momentum part of ``f``."""
    grid = lattice.momentum_grid()
    d = lattice.dim
    P = grid.points
    ghat = f.momentum_part()(np.zeros(len(grid)), P if d > 1 else P[:, 0])
    X = np.array(lattice.coords, dtype=float)
    phase = np.exp(1j * (X @ P.T))
    return (2 * np.pi) ** (-d / 2) * (2 * np.pi / lattice.n) ** d * (phase @ ghat)


def time_profile(f: FilterFunction, t: np.ndarray, nodes: int | None = None) -> np.ndarray:
    """h(t) = (2π)^{-1/2} ∫ dE e^{-iEt} ĥ(E) for the energy part of ``f``.

    Trapezoid rule on the compact support; the integrand vanishes to all
    orders at the ends, so the rule converges faster than any power.
    """
    a, b = f.energy_support
    if not b > a:
        return np.zeros_like(t, dtype=complex)
    tmax = float(np.max(np.abs(t))) if np.size(t) else 0.0
    if nodes is None:
        # aliasing period 2π/dE must exceed twice the largest |t|
        nodes = int(max(256, np.ceil((b - a) * 4 * tmax / (2 * np.pi)) + 1))
    E = np.linspace(a, b, nodes)
    dE = E[1] - E[0]
    hE = f.energy_part()(E, np.zeros_like(E))
    return (2 * np.pi) ** -0.5 * dE * (np.exp(-1j * np.outer(t, E)) @ hE)


def smear_quadrature(a, f: FilterFunction, frame: SpectralFrame, tol: float = 1e-6,
                     t_max: float | None = None, max_t: float = 4000.0) -> QuadratureReport:
    """τ_f(a) from the defining sum and integral.

    The spatial sum runs over all translates of ``a``.  The time integral uses
    the trapezoid rule with a step fine enough that no energy transfer of the
    frame aliases into supp ĥ, and a cutoff T grown until the tail estimate
    (2π)^{-1/2} ∫_{T<|t|<2T} |h| · ‖a_g‖ is below ``tol``/10.
    """
    if not frame.lattice.periodic:
        raise DomainError("quadrature smearing needs a periodic lattice")
    lat = frame.lattice
    d = lat.dim
    if f.momentum_part().windows:
        g = spatial_profile(f, lat)
        # sum the translates on the full space, then change basis once
        acc = None
        for x, gx in zip(lat.coords, g):
            if abs(gx) == 0:
                continue
            term = _translate_full(a, lat, x) * ((2 * np.pi) ** (-d / 2) * gx)
            acc = term if acc is None else acc + term
        Ag = frame.represent(acc).matrix if acc is not None else np.zeros((len(frame), len(frame)), dtype=complex)
    else:
        Ag = frame.represent(a).matrix
    sup = f.energy_support
    if sup is None:
        return QuadratureReport(FrameOperator(frame, Ag), 0.0, 0.0, 0, 0.0)
    lo, hi = sup
    R = float(frame.energies.max() - frame.energies.min())
    step = 2 * np.pi / (1.05 * (R + max(abs(lo), abs(hi))) + 1e-12)
    norm_a = np.linalg.norm(Ag, 2) if np.any(Ag) else 0.0
    T = t_max if t_max is not None else max(20.0, 40.0 / max(hi - lo, 1e-3))
    while True:
        J = int(np.ceil(T / step))
        tail_t = step * np.arange(J + 1, 2 * J + 1)
        tail = (2 * np.pi) ** -0.5 * 2 * step * np.sum(np.abs(time_profile(f, tail_t))) * norm_a
        if tail <= tol / 10 or t_max is not None:
            break
        if 2 * T > max_t:
            raise NumericalError(f"time-quadrature tail {tail:.3g} above tolerance at T = {T:g}", residual=tail)
        T *= 2
    t = step * np.arange(-J, J + 1)
    w = np.full(t.size, step)
    w[[0, -1]] *= 0.5
    c = (2 * np.pi) ** -0.5 * w * time_profile(f, t)
    # Σ_j c_j e^{i(E_m - E_n) t_j} = (U diag(c) U†)_{mn}, U_{mj} = e^{iE_m t_j}
    U = np.exp(1j * np.outer(frame.energies, t))
    q = (U * c) @ U.conj().T
    if tail > tol:
        raise NumericalError(f"time-quadrature truncation estimate {tail:.3g} above {tol:g}", residual=tail)
    return QuadratureReport(FrameOperator(frame, Ag * q), float(T), float(step), int(t.size), float(tail))


def _translate_full(a, lattice: Lattice, x):
    """τ_x(a) as a full-space matrix (sparse when ``a`` is local)."""
    if isinstance(a, LocalOperator):
        return embed(translate(a, x), lattice.full()).sparse()
    U = translation_unitary(lattice, x)
    return U @ a @ U.conj().T


# -- Arveson spectrum ----------------------------------------------------------------
@dataclass
class ArvesonSpectrumEstimate:
    """Energy-momentum transfer bins carrying the largest eigenspace-block weight.

    Bins are ``(round(ΔE/de), Δk)``; the weight of a pair of eigenspaces is the
    Frobenius norm of the corresponding block of the operator.
    """

    bins: dict
    de: float
    threshold: float
    n: int
    dim: int = 1

    def __len__(self) -> int:
        return len(self.bins)

    def keys(self) -> set:
        return set(self.bins)

    def negated(self) -> "ArvesonSpectrumEstimate":
        neg = {(-e, tuple((-np.asarray(k)) % self.n)): w for (e, k), w in self.bins.items()}
        return ArvesonSpectrumEstimate(neg, self.de, self.threshold, self.n, self.dim)

    def momentum_marginal(self) -> set:
        return {k for _, k in self.bins}

    def energy_values(self) -> np.ndarray:
        return np.array(sorted({e for e, _ in self.bins}), dtype=float) * self.de

    def within_energy(self, lo: float, hi: float) -> bool:
        e = self.energy_values()
        return bool(e.size == 0 or (e.min() >= lo - self.de and e.max() <= hi + self.de))

    def contains(self, dE: float, dk, slack: int = 1) -> bool:
        b = int(np.rint(dE / self.de))
        dk = tuple(int(c) % self.n for c in np.atleast_1d(dk))
        return any((b + s, dk) in self.bins for s in range(-slack, slack + 1))

    def to_dict(self) -> dict:
        return {"de": self.de, "threshold": self.threshold,
                "bins": [{"dE": e * self.de, "dk": list(k), "weight": w}
                         for (e, k), w in sorted(self.bins.items())]}


def _block_weights(frame: SpectralFrame, M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lab = frame.eigenspaces
    G = sp.csr_matrix((np.ones(lab.size), (np.arange(lab.size), lab)))
    W = np.sqrt(np.abs(np.asarray((G.T @ sp.csr_matrix(np.abs(M) ** 2) @ G).todense())))
    first = np.zeros(G.shape[1], dtype=int)
    first[lab[::-1]] = np.arange(lab.size)[::-1]
    return W, first


def arveson_spectrum(a, frame: SpectralFrame, threshold: float = 1e-8,
                     resolution: float = 1e-3) -> ArvesonSpectrumEstimate:
    """Bins of (ΔE, Δp) on which ``a`` has matrix elements above ``threshold``·‖a‖."""
    A = frame.represent(a)
    W, rep = _block_weights(frame, A.matrix)
    span = float(frame.energies.max() - frame.energies.min())
    de = resolution * (span if span > 0 else 1.0)
    nrm = A.norm()
    thr = threshold * nrm
    bins: dict = {}
    if nrm == 0:
        return ArvesonSpectrumEstimate(bins, de, thr, frame.grid.n, frame.grid.dim)
    i, j = np.nonzero(W > thr)
    E, ks = frame.energies[rep], frame.ks[rep]
    eb = np.rint((E[i] - E[j]) / de).astype(int)
    dk = (ks[i] - ks[j]) % frame.grid.n
    for e, k, w in zip(eb, map(tuple, dk), W[i, j]):
        key = (int(e), tuple(int(c) for c in k))
        if w > bins.get(key, 0.0):
            bins[key] = float(w)
    return ArvesonSpectrumEstimate(bins, de, thr, frame.grid.n, frame.grid.dim)


@dataclass
class TransferReport:
    residual: float
    target_levels: int
    source_levels: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        return {"residual": self.residual, "tol": self.tol, "passed": self.passed,
                "target_levels": self.target_levels, "source_levels": self.source_levels}


def em_transfer_check(a, frame: SpectralFrame, delta: np.ndarray, transfer=None, tol: float = 1e-10,
                      threshold: float = 1e-12) -> TransferReport:
    """‖(1 - P(Δ + S)) a P(Δ)‖ with S the transfer set of ``a``.

    ``transfer`` is an :class:`ArvesonSpectrumEstimate` (Minkowski sum taken
    bin by bin, closure = neighbouring bins) or a :class:`FilterFunction`,
    in which case S is its support.  By default the estimate is computed
    with a threshold at the rounding level.
    """
    A = frame.represent(a)
    delta = np.asarray(delta, dtype=bool)
    src = np.flatnonzero(delta)
    if src.size == 0 or not np.any(A.matrix):
        return TransferReport(0.0, 0, int(src.size), tol)
    dE, dp, dk = frame.transfers
    if isinstance(transfer, FilterFunction):
        hit = transfer(dE[:, src], dp[:, src] if frame.grid.dim > 1 else dp[:, src, 0]) > 0
    else:
        est = transfer if transfer is not None else arveson_spectrum(A, frame, threshold)
        n, d = frame.grid.n, frame.grid.dim
        flat = lambda k: np.asarray(k).reshape(-1, d) @ (n ** np.arange(d)[::-1])
        span = n ** d
        keys = np.array([e * span + int(flat(k)[0]) for e, k in est.keys()], dtype=np.int64)
        eb = np.rint(dE[:, src] / est.de).astype(np.int64)
        kf = flat(dk[:, src].reshape(-1, d)).reshape(eb.shape)
        hit = np.zeros(eb.shape, dtype=bool)
        for s in (-1, 0, 1):
            hit |= np.isin((eb + s) * span + kf, keys)
    target = hit.any(axis=1)
    block = A.matrix[np.ix_(~target, src)]
    res = float(np.linalg.norm(block, 2)) if block.size and np.any(block) else 0.0
    return TransferReport(res, int(target.sum()), int(src.size), tol)


# -- almost locality -----------------------------------------------------------------
@dataclass
class AlmostLocalityProfile:
    radii: list
    distances: list
    center: int

    @property
    def monotone(self) -> bool:
        d = np.asarray(self.distances)
        return bool(np.all(np.diff(d) <= 1e-12))

    def first_below(self, level: float) -> int | None:
        for r, v in zip(self.radii, self.distances):
            if v < level:
                return r
        return None

    def to_dict(self) -> dict:
        return {"center": self.center, "monotone": self.monotone,
                "profile": [{"r": r, "distance": v} for r, v in zip(self.radii, self.distances)]}


def almost_locality_profile(a, lattice: Lattice, radii, center: int = 0,
                            frame: SpectralFrame | None = None) -> AlmostLocalityProfile:
    """‖a - Π_r(a)‖ with Π_r the tracial conditional expectation onto the ball of radius r."""
    if isinstance(a, FrameOperator):
        if not a.frame.complete:
            raise DomainError("almost-locality needs the operator on the full space")
        M = a.frame.full(a)
    elif isinstance(a, LocalOperator):
        M = embed(a, lattice.full()).matrix
    else:
        M = a
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    full = lattice.full()
    big = LocalOperator(full, M)
    out = []
    for r in radii:
        reg = lattice.ball(center, r)
        Pi = conditional_expectation(big, reg)
        D = M - np.asarray(embed(Pi, full).matrix.toarray() if sp.issparse(embed(Pi, full).matrix)
                           else embed(Pi, full).matrix)
        out.append(matrix_norm(D) if np.any(D) else 0.0)
    return AlmostLocalityProfile(list(radii), [float(v) for v in out], center)


# -- harmonic bound -------------------------------------------------------------------
@dataclass
class HarmonicReport:
    radii: list
    lhs: list
    rhs_sum: list
    constant: float

    @property
    def passed(self) -> bool:
        return all(np.isfinite(l) and l <= self.constant * s * (1 + 1e-9) + 1e-14
                   for l, s in zip(self.lhs, self.rhs_sum))

    def to_dict(self) -> dict:
        return {"constant": self.constant, "passed": self.passed,
                "rows": [{"radius": r, "lhs": l, "rhs": self.constant * s, "commutator_sum": s}
                         for r, l, s in zip(self.radii, self.lhs, self.rhs_sum)]}


def harmonic_bound_check(a, frame: SpectralFrame, delta: np.ndarray, radii=(0, 1, 2),
                         center: int = 0) -> HarmonicReport:
    """Compare ‖P(Δ) Σ_{x∈Λ} τ_x(a*a) P(Δ)‖ with C Σ_{x∈Λ-Λ} ‖[a*, τ_x(a)]‖ on balls Λ.

    C is fitted on the smallest ball and then held fixed.
    """
    if not frame.complete:
        raise DomainError("the harmonic bound is evaluated on a complete frame")
    A = frame.represent(a)
    est = arveson_spectrum(A, frame)
    if len(est) and not est.within_energy(-np.inf, -est.de):
        raise DomainError("the transfer of a must lie in negative energies")
    delta = np.asarray(delta, dtype=bool)
    lat = frame.lattice
    AA = A.adjoint @ A
    lhs, rhs = [], []
    comm_cache: dict = {}
    for r in radii:
        ball = lat.ball(center, r)
        S = sum((AA.translate(lat.coord(i)).matrix for i in ball.indices),
                np.zeros_like(AA.matrix))
        blk = S[np.ix_(delta, delta)]
        lhs.append(float(np.linalg.norm(blk, 2)) if blk.size and np.any(blk) else 0.0)
        diffs = {tuple(np.atleast_1d(lat.wrap(np.subtract(lat.coord(i), lat.coord(j)))))
                 for i in ball.indices for j in ball.indices}
        tot = 0.0
        for x in diffs:
            if x not in comm_cache:
                comm_cache[x] = commutator_frame(A.adjoint, A.translate(np.array(x))).norm()
            tot += comm_cache[x]
        rhs.append(tot)
    c = lhs[0] / rhs[0] if rhs[0] > 0 else 0.0
    return HarmonicReport(list(radii), lhs, rhs, float(c))


# -- creation operators ------------------------------------------------------------
@dataclass
class CreationOperator:
    operator: FrameOperator
    filter: FilterFunction
    target: tuple[float, np.ndarray]
    diagnostics: dict
    warnings: list

    @property
    def passed(self) -> bool:
        return bool(self.diagnostics.get("passed", False))


def shell_mask(frame: SpectralFrame, shell: MassShell, tol: float = 1e-8) -> np.ndarray:
    """Levels lying on the shell: E = Σ(p_k) at their own momentum."""
    sig = shell.sigma.reshape(-1)[frame.k]
    on = np.abs(frame.energies - sig) <= tol
    # only the shell representative levels themselves
    idx = np.isin(frame.levels, shell.levels)
    return on & idx


def make_creation_operator(seed: LocalOperator, frame: SpectralFrame, shell: MassShell, p0,
                           widths: tuple[float, float], battery=None,
                           density_tol: float = 1e-6) -> CreationOperator:
    """B* = τ_f(seed) for a bump window around the shell point (Σ(p0), p0)."""
    grid = frame.grid
    k0 = grid.nearest(p0)
    E0 = float(shell.sigma.reshape(-1)[k0])
    p0v = grid.points[k0]
    wE, wp = widths
    # wp = None: energy window only, momentum selection left to the packet
    f = FilterFunction.box(E0, wE, None if wp is None else p0v, wp, dim=grid.dim)
    if E0 + wE > frame.ceiling:
        raise DomainError(f"window top {E0 + wE:.6g} above the frame ceiling {frame.ceiling:.6g}")
    p = frame.momenta if grid.dim > 1 else frame.momenta[:, 0]
    inside = f(frame.energies, p) > 0
    on = shell_mask(frame, shell)
    bad = np.flatnonzero(inside & ~on)
    if bad.size:
        pts = [(float(frame.energies[i]), int(frame.k[i])) for i in bad[:10]]
        raise DomainError(f"window meets non-shell spectrum at (E, k) = {pts}")
    B = smear(seed, f, frame)
    om = frame.vacuum
    v = B @ om
    warnings = []
    diag = {"vacuum_annihilation": float(np.linalg.norm(B.adjoint @ om)),
            "shell_residual": frame.projector_residual(v, inside & on),
            "norm": float(np.linalg.norm(v))}
    if diag["norm"] <= 1e-12:
        warnings.append("seed exhausted: B*Ω vanishes for this window")
    # density: a battery of seeds must span the windowed shell sector
    if battery is None:
        battery = [translate(seed, x) for x in frame.lattice.translations()]
    vecs = np.column_stack([smear(s, f, frame) @ om for s in battery])
    target = np.flatnonzero(inside & on)
    if target.size:
        Qb, rs, _ = np.linalg.svd(vecs[target], full_matrices=False)
        rank_tol = max(rs.max() if rs.size else 0.0, 1e-300) * 1e-10
        Qb = Qb[:, rs > rank_tol]
        resid = np.eye(target.size) - Qb @ Qb.conj().T
        dens = float(np.max(np.linalg.norm(resid, axis=0))) if target.size else 0.0
    else:
        dens = 0.0
    diag["density_residual"] = dens
    diag["window_states"] = int(target.size)
    diag["passed"] = bool(diag["vacuum_annihilation"] <= 1e-10 and diag["shell_residual"] <= 1e-10
                          and diag["norm"] > 1e-12 and dens <= density_tol)
    return CreationOperator(B, f, (E0, p0v), diag, warnings)
