"""Translation-invariant interactions, decay functions, Lieb-Robinson
certificates and finite-volume Hamiltonians.

The decay function is the power law F(r) = (1 + r)^-(d + ε_F), tilted as
F_λ(r) = e^{-λr} F(r).  The interaction norm

    ‖Φ‖_λ = sup_x Σ_{X ∋ 0, x} ‖Φ(X)‖ / F_λ(|x|)

is an exact finite sum for finite-range Φ.  The velocity v_λ = 2‖Φ‖_λ C / λ
uses the uniform constant C = 2^{d+ε_F+1} ‖F‖, where ‖F‖ = Σ_x F(|x|).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb, factorial

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.sparse.linalg import norm as sparse_norm

from .errors import DomainError, NumericalError
from .lattice import Lattice, Region
from .operators import PAULI, LocalOperator, _reorder, embed


def shell_count(r, dim: int, metric: str = "linf"):
    """Number of points of Z^dim at distance exactly ``r`` from the origin."""
    r = np.asarray(r, dtype=float)
    if metric == "linf":
        out = (2 * r + 1) ** dim - np.maximum(2 * r - 1, 0) ** dim
    else:
        out = np.zeros_like(r)
        for k in range(1, dim + 1):
            # C(r-1, k-1) as a polynomial in r, valid for r >= 1
            c = np.ones_like(r)
            for j in range(k - 1):
                c = c * (r - 1 - j) / (j + 1)
            out = out + 2 ** k * comb(dim, k) * np.where(r >= k, c, 0.0)
        out = np.where(r == 0, 1.0, out)
    return out


@dataclass(frozen=True)
class DecayFunction:
    """Power-law decay F(r) = (1 + r)^-(dim + eps_f)."""

    eps_f: float = 1.0
    dim: int = 1
    metric: str = "linf"
    window: int = 10 ** 6

    def __post_init__(self):
        if self.eps_f <= 0:
            raise DomainError("eps_f must be positive")

    def __call__(self, r, lam: float = 0.0):
        r = np.asarray(r, dtype=float)
        return np.exp(-lam * r) * (1 + r) ** (-(self.dim + self.eps_f))

    @cached_property
    def _norm(self) -> tuple[float, float]:
        r = np.arange(self.window + 1, dtype=float)
        head = float(np.sum(shell_count(r, self.dim, self.metric) * self(r)))
        # shell(r) <= K (1 + r)^(d-1), so the tail is at most K (1 + R)^-ε / ε
        if self.metric == "linf":
            K = self.dim * 2.0 ** self.dim
        else:
            K = sum(2.0 ** k * comb(self.dim, k) / factorial(k - 1) for k in range(1, self.dim + 1))
        tail = K * (1.0 + self.window) ** (-self.eps_f) / self.eps_f
        return head, tail

    @property
    def norm(self) -> float:
        """Σ_x F(|x|) over the truncation window."""
        return self._norm[0]

    @property
    def tail_bound(self) -> float:
        """Upper bound on the part of ‖F‖ beyond the window."""
        return self._norm[1]

    @property
    def c_bound(self) -> float:
        """Uniform constant C ≥ C_λ, using the window sum plus its tail bound."""
        return 2 ** (self.dim + self.eps_f + 1) * (self.norm + self.tail_bound)

    def describe(self) -> dict:
        return {"family": "power", "eps_f": self.eps_f, "dim": self.dim, "metric": self.metric,
                "window": self.window, "norm": self.norm, "tail_bound": self.tail_bound,
                "C": self.c_bound}


@dataclass(frozen=True)
class Term:
    """One generator term: a Hermitian matrix on ``offsets`` (in that order)."""

    offsets: tuple[tuple[int, ...], ...]
    matrix: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class Interaction:
    """Finite-range translation-invariant interaction given by generator terms."""

    dim: int
    terms: tuple[Term, ...]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for t in self.terms:
            m = np.asarray(t.matrix)
            if m.shape != (2 ** len(t.offsets),) * 2:
                raise DomainError(f"term {t.label!r}: matrix does not match {len(t.offsets)} sites")
            if np.max(np.abs(m - m.conj().T)) > 1e-12:
                raise DomainError(f"term {t.label!r} is not Hermitian")
            if any(len(o) != self.dim for o in t.offsets):
                raise DomainError(f"term {t.label!r} has offsets of the wrong dimension")

    def scaled(self, c: float) -> "Interaction":
        return Interaction(self.dim, tuple(Term(t.offsets, c * np.asarray(t.matrix), t.label) for t in self.terms),
                           self.name, dict(self.params, scale=c))

    def classes(self) -> list[tuple[tuple[tuple[int, ...], ...], np.ndarray]]:
        """Generator terms merged by support shape: (sorted offsets, summed matrix)."""
        merged: dict = {}
        for t in self.terms:
            lo = np.min(np.array(t.offsets), axis=0)
            offs = [tuple(np.array(o) - lo) for o in t.offsets]
            key = tuple(sorted(offs))
            m = _reorder(np.asarray(t.matrix, complex), [key.index(o) for o in offs], list(range(len(key))))
            merged[key] = merged.get(key, 0) + m
        return list(merged.items())

    @property
    def range(self) -> int:
        """Largest ℓ∞ diameter of a term support."""
        return max((int(np.max(np.ptp(np.array(k), axis=0))) if len(k) > 1 else 0) for k, _ in self.classes())


def interaction_norm(phi: Interaction, lam: float, f: DecayFunction) -> float:
    """‖Φ‖_λ for a finite-range interaction."""
    if lam <= 0:
        raise DomainError("λ must be positive")
    if f.dim != phi.dim:
        raise DomainError("decay function and interaction differ in dimension")
    weight: dict = {}
    for offs, m in phi.classes():
        nu = float(np.linalg.norm(m, 2))
        for o in offs:
            # translate the support so that site o sits at the origin
            X = [tuple(np.subtract(y, o)) for y in offs]
            for x in X:
                weight[x] = weight.get(x, 0.0) + nu
    best = 0.0
    for x, w in weight.items():
        d = np.abs(np.array(x))
        r = d.max() if f.metric == "linf" else d.sum()
        best = max(best, w / float(f(r, lam)))
    return best


@dataclass(frozen=True)
class LRCertificate:
    """Lieb-Robinson velocity certificate at the best λ found."""

    lam: float
    norm: float
    c: float
    v: float
    grid: tuple[float, ...]
    table: tuple[tuple[float, float, float, float], ...]
    metric: str
    decay: dict

    def envelope(self, t, dist_sum: float, norm_a: float, norm_b: float):
        """Explicit bound (2‖A‖‖B‖/C) e^{λ v|t|} Σ_{w,z} F_λ(d(w,z)).

        ``dist_sum`` is the double sum of F_λ over site pairs of the two supports.
        """
        return 2 * norm_a * norm_b / self.c * np.exp(self.lam * self.v * np.abs(t)) * dist_sum

    def to_dict(self) -> dict:
        return {"lambda_star": self.lam, "norm_lambda": self.norm, "C": self.c, "v_lambda": self.v,
                "grid": list(self.grid), "metric": self.metric, "decay": self.decay,
                "table": [{"lambda": a, "norm": b, "C": c, "v": d} for a, b, c, d in self.table]}


def lr_velocity(phi: Interaction, lambda_grid, f: DecayFunction | None = None, refine: bool = True) -> LRCertificate:
    """Search λ for the smallest certified velocity v_λ = 2‖Φ‖_λ C / λ.

    A grid scan is followed by a bounded golden-section refinement around the
    best grid point; the refined value never exceeds the grid optimum.
    """
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise DomainError("empty λ grid")
    f = f or DecayFunction(dim=phi.dim)
    C = f.c_bound

    def vel(lam):
        return 2 * interaction_norm(phi, lam, f) * C / lam

    table = tuple((lam, interaction_norm(phi, lam, f), C, vel(lam)) for lam in grid)
    i = int(np.argmin([row[3] for row in table]))
    lam_star, v_star = table[i][0], table[i][3]
    if refine and len(grid) > 1:
        sg = sorted(grid)
        j = sg.index(lam_star)
        lo, hi = sg[max(j - 1, 0)], sg[min(j + 1, len(sg) - 1)]
        res = optimize.minimize_scalar(vel, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
        if res.success and res.fun < v_star:
            lam_star, v_star = float(res.x), float(res.fun)
    return LRCertificate(lam_star, interaction_norm(phi, lam_star, f), C, v_star, tuple(grid), table,
                         f.metric, f.describe())


# -- models ------------------------------------------------------------------
def _unit(dim, a):
    return tuple(1 if b == a else 0 for b in range(dim))


def ising(eps: float, dim: int = 1) -> Interaction:
    """Transverse-field Ising: (1 - σ3)/2 on sites, -ε σ1σ1 on bonds."""
    zero = (0,) * dim
    terms = [Term((zero,), (np.eye(2) - PAULI["z"]) / 2, "(1-σ3)/2")]
    if eps != 0:
        xx = -eps * np.kron(PAULI["x"], PAULI["x"])
        terms += [Term((zero, _unit(dim, a)), xx, f"-εσ1σ1[{a}]") for a in range(dim)]
    return Interaction(dim, tuple(terms), "ising", {"eps": eps})


def heisenberg(jxy: float = 1.0, jz: float = 1.0, h: float = 0.0, dim: int = 1) -> Interaction:
    """Anisotropic Heisenberg (XXZ) model; construction only."""
    zero = (0,) * dim
    bond = jxy * (np.kron(PAULI["x"], PAULI["x"]) + np.kron(PAULI["y"], PAULI["y"])) \
        + jz * np.kron(PAULI["z"], PAULI["z"])
    terms = [Term((zero, _unit(dim, a)), bond.real.astype(complex), f"xxz[{a}]") for a in range(dim)]
    if h:
        terms.append(Term((zero,), -h * PAULI["z"], "field"))
    return Interaction(dim, tuple(terms), "heisenberg", {"jxy": jxy, "jz": jz, "h": h})


MODELS = {"ising": ising, "heisenberg": heisenberg}


# -- assembly ------------------------------------------------------------------
def local_terms(phi: Interaction, lattice: Lattice) -> list[LocalOperator]:
    """All translates Φ(X) with X inside the lattice (wrapping if periodic)."""
    if lattice.dim != phi.dim:
        raise DomainError(f"interaction is {phi.dim}-dimensional, lattice is {lattice.dim}-dimensional")
    out, seen = [], set()
    for ti, t in enumerate(phi.terms):
        for base in lattice.coords:
            sites = [tuple(b + o for b, o in zip(base, off)) for off in t.offsets]
            if not all(lattice.contains(s) for s in sites):
                continue
            idx = [lattice.index(s) for s in sites]
            if len(set(idx)) < len(idx):
                continue
            key = (ti, frozenset(idx))
            if key in seen:
                continue
            seen.add(key)
            reg = Region(lattice, tuple(idx))
            m = _reorder(np.asarray(t.matrix, complex), idx, list(reg.indices))
            out.append(LocalOperator(reg, m, t.label, True))
    return out


def build_hamiltonian(phi: Interaction, lattice: Lattice) -> LocalOperator:
    """H_Λ = Σ_{X⊂Λ} Φ(X) as a sparse Hermitian operator on the full lattice."""
    full = lattice.full()
    dim = 2 ** lattice.size
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for term in local_terms(phi, lattice):
        H = H + sp.csr_matrix(embed(term, full).matrix)
    H.sum_duplicates()
    H.eliminate_zeros()
    h = LocalOperator(full, H, f"H[{phi.name}]", True)
    if lattice.periodic:
        dev = translation_defect(h, lattice)
        if dev > 1e-12:
            raise NumericalError(f"Hamiltonian breaks translation invariance by {dev:.3g}", residual=dev)
    return h


def basis_permutation(perm: np.ndarray) -> np.ndarray:
    """Image of every basis index when site i is moved to site perm[i]."""
    n = len(perm)
    b = np.arange(2 ** n, dtype=np.int64)
    out = np.zeros_like(b)
    for i, j in enumerate(perm):
        out |= ((b >> (n - 1 - i)) & 1) << (n - 1 - int(j))
    return out


def translation_unitary(lattice: Lattice, x) -> sp.csr_matrix:
    """Permutation matrix U(x) with U(x) A U(x)† = translate(A, x)."""
    img = basis_permutation(lattice.translation_permutation(x))
    n = img.size
    return sp.csr_matrix((np.ones(n, dtype=complex), (img, np.arange(n))), shape=(n, n))


def translation_defect(h: LocalOperator, lattice: Lattice) -> float:
    """Frobenius norm of U H U† - H for unit shifts (bounds the operator norm)."""
    H = h.sparse()
    worst = 0.0
    for a in range(lattice.dim):
        U = translation_unitary(lattice, _unit(lattice.dim, a))
        D = U @ H @ U.conj().T - H
        worst = max(worst, float(sparse_norm(D)) if D.nnz else 0.0)
    return worst
