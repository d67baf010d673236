"""Heisenberg dynamics τ_t(A) = e^{iHt} A e^{-iHt} and light-cone measurements.

Three interchangeable propagators back :class:`EvolutionEngine`:

* ``dense``   full eigendecomposition, for small Hilbert spaces;
* ``sectors`` eigendecomposition per momentum sector (periodic lattices);
* ``krylov``  ``expm_multiply`` on the sparse Hamiltonian, for large open chains.

On large spaces evolved operators are implicit ``LinearOperator`` objects and
norms go through the iterative solver in :func:`hrlab.operators.matrix_norm`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DiagnosticError, DomainError
from .interactions import DecayFunction, Interaction, LRCertificate, build_hamiltonian
from .lattice import Lattice, dist
from .operators import (DENSE_NORM_DIM, LocalOperator, embed, matrix_norm, op_norm, pauli,
                        translate)
from .spectral import JointSpectrum, momentum_sectors

#: largest dimension diagonalized densely
DENSE_EIG_DIM = 2 ** 11


class EvolutionEngine:
    """Exact propagator e^{-iHt} for a Hamiltonian on a finite lattice."""

    def __init__(self, h: LocalOperator, method: str = "auto", js: JointSpectrum | None = None):
        self.h = h
        self.lattice = h.lattice
        self.dim = h.dim
        if method == "auto":
            if js is not None or (self.lattice.periodic and self.dim > 2 ** 10):
                method = "sectors"
            elif self.dim <= DENSE_EIG_DIM:
                method = "dense"
            else:
                method = "krylov"
        self.method = method
        if method == "dense":
            if self.dim > DENSE_EIG_DIM:
                raise DomainError(f"dense diagonalization capped at dimension {DENSE_EIG_DIM}")
            w, v = np.linalg.eigh(h.dense())
            self.e0 = float(w[0])
            self.energies, self.V = w - self.e0, v
        elif method == "sectors":
            self.js = js if js is not None else momentum_sectors(h, self.lattice)
            if not self.js.complete:
                raise DomainError("sector propagation needs the complete spectrum")
            self.e0 = self.js.e0
            secs = self.js.sectors
            # one sparse change of basis into all sectors, then dense blocks
            self._W = sp.hstack([s.basis for s in secs]).tocsr()
            self._Wh = self._W.conj().T.tocsr()
            edges = np.cumsum([0] + [s.dim for s in secs])
            self._blocks = [(slice(int(a), int(b)), s.vectors, s.energies - self.e0)
                            for a, b, s in zip(edges[:-1], edges[1:], secs)]
        elif method == "krylov":
            self._H = h.sparse()
            self.e0 = 0.0
        else:
            raise DomainError(f"unknown evolution method {method!r}")

    # -- diagnostics -----------------------------------------------------------
    def reconstruction_residual(self) -> float:
        """‖H - V E V†‖ / ‖H‖ for the dense engine."""
        if self.method != "dense":
            raise DomainError("only the dense engine stores a global eigenbasis")
        H = self.h.dense()
        R = (self.V * (self.energies + self.e0)) @ self.V.conj().T
        return float(np.linalg.norm(H - R, 2) / max(np.linalg.norm(H, 2), 1e-300))

    def unitarity_defect(self) -> float:
        if self.method == "dense":
            V = self.V
            return float(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))))
        if self.method == "sectors":
            return max(float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))) for _, v, _ in self._blocks)
        raise DomainError("the Krylov engine has no stored eigenbasis")

    # -- propagation ---------------------------------------------------------------
    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        """e^{-i(H - E0)t} psi for a vector or a block of column vectors."""
        psi = np.asarray(psi, dtype=complex)
        if t == 0:
            return psi.copy()
        if self.method == "dense":
            P = psi.reshape(self.dim, -1)
            out = self.V @ (np.exp(-1j * self.energies * t)[:, None] * (self.V.conj().T @ P))
            return out.reshape(psi.shape)
        if self.method == "sectors":
            S = self._Wh @ psi.reshape(self.dim, -1)
            for sl, v, e in self._blocks:
                S[sl] = v @ (np.exp(-1j * e * t)[:, None] * (v.conj().T @ S[sl]))
            return (self._W @ S).reshape(psi.shape)
        return spla.expm_multiply(-1j * t * self._H, psi)

    def heisenberg_matrix(self, m, t: float):
        """τ_t applied to a full-space matrix; implicit when the space is large."""
        if t == 0:
            return m
        if self.method == "dense" and self.dim < DENSE_NORM_DIM and not isinstance(m, spla.LinearOperator):
            md = m.toarray() if sp.issparse(m) else np.asarray(m)
            ph = np.exp(1j * self.energies * t)
            inner = (self.V.conj().T @ md @ self.V) * np.outer(ph, ph.conj())
            return self.V @ inner @ self.V.conj().T
        M = spla.aslinearoperator(m)
        n = self.dim

        def mv(v):
            return self.propagate(M.matmat(self.propagate(v.reshape(n, -1), t)), -t).reshape(v.shape)

        def rmv(v):
            return self.propagate(M.H.matmat(self.propagate(v.reshape(n, -1), t)), -t).reshape(v.shape)

        return spla.LinearOperator((n, n), matvec=mv, rmatvec=rmv, matmat=mv, rmatmat=rmv, dtype=complex)


def evolve_operator(engine: EvolutionEngine, a: LocalOperator, t: float) -> LocalOperator:
    """τ_t(a) as a full-lattice operator (exactly the embedding at t = 0)."""
    full = engine.lattice.full()
    A = embed(a, full)
    if t == 0:
        return A
    return LocalOperator(full, engine.heisenberg_matrix(A.matrix, t), f"τ_{t}({a.label})", a.hermitian)


#: absolute resolution of iterative commutator norms (roundoff of unit-norm products)
NORM_FLOOR = 1e-13


def commutator_norm(x, b, hermitian: bool = False, tol: float = 1e-10, atol: float = NORM_FLOOR) -> float:
    """‖[x, b]‖ for full-space matrices, dense or implicit."""
    if isinstance(x, spla.LinearOperator) or isinstance(b, spla.LinearOperator):
        X, B = spla.aslinearoperator(x), spla.aslinearoperator(b)
        C = X @ B - B @ X
        if hermitian:
            C = 1j * C
        return matrix_norm(C, hermitian=hermitian, tol=tol, atol=atol)
    c = x @ b - b @ x
    if hermitian:
        c = 1j * c
    return matrix_norm(c, hermitian=hermitian or None, tol=tol, atol=atol)


@dataclass
class LightConeProfile:
    """Samples (t, x, dist, ‖[τ_t(a), τ_x(b)]‖) and the fitted front."""

    samples: np.ndarray
    v_emp: float
    decay_rate: float | None
    threshold: float
    r0: float

    def outside(self, v: float | None = None) -> np.ndarray:
        v = self.v_emp if v is None else v
        t, d = self.samples[:, 0], self.samples[:, 2]
        return d > v * np.abs(t) + self.r0

    def rows(self) -> list[tuple[float, int, float]]:
        return [(float(t), int(x), float(c)) for t, x, _, c in self.samples]

    def to_dict(self) -> dict:
        return {"v_emp": self.v_emp, "decay_rate": self.decay_rate, "threshold": self.threshold, "r0": self.r0,
                "samples": [{"t": float(t), "x": int(x), "dist": int(d), "comm_norm": float(c)}
                            for t, x, d, c in self.samples]}


def front_velocity(samples: np.ndarray, threshold: float, r0: float) -> float:
    """Smallest v with every sample above ``threshold`` inside dist ≤ v|t| + r0."""
    v = 0.0
    for t, _, d, c in samples:
        if c < threshold or d <= r0:
            continue
        if t == 0:
            return np.inf
        v = max(v, (d - r0) / abs(t))
    return v


def lightcone_profile(engine: EvolutionEngine, a: LocalOperator, b: LocalOperator, times, displacements,
                      threshold: float = 1e-3, r0: float = 0.0, fit: bool = True,
                      tol: float = 1e-8) -> LightConeProfile:
    """Measure commutator norms on a (t, x) grid and fit the light-cone front."""
    full = engine.lattice.full()
    herm = bool(a.hermitian and b.hermitian)
    A = embed(a, full).matrix
    rows = []
    for t in times:
        X = engine.heisenberg_matrix(A, float(t))
        for x in displacements:
            bx = translate(b, x)
            B = embed(bx, full).matrix
            if t == 0:
                c = A @ B - B @ A
                val = 0.0 if not (c.count_nonzero() if sp.issparse(c) else np.any(c)) else \
                    matrix_norm(c, tol=tol, atol=NORM_FLOOR)
            else:
                val = commutator_norm(X, B, herm, tol)
            rows.append((float(t), int(x) if np.isscalar(x) else int(x[0]), dist(a.support, bx.support), val))
    samples = np.array(rows, dtype=float)
    v_emp = front_velocity(samples, threshold, r0)
    prof = LightConeProfile(samples, v_emp, None, threshold, r0)
    if fit:
        fit_front_decay(prof)
    return prof


def fit_front_decay(prof: LightConeProfile) -> float:
    """Exponential decay rate of the samples beyond the fitted front; stored on ``prof``."""
    samples = prof.samples
    sel = prof.outside() & (samples[:, 3] > 1e-14)
    if sel.sum() < 3:
        raise DiagnosticError(f"only {int(sel.sum())} usable outside-cone samples for the decay fit",
                              usable=int(sel.sum()))
    u = samples[sel, 2] - prof.v_emp * np.abs(samples[sel, 0])
    slope, _ = np.polyfit(u, np.log(samples[sel, 3]), 1)
    prof.decay_rate = float(-slope)
    return prof.decay_rate


def envelope_check(profile: LightConeProfile, cert: LRCertificate, a: LocalOperator, b: LocalOperator,
                   f: DecayFunction | None = None) -> dict:
    """Compare disjoint-support samples with (2‖a‖‖b‖/C) e^{λv|t|} Σ F_λ(d(w,z)).

    Returns the worst sample/envelope ratio overall and outside the cone.
    """
    f = f or DecayFunction(eps_f=cert.decay.get("eps_f", 1.0), dim=a.lattice.dim, metric=cert.metric)
    lat = a.lattice
    na, nb = op_norm(a), op_norm(b)
    ratios, env = [], []
    for t, x, d, c in profile.samples:
        if d == 0:
            ratios.append(np.nan)
            env.append(np.nan)
            continue
        bx = translate(b, int(x))
        D = lat.distance_matrix[np.ix_(a.support.indices, bx.support.indices)]
        e = cert.envelope(t, float(np.sum(f(D, cert.lam))), na, nb)
        env.append(e)
        ratios.append(c / e)
    ratios, env = np.array(ratios), np.array(env)
    out = profile.outside(cert.v) & ~np.isnan(ratios)
    disjoint = ~np.isnan(ratios)
    return {"envelope": env.tolist(), "worst_ratio": float(np.nanmax(ratios)) if disjoint.any() else 0.0,
            "worst_ratio_outside": float(np.max(ratios[out])) if out.any() else 0.0,
            "outside_count": int(out.sum()), "dominated": bool(np.all(ratios[disjoint] <= 1.0))}


# -- boundary independence and clustering ---------------------------------------------
def boundary_difference(phi: Interaction, sizes, t: float, which: str = "x",
                        atol: float = NORM_FLOOR) -> list[float]:
    """‖τ^open_t(A) - τ^periodic_t(A)‖ for a Pauli at the central site.

    Values below ``atol`` are at roundoff level and are not resolved further.
    """
    out = []
    for n in sizes:
        ops = []
        for bc in ("open", "periodic"):
            lat = Lattice(n, phi.dim, bc)
            eng = EvolutionEngine(build_hamiltonian(phi, lat))
            ops.append(evolve_operator(eng, pauli(lat, (0,) * phi.dim, which), t).matrix)
        Xo, Xp = ops
        if isinstance(Xo, spla.LinearOperator) or isinstance(Xp, spla.LinearOperator):
            D = spla.aslinearoperator(Xo) - spla.aslinearoperator(Xp)
        else:
            D = Xo - Xp
        out.append(matrix_norm(D, hermitian=True, atol=atol))
    return out


@dataclass
class CorrelationProfile:
    dist: np.ndarray
    values: np.ndarray
    rate: float

    def to_dict(self) -> dict:
        return {"dist": self.dist.tolist(), "values": self.values.tolist(), "rate": self.rate}


def ground_state(h: LocalOperator) -> tuple[float, np.ndarray]:
    H = h.sparse()
    if H.shape[0] <= 2 ** 10:
        w, v = np.linalg.eigh(H.toarray())
        return float(w[0]), v[:, 0]
    w, v = spla.eigsh(H, k=1, which="SA", tol=1e-13, v0=np.ones(H.shape[0], dtype=complex))
    return float(w[0]), v[:, 0]


def clustering_profile(h: LocalOperator, a: LocalOperator, b: LocalOperator, displacements,
                       floor: float = 1e-13) -> CorrelationProfile:
    """|<a τ_x(b)> - <a><b>| in the ground state, with an exponential fit."""
    _, psi = ground_state(h)
    full = h.support
    A = embed(a, full).sparse()
    ea = np.vdot(psi, A @ psi)
    d, vals = [], []
    for x in displacements:
        bx = translate(b, x)
        B = embed(bx, full).sparse()
        vals.append(abs(np.vdot(psi, A @ (B @ psi)) - ea * np.vdot(psi, B @ psi)))
        d.append(dist(a.support, bx.support))
    d, vals = np.array(d), np.array(vals)
    sel = (vals > floor) & (d > 0)
    if sel.sum() < 2:
        raise DiagnosticError("too few correlations above the floor for a decay fit", usable=int(sel.sum()))
    slope, _ = np.polyfit(d[sel], np.log(vals[sel]), 1)
    return CorrelationProfile(d, vals, float(-slope))
