"""Local operators with tracked support: embedding, translation, commutators,
norms and tracial conditional expectations.

A :class:`LocalOperator` acts on ``2**len(support)`` dimensional space.  Its
tensor factors follow the support's sorted linear indices, the first factor
being the most significant bit of a basis index.  Basis state 0 of a site is
σ3 = +1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalError
from .lattice import Lattice, Region

#: dense/iterative switchover for operator norms
DENSE_NORM_DIM = 2 ** 12
#: matrices with a larger fraction of nonzeros are stored dense
DENSE_FILL = 0.25

Matrix = Union[np.ndarray, sp.spmatrix, spla.LinearOperator]

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI.update({0: PAULI["i"], 1: PAULI["x"], 2: PAULI["y"], 3: PAULI["z"]})


def _store(m):
    """Pick dense or CSR storage by fill fraction."""
    if isinstance(m, spla.LinearOperator) and not isinstance(m, (np.ndarray, sp.spmatrix)):
        return m
    if sp.issparse(m):
        m = sp.csr_matrix(m, dtype=complex)
        n = m.shape[0] * m.shape[1]
        if n and m.nnz / n > DENSE_FILL:
            return m.toarray()
        return m
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DomainError("operator matrix must be two-dimensional")
    n = m.size
    if m.shape[0] >= 16 and n and np.count_nonzero(m) / n <= DENSE_FILL:
        return sp.csr_matrix(m)
    return m


def _is_implicit(m) -> bool:
    return isinstance(m, spla.LinearOperator)


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Matrix together with the region it acts on."""

    support: Region
    matrix: Matrix
    label: str = ""
    hermitian: bool | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        m = _store(self.matrix)
        object.__setattr__(self, "matrix", m)
        d = 2 ** len(self.support)
        if m.shape != (d, d):
            raise DomainError(f"matrix shape {m.shape} does not match support of {len(self.support)} sites")
        if self.hermitian and not _is_implicit(m):
            dev = _maxabs(m - m.conj().T)
            if dev > 1e-12:
                raise DomainError(f"operator flagged Hermitian deviates by {dev:.3g}")

    @property
    def lattice(self) -> Lattice:
        return self.support.lattice

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def implicit(self) -> bool:
        return _is_implicit(self.matrix)

    def dense(self) -> np.ndarray:
        m = self.matrix
        if _is_implicit(m):
            return m @ np.eye(m.shape[0], dtype=complex)
        return m.toarray() if sp.issparse(m) else m

    def sparse(self) -> sp.csr_matrix:
        m = self.matrix
        if _is_implicit(m):
            m = self.dense()
        return sp.csr_matrix(m)

    def adjoint(self) -> "LocalOperator":
        m = self.matrix
        m = m.H if _is_implicit(m) else m.conj().T
        return LocalOperator(self.support, m, self.label + "†" if self.label else "", self.hermitian)

    def scale(self, c) -> "LocalOperator":
        herm = self.hermitian if np.isreal(c) else None
        return LocalOperator(self.support, self.matrix * c, self.label, herm)

    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        u = self.support.union(other.support)
        return LocalOperator(u, embed(self, u).matrix + embed(other, u).matrix)

    def __sub__(self, other: "LocalOperator") -> "LocalOperator":
        return self + other.scale(-1)

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        u = self.support.union(other.support)
        return LocalOperator(u, embed(self, u).matrix @ embed(other, u).matrix)

    def __repr__(self):
        kind = "implicit" if self.implicit else ("sparse" if sp.issparse(self.matrix) else "dense")
        return f"LocalOperator({self.label or '?'} on {self.support!r}, {kind} {self.dim}x{self.dim})"


def _maxabs(m) -> float:
    if sp.issparse(m):
        return float(abs(m).max()) if m.nnz else 0.0
    return float(np.max(np.abs(m))) if m.size else 0.0


# -- constructors ------------------------------------------------------------
def identity(region: Region) -> LocalOperator:
    return LocalOperator(region, sp.identity(2 ** len(region), dtype=complex, format="csr"), "1", True)


def pauli(lattice: Lattice, site, which) -> LocalOperator:
    """Single-site Pauli matrix; ``which`` is one of 'x', 'y', 'z' or 1, 2, 3."""
    key = which.lower() if isinstance(which, str) else which
    return LocalOperator(lattice.region([site]), PAULI[key], f"σ{which}@{site}", True)


def pauli_string(lattice: Lattice, factors: dict) -> LocalOperator:
    """Product of Paulis, e.g. ``{0: 'x', 1: 'x'}``."""
    reg = lattice.region(factors.keys())
    by_index = {lattice.index(s): PAULI[w.lower() if isinstance(w, str) else w] for s, w in factors.items()}
    m = np.ones((1, 1), dtype=complex)
    for i in reg.indices:
        m = np.kron(m, by_index[i])
    label = "".join(f"σ{w}@{s}" for s, w in factors.items())
    return LocalOperator(reg, m, label, True)


def random_operator(region: Region, rng: np.random.Generator, hermitian=False) -> LocalOperator:
    d = 2 ** len(region)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    if hermitian:
        m = (m + m.conj().T) / 2
    return LocalOperator(region, m, "random", True if hermitian else None)


# -- factor bookkeeping ------------------------------------------------------
def _index_map(src: list[int], dst: list[int]) -> np.ndarray:
    """Basis-index relabeling taking factor order ``src`` to order ``dst``."""
    n = len(src)
    pos = [dst.index(s) for s in src]
    b = np.arange(2 ** n, dtype=np.int64)
    out = np.zeros_like(b)
    for q in range(n):
        out |= ((b >> (n - 1 - q)) & 1) << (n - 1 - pos[q])
    return out


def _reorder(m, src: list[int], dst: list[int]):
    """Re-express ``m`` (factors in order ``src``) in factor order ``dst``."""
    if src == dst:
        return m
    n = len(src)
    if _is_implicit(m):
        perm = _index_map(src, dst)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        P = sp.csr_matrix((np.ones(perm.size), (perm, np.arange(perm.size))), shape=m.shape)
        return spla.aslinearoperator(P) @ m @ spla.aslinearoperator(P.T)
    if sp.issparse(m):
        perm = _index_map(src, dst)
        c = m.tocoo()
        return sp.csr_matrix((c.data, (perm[c.row], perm[c.col])), shape=m.shape)
    axes = [src.index(s) for s in dst]
    t = m.reshape((2,) * (2 * n)).transpose(axes + [a + n for a in axes])
    return t.reshape(m.shape)


def embed(a: LocalOperator, target: Region) -> LocalOperator:
    """``a ⊗ 1`` on ``target`` in the target's factor order."""
    if target.lattice != a.lattice:
        raise DomainError("target lives on a different lattice")
    if not a.support.issubset(target):
        raise DomainError(f"support {a.support!r} not contained in {target!r}")
    if target.indices == a.support.indices:
        return a
    rest = [i for i in target.indices if i not in a.support.indices]
    m = a.matrix
    k = 2 ** len(rest)
    if _is_implicit(m):
        big = _kron_implicit(m, k)
    elif sp.issparse(m) or k * m.shape[0] > 64:
        big = sp.kron(sp.csr_matrix(m), sp.identity(k, dtype=complex, format="csr"), format="csr")
    else:
        big = np.kron(m, np.eye(k))
    big = _reorder(big, list(a.support.indices) + rest, list(target.indices))
    return LocalOperator(target, big, a.label, a.hermitian)


def _kron_implicit(m: spla.LinearOperator, k: int) -> spla.LinearOperator:
    d = m.shape[0]

    def mv(v):
        v = np.asarray(v).reshape(d, -1)
        return np.asarray(m.matmat(v)).reshape(-1)

    def rmv(v):
        v = np.asarray(v).reshape(d, -1)
        return np.asarray(m.H.matmat(v)).reshape(-1)

    n = d * k
    return spla.LinearOperator((n, n), matvec=mv, rmatvec=rmv, dtype=complex)


def translate(a: LocalOperator, x) -> LocalOperator:
    """Shift the support by ``x``; wraps on periodic lattices."""
    lat = a.lattice
    try:
        moved = [lat.index(tuple(c + s for c, s in zip(lat.coords[i], _disp(x, lat.dim))))
                 for i in a.support.indices]
    except DomainError as exc:
        raise DomainError(f"translation by {x} leaves the open lattice") from exc
    new = Region(lat, tuple(moved))
    m = _reorder(a.matrix, moved, list(new.indices))
    return LocalOperator(new, m, a.label, a.hermitian)


def _disp(x, dim):
    return (int(x),) if np.isscalar(x) else tuple(int(c) for c in x)


def commutator(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """``[a, b]`` on the union of the supports."""
    u = a.support.union(b.support)
    A, B = embed(a, u).matrix, embed(b, u).matrix
    if _is_implicit(A) or _is_implicit(B):
        A, B = spla.aslinearoperator(A), spla.aslinearoperator(B)
        return LocalOperator(u, A @ B - B @ A)
    c = A @ B - B @ A
    if sp.issparse(c):
        c = sp.csr_matrix(c)
        c.eliminate_zeros()
    return LocalOperator(u, c)


def is_zero(a: LocalOperator) -> bool:
    m = a.matrix
    if sp.issparse(m):
        return m.count_nonzero() == 0
    return not np.any(m)


def _hermitian_like(m) -> int:
    """+1 Hermitian, -1 anti-Hermitian, 0 neither (dense or sparse)."""
    scale = _maxabs(m) or 1.0
    mh = m.conj().T
    if _maxabs(m - mh) <= 1e-12 * scale:
        return 1
    if _maxabs(m + mh) <= 1e-12 * scale:
        return -1
    return 0


def matrix_norm(m, hermitian: bool | None = None, tol: float = 1e-10, maxiter: int | None = None,
                atol: float = 0.0) -> float:
    """Largest singular value of a dense, sparse or implicit matrix.

    ``atol`` is an absolute floor for the iterative estimate, needed when the
    norm itself sits near roundoff.
    """
    dim = m.shape[0]
    if not _is_implicit(m):
        if _maxabs(m) == 0:
            return 0.0
        kind = 1 if hermitian else _hermitian_like(m)
        if dim < DENSE_NORM_DIM:
            d = m.toarray() if sp.issparse(m) else m
            if kind == 1:
                return float(np.max(np.abs(np.linalg.eigvalsh(d))))
            if kind == -1:
                return float(np.max(np.abs(np.linalg.eigvalsh(1j * d))))
            return float(np.linalg.norm(d, 2))
        if kind == -1:
            m, kind = 1j * m, 1
    else:
        probe = np.random.default_rng(0).normal(size=dim)
        if not np.any(m @ probe):
            return 0.0
        return block_krylov_norm(m, bool(hermitian), tol=max(tol, 1e-12), atol=atol)
    v0 = np.random.default_rng(12345).normal(size=dim).astype(complex)
    try:
        if kind == 1:
            w = spla.eigsh(m, k=1, which="LM", tol=tol, v0=v0, maxiter=maxiter, return_eigenvectors=False)
            return float(np.abs(w[0]))
        s = spla.svds(m, k=1, tol=tol, v0=v0, maxiter=maxiter, return_singular_vectors=False)
        return float(s[0])
    except spla.ArpackNoConvergence as exc:
        raise NumericalError("iterative norm did not converge", residual=getattr(exc, "eigenvalues", None)) from exc


def block_krylov_norm(m, hermitian: bool = False, block: int = 4, tol: float = 1e-8, maxdepth: int = 80,
                      seed: int = 0, atol: float = 0.0) -> float:
    """Operator norm by Rayleigh-Ritz on a block Krylov space.

    Works with block products only, which is much cheaper than repeated
    single-vector products for implicit operators.  Ritz values never exceed
    the true norm; iteration stops once the estimate changes by less than
    ``tol`` (relative) or ``atol`` (absolute, in norm units) between
    consecutive depths.
    """
    op = spla.aslinearoperator(m)
    if not hermitian:
        op = op.H @ op
    n = op.shape[0]
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.normal(size=(n, block)) + 1j * rng.normal(size=(n, block)))[0]
    basis, images = [Q], [op.matmat(Q)]
    prev = 0.0
    for _ in range(maxdepth):
        B = np.hstack(basis)
        T = B.conj().T @ np.hstack(images)
        est = float(np.max(np.abs(np.linalg.eigvalsh((T + T.conj().T) / 2))))
        # compare norms, not squared norms, so that atol keeps its meaning
        cur, old = (est, prev) if hermitian else (np.sqrt(est), np.sqrt(prev))
        if est == 0.0 or abs(cur - old) <= tol * cur + atol:
            prev = est
            break
        prev = est
        R = images[-1]
        for _ in range(2):
            R = R - B @ (B.conj().T @ R)
        Q, r = np.linalg.qr(R)
        keep = np.abs(np.diag(r)) > 1e-12 * max(est, 1e-300)
        if not keep.any():
            break
        Q = Q[:, keep]
        basis.append(Q)
        images.append(op.matmat(Q))
    else:
        raise NumericalError("block Krylov norm did not converge", residual=prev)
    return prev if hermitian else float(np.sqrt(prev))


def op_norm(a: LocalOperator, tol: float = 1e-10, maxiter: int | None = None) -> float:
    """Operator norm ‖a‖ (largest singular value)."""
    if "norm" not in a._cache:
        a._cache["norm"] = matrix_norm(a.matrix, a.hermitian, tol, maxiter)
    return a._cache["norm"]


def partial_trace(m, sites: list[int], keep: list[int]):
    """Normalized trace over the factors of ``sites`` not in ``keep``.

    Returns the reduced matrix on ``keep`` (in the given order).
    """
    traced = [s for s in sites if s not in keep]
    if not traced:
        return _reorder(m, sites, keep)
    dk, dm = 2 ** len(keep), 2 ** len(traced)
    if _is_implicit(m):
        m = m @ np.eye(m.shape[0], dtype=complex)
    m = _reorder(m, sites, list(keep) + traced)
    if sp.issparse(m):
        c = m.tocoo()
        ik, im = np.divmod(c.row, dm)
        jk, jm = np.divmod(c.col, dm)
        sel = im == jm
        out = sp.csr_matrix((c.data[sel] / dm, (ik[sel], jk[sel])), shape=(dk, dk))
        return out
    t = m.reshape(dk, dm, dk, dm)
    return np.einsum("ajbj->ab", t) / dm


def conditional_expectation(a: LocalOperator, target: Region) -> LocalOperator:
    """Tracial conditional expectation onto the algebra of ``target``.

    Sites of ``a.support`` outside ``target`` are traced out with the
    normalized trace; the result is embedded into ``target``.
    """
    if a.support.issubset(target):
        return embed(a, target)
    keep = [i for i in a.support.indices if i in target.indices]
    red = partial_trace(a.matrix, list(a.support.indices), keep)
    part = LocalOperator(Region(a.lattice, tuple(keep)), red, a.label, a.hermitian)
    return embed(part, target)
