"""Wave packets, Haag-Ruelle creation operators and finite-time scattering data.

Packets use the unitary discrete transform on a ring of M sites,

    g_t(x) = M^{-1/2} Σ_k e^{-iΣ(p_k)t + ip_k x} ĝ(p_k),

so that Σ_x |g_t(x)|² = Σ_k |ĝ(p_k)|² holds exactly.  On the physical
lattice M = N and Σ is the extracted shell; on padded grids (M > N) Σ is the
shell interpolant.  Haag-Ruelle operators keep the (2π)^{-d/2} prefactor:

    B*_t(g_t) = (2π)^{-d/2} Σ_x g_t(x) U(t,x) B* U(t,x)*.

Asymptotic statements are replaced by trend tests on a window below the
recurrence time t_rec = N / (2 max|Σ'|).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .arveson import FilterFunction, FrameOperator, SpectralFrame, Window, commutator_frame
from .errors import DiagnosticError, DomainError
from .spectral import MassShell

MONOTONE_FLOOR = 1e-12


def monotone_decreasing(values, floor: float = MONOTONE_FLOOR) -> bool:
    """Non-increasing sequence, treating everything below ``floor`` as zero."""
    v = np.maximum(np.asarray(values, dtype=float), floor)
    return bool(np.all(np.diff(v) <= 0))


# -- wave packets ---------------------------------------------------------------------
@dataclass
class WavePacket:
    """Momentum amplitudes ĝ on the grid of an ``n``-site ring (1D)."""

    shell: MassShell = field(repr=False)
    window: Window
    center: float = 0.0

    @property
    def n(self) -> int:
        return self.shell.n

    def amplitudes(self, m: int | None = None) -> np.ndarray:
        """ĝ on the m-point grid p_j = 2πj/m, normalized on the physical grid."""
        m = self.n if m is None else m
        p = 2 * np.pi * np.arange(m) / m
        g = self.window(p) * np.exp(-1j * p * self.center)
        base = self.window(2 * np.pi * np.arange(self.n) / self.n)
        nrm = np.sqrt(np.sum(base ** 2))
        if nrm == 0:
            raise DomainError("packet window contains no momentum of the lattice grid")
        return g / nrm * np.sqrt(self.n / m)

    def dispersion(self, m: int | None = None) -> np.ndarray:
        m = self.n if m is None else m
        if m == self.n:
            return np.asarray(self.shell.sigma, dtype=float).reshape(-1)
        return self.shell(2 * np.pi * np.arange(m) / m)

    def profile(self, t: float = 0.0, m: int | None = None) -> np.ndarray:
        """g_t(x) for x = 0, ..., m-1 (x ≥ m/2 are the negative positions)."""
        m = self.n if m is None else m
        c = self.amplitudes(m) * np.exp(-1j * self.dispersion(m) * t)
        return np.sqrt(m) * np.fft.ifft(c)

    def time_derivative(self, t: float, m: int | None = None) -> np.ndarray:
        m = self.n if m is None else m
        c = self.amplitudes(m) * (-1j * self.dispersion(m)) * np.exp(-1j * self.dispersion(m) * t)
        return np.sqrt(m) * np.fft.ifft(c)

    def velocity_support(self, samples: int = 401) -> tuple[float, float]:
        """[min, max] of Σ' over the closed window."""
        lo, hi = self.window.support
        p = np.linspace(lo, hi, samples)
        v = self.shell.velocity(p)
        return float(v.min()), float(v.max())

    def curvature_range(self, samples: int = 401) -> tuple[float, float]:
        lo, hi = self.window.support
        c = self.shell.curvature(np.linspace(lo, hi, samples))
        return float(np.min(c)), float(np.max(c))

    def l1(self, t: float, m: int | None = None) -> float:
        """‖g_t‖_1 = (2π)^{-1/2} Σ_x |g_t(x)|."""
        return float((2 * np.pi) ** -0.5 * np.sum(np.abs(self.profile(t, m))))


def evolve_packet(g: WavePacket, t: float, m: int | None = None) -> np.ndarray:
    return g.profile(t, m)


def velocity_gap(a: WavePacket, b: WavePacket) -> float:
    """Distance between the velocity supports (0 when they overlap)."""
    (a0, a1), (b0, b1) = a.velocity_support(), b.velocity_support()
    return max(0.0, b0 - a1, a0 - b1)


def recurrence_time(shell: MassShell) -> float:
    p = np.linspace(-np.pi, np.pi, 2001)
    vmax = float(np.max(np.abs(shell.velocity(p))))
    return np.inf if vmax == 0 else shell.n / (2 * vmax)


@dataclass
class NormScaling:
    times: np.ndarray
    sup: np.ndarray
    l1: np.ndarray
    used: np.ndarray
    slope_sup: float | None
    slope_l1: float | None
    stderr_sup: float | None
    stderr_l1: float | None
    warnings: list

    def to_dict(self) -> dict:
        return {"slope_sup": self.slope_sup, "slope_l1": self.slope_l1, "stderr_sup": self.stderr_sup,
                "stderr_l1": self.stderr_l1, "warnings": self.warnings,
                "rows": [{"t": float(t), "sup": float(s), "l1": float(l), "used": bool(u)}
                         for t, s, l, u in zip(self.times, self.sup, self.l1, self.used)]}


def _fit(x, y):
    (b, a), cov = np.polyfit(np.log(x), np.log(y), 1, cov=True)
    return float(b), float(np.sqrt(cov[0, 0]))


def packet_norm_scaling(g: WavePacket, times, m: int = 4096, require_regular: bool = True) -> NormScaling:
    """Log-log slopes of sup|g_t| and ‖g_t‖_1 on the padded grid before wrap-around."""
    warnings = []
    times = np.asarray(times, dtype=float)
    lo, hi = g.curvature_range()
    regular = lo * hi > 0 and min(abs(lo), abs(hi)) > g.shell.curvature_tol
    sup, l1, used = [], [], []
    for t in times:
        prof = g.profile(t, m)
        w = np.abs(prof) ** 2
        x = np.arange(m)
        ang = np.angle(np.sum(w * np.exp(2j * np.pi * x / m)))
        xc = ang * m / (2 * np.pi)
        d = (x - xc - m / 2) % m
        far = np.minimum(d, m - d) < m / 8
        wrapped = w[far].sum() > 1e-12 * w.sum()
        sup.append(float(np.max(np.abs(prof))))
        l1.append(float((2 * np.pi) ** -0.5 * np.sum(np.abs(prof))))
        used.append(not wrapped)
    used = np.cumprod(used).astype(bool)
    if not used.all():
        warnings.append(f"wrap-around: window truncated to {int(used.sum())} of {used.size} times")
    sup, l1 = np.array(sup), np.array(l1)
    if require_regular and not regular:
        warnings.append("packet support meets an inflection point of Σ; fit excluded")
        return NormScaling(times, sup, l1, used, None, None, None, None, warnings)
    if used.sum() < 3:
        warnings.append("fewer than three usable times")
        return NormScaling(times, sup, l1, used, None, None, None, None, warnings)
    s1, e1 = _fit(times[used], sup[used])
    s2, e2 = _fit(times[used], l1[used])
    return NormScaling(times, sup, l1, used, s1, s2, e1, e2, warnings)


def packet_center_velocity(g: WavePacket, times, m: int = 1024) -> float:
    """Slope of the center of mass Σ_x x|g_t(x)|² on a padded grid."""
    xs = []
    x = np.arange(m)
    x = np.where(x >= m // 2, x - m, x)
    for t in times:
        w = np.abs(g.profile(t, m)) ** 2
        xs.append(float(np.sum(x * w) / np.sum(w)))
    return float(np.polyfit(np.asarray(times, float), xs, 1)[0])


# -- Haag-Ruelle operators ------------------------------------------------------------------
def _sites(frame: SpectralFrame) -> np.ndarray:
    return np.array([c[0] for c in frame.lattice.coords])


def hr_operator(b: FrameOperator, g: WavePacket, t: float, profile: np.ndarray | None = None) -> FrameOperator:
    """B*_t(g_t) as the literal sum over lattice sites."""
    frame = b.frame
    if frame.lattice.dim != 1:
        raise DomainError("Haag-Ruelle operators are implemented for chains")
    if g.n != frame.lattice.n:
        raise DomainError("packet and lattice sizes differ")
    prof = g.profile(t) if profile is None else profile
    bt = b.evolve(t)
    acc = np.zeros_like(b.matrix)
    for x in _sites(frame):
        gx = prof[x % g.n]
        if gx != 0:
            acc += gx * bt.translate(x).matrix
    return FrameOperator(frame, (2 * np.pi) ** -0.5 * acc)


def single_particle_invariance(b: FrameOperator, g: WavePacket, times) -> list[float]:
    """‖B*_t(g_t)Ω - B*(g)Ω‖ for each t."""
    om = b.frame.vacuum
    ref = hr_operator(b, g, 0.0) @ om
    return [float(np.linalg.norm(hr_operator(b, g, t) @ om - ref)) for t in times]


@dataclass
class DerivativeCheck:
    steps: list
    errors: list

    @property
    def order(self) -> float:
        e = self.errors
        if min(e) == 0:
            return np.inf
        return float(np.log(e[0] / e[-1]) / np.log(self.steps[0] / self.steps[-1]))

    def to_dict(self) -> dict:
        return {"steps": self.steps, "errors": self.errors, "order": self.order}


def derivative_identity_check(b: FrameOperator, g: WavePacket, t: float, steps=(1e-2, 1e-3)) -> DerivativeCheck:
    """Central differences of B*_t(g_t) against i[H, B*_t(g_t)] + B*_t(ġ_t)."""
    frame = b.frame
    bt = hr_operator(b, g, t)
    dE = frame.energies[:, None] - frame.energies[None, :]
    exact = 1j * dE * bt.matrix + hr_operator(b, g, t, profile=g.time_derivative(t)).matrix
    errs = []
    for h in steps:
        fd = (hr_operator(b, g, t + h).matrix - hr_operator(b, g, t - h).matrix) / (2 * h)
        errs.append(float(np.linalg.norm(fd - exact, 2)))
    return DerivativeCheck(list(steps), errs)


# -- scattering states ------------------------------------------------------------------------
@dataclass
class ScatteringStateApprox:
    config: list = field(repr=False)
    t: float
    psi: np.ndarray = field(repr=False)
    gaps: dict
    commutators: dict
    norm_bound: float

    @property
    def frame(self) -> SpectralFrame:
        return self.config[0][0].frame

    @property
    def n(self) -> int:
        return len(self.config)

    def single(self, i: int) -> np.ndarray:
        b, g = self.config[i]
        return hr_operator(b, g, self.t) @ self.frame.vacuum

    def to_dict(self) -> dict:
        return {"t": self.t, "n": self.n, "norm": float(np.linalg.norm(self.psi)), "norm_bound": self.norm_bound,
                "velocity_gaps": {f"{i}-{j}": v for (i, j), v in self.gaps.items()},
                "commutators": {f"{i}-{j}": v for (i, j), v in self.commutators.items()}}


def _energy_top(b: FrameOperator, f: FilterFunction | None) -> float:
    if f is not None and f.energy_support is not None:
        return f.energy_support[1]
    return np.inf


def scattering_state(config, t: float, filters=None, commutators: bool = True) -> ScatteringStateApprox:
    """Ψ_t = B*_{1,t}(g_{1,t}) ⋯ B*_{n,t}(g_{n,t}) Ω, applied right to left.

    ``config`` is a list of (creation FrameOperator, WavePacket); ``filters``
    the matching energy windows, used for the ceiling check.
    """
    if not config:
        raise DomainError("empty configuration")
    frame = config[0][0].frame
    for b, g in config:
        if b.frame is not frame:
            raise DomainError("all creation operators must share one spectral frame")
        if g.shell.valid is False:
            raise DomainError("flat or degenerate shell: no propagation, scattering states undefined")
    gaps = {}
    for i, j in itertools.combinations(range(len(config)), 2):
        gap = velocity_gap(config[i][1], config[j][1])
        if not gap > 0:
            raise DomainError(f"velocity supports of packets {i} and {j} overlap (gap {gap:.3g})")
        gaps[(i, j)] = gap
    if filters is not None:
        top = sum(_energy_top(b, f) for (b, _), f in zip(config, filters))
        if top > frame.ceiling:
            raise DomainError(f"{len(config)}-particle energy {top:.6g} above the frame ceiling {frame.ceiling:.6g}")
    ops = [hr_operator(b, g, t) for b, g in config]
    psi = frame.vacuum
    for op in reversed(ops):
        psi = op @ psi
    comm = {}
    if commutators:
        for i, j in itertools.combinations(range(len(ops)), 2):
            comm[(i, j)] = commutator_frame(ops[i], ops[j]).norm()
    bound = math.prod(b.norm() * g.l1(t) for b, g in config)
    return ScatteringStateApprox(list(config), float(t), psi, gaps, comm, float(bound))


def permanent(m: np.ndarray) -> complex:
    n = m.shape[0]
    return complex(sum(math.prod(m[i, s[i]] for i in range(n)) for s in itertools.permutations(range(n))))


@dataclass
class FockReport:
    t: float
    overlap: complex
    permanent: complex | None
    deviation: float
    covariance: float

    def to_dict(self) -> dict:
        return {"t": self.t, "overlap": [self.overlap.real, self.overlap.imag],
                "permanent": None if self.permanent is None else [self.permanent.real, self.permanent.imag],
                "deviation": self.deviation, "covariance_residual": self.covariance}


def fock_factorization_check(psi: ScatteringStateApprox, phi: ScatteringStateApprox,
                             shift: tuple[float, int] = (0.7, 1)) -> FockReport:
    """<Φ, Ψ> against the permanent of single-particle overlaps.

    For n ≠ ñ the deviation is the raw overlap magnitude.  The covariance
    residual compares U(s,y)Ψ with the state built from translated operators.
    """
    if psi.frame is not phi.frame or psi.t != phi.t:
        raise DomainError("states must share the frame and the time")
    frame = psi.frame
    ov = complex(np.vdot(phi.psi, psi.psi))
    if psi.n == phi.n:
        G = np.array([[np.vdot(phi.single(i), psi.single(j)) for j in range(psi.n)] for i in range(phi.n)])
        per = permanent(G)
        dev = abs(ov - per)
    else:
        per, dev = None, abs(ov)
    s, y = shift
    U = np.exp(1j * frame.energies * s - 1j * frame.momenta[:, 0] * y)
    moved = frame.vacuum
    for b, g in reversed(psi.config):
        moved = hr_operator(b, g, psi.t).evolve(s).translate(y) @ moved
    cov = float(np.linalg.norm(U * psi.psi - moved))
    return FockReport(psi.t, ov, per, float(dev), cov)


# -- S-matrix ---------------------------------------------------------------------------------
@dataclass
class SMatrixEstimate:
    times: list
    overlaps: list
    bounds: list
    extrapolated: complex
    error: float
    truncated: bool
    label: str = "finite-time estimate"

    @property
    def bounded(self) -> bool:
        return all(abs(o) <= b * (1 + 1e-9) + 1e-15 for o, b in zip(self.overlaps, self.bounds))

    def to_dict(self) -> dict:
        return {"label": self.label, "truncated_at_recurrence": self.truncated, "bounded": self.bounded,
                "extrapolated": [self.extrapolated.real, self.extrapolated.imag], "error": self.error,
                "rows": [{"t": t, "re": o.real, "im": o.imag, "abs": abs(o), "bound": b}
                         for t, o, b in zip(self.times, self.overlaps, self.bounds)]}


def s_matrix_element(in_cfg, out_cfg, times, filters_in=None, filters_out=None) -> SMatrixEstimate:
    """<Ψ_out(+t), Ψ_in(-t)> over ``times`` with first-order Richardson in 1/t."""
    shell = in_cfg[0][1].shell
    trec = recurrence_time(shell)
    times = [float(t) for t in times if t > 0]
    keep = [t for t in times if t < trec]
    truncated = len(keep) < len(times)
    if len(keep) < 2:
        raise DiagnosticError("fewer than two times below the recurrence time", usable=len(keep))
    ovs, bounds = [], []
    for t in keep:
        a = scattering_state(out_cfg, t, filters_out, commutators=False)
        b = scattering_state(in_cfg, -t, filters_in, commutators=False)
        ovs.append(complex(np.vdot(a.psi, b.psi)))
        bounds.append(float(np.linalg.norm(a.psi) * np.linalg.norm(b.psi)))
    t1, t2 = keep[-2], keep[-1]
    s1, s2 = ovs[-2], ovs[-1]
    ext = (t2 * s2 - t1 * s1) / (t2 - t1)
    return SMatrixEstimate(keep, ovs, bounds, complex(ext), float(abs(s2 - s1)), truncated)


# -- asymptotic-trend diagnostics -------------------------------------------------------------
@dataclass
class TrendReport:
    times: list
    values: list
    slope: float | None = None

    @property
    def decreasing(self) -> bool:
        return monotone_decreasing(self.values)

    def to_dict(self) -> dict:
        return {"times": self.times, "values": self.values, "slope": self.slope, "decreasing": self.decreasing}


def commutator_trend(config, times) -> tuple[TrendReport, TrendReport]:
    """Single ‖[B1,B2]‖ and double ‖[B1,[B2,B3]]‖ commutators of HR operators over time."""
    single, double = [], []
    for t in times:
        ops = [hr_operator(b, g, t) for b, g in config]
        c12 = commutator_frame(ops[0], ops[1])
        single.append(c12.norm())
        if len(ops) > 2:
            double.append(commutator_frame(ops[0], commutator_frame(ops[1], ops[2])).norm())
    return TrendReport(list(times), single), TrendReport(list(times), double)


def vacuum_cluster_trend(first, second, times) -> TrendReport:
    """‖P_Ω^⊥ B_{1,t}(g_{1,t}) B*_{2,t}(g_{2,t}) Ω‖ with B_1 the adjoint of the first creation operator."""
    vals = []
    for t in times:
        b1 = hr_operator(*first, t).adjoint
        b2 = hr_operator(*second, t)
        v = b1 @ (b2 @ b2.frame.vacuum)
        v[0] = 0.0
        vals.append(float(np.linalg.norm(v)))
    vals_a = np.asarray(vals)
    pos = vals_a > MONOTONE_FLOOR
    slope = _fit(np.asarray(times)[pos], vals_a[pos])[0] if pos.sum() >= 3 else None
    return TrendReport(list(times), vals, slope)


def velocity_pair_density(shell: MassShell, deltas, m: int = 512) -> tuple[np.ndarray, float]:
    """Fraction of momentum pairs with |Σ'(p) - Σ'(q)| < δ, and the log-log slope in δ."""
    p = 2 * np.pi * np.arange(m) / m
    v = shell.velocity(p)
    diff = np.abs(v[:, None] - v[None, :])
    frac = np.array([np.mean(diff < d) for d in deltas])
    slope = _fit(np.asarray(deltas, float), frac)[0]
    return frac, slope
