"""The acceptance suite: eleven numbered criteria with pinned tolerances.

Each criterion returns a :class:`CriterionResult`; :func:`run` executes them
in dependency order and prints one PASS/FAIL line per criterion.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .arveson import (FilterFunction, SpectralFrame, Window, almost_locality_profile, arveson_spectrum,
                      em_transfer_check, make_creation_operator, smear, smear_quadrature)
from .dynamics import (EvolutionEngine, boundary_difference, clustering_profile, envelope_check,
                       lightcone_profile)
from .interactions import DecayFunction, build_hamiltonian, ising, lr_velocity
from .lattice import Lattice
from .operators import pauli, random_operator
from .oracle import IsingChainOracle
from .scattering import (WavePacket, derivative_identity_check, fock_factorization_check,
                         hr_operator, monotone_decreasing, packet_norm_scaling, scattering_state,
                         single_particle_invariance, velocity_pair_density)
from .spectral import (band_constant, check_additivity, extract_mass_shell, gap_flow, group_velocity,
                       momentum_sectors)

LAMBDA_GRID = tuple(np.round(np.linspace(0.1, 5.0, 50), 10))
SHELL_WINDOW = (0.5, 1.5)

# pinned tolerances
ORACLE_TOL = 1e-9
BAND_TOL = 1e-8
BAND_C_MAX = 5.0
BAND_C_SPREAD = 0.2
VELOCITY_TOL = 1e-6
TRANSFER_TOL = 1e-10
QUADRATURE_TOL = 1e-6
INVARIANCE_TOL = 1e-8
SLOPE_TOL = 0.1
FOCK_FINAL = 1e-2
GAP_FLOOR = 0.5
GAP_ORACLE_TOL = 1e-6

# scattering configuration: outgoing packets at momenta ±2π·3/14 starting two sites apart of the origin
FOCK = {"n": 14, "eps": 0.1, "k": 3, "wE": 0.6, "wp": 1.2, "center": 2.0, "ceiling": 3.3, "times": (2, 4, 6, 8)}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "status": "PASS" if self.passed else "FAIL",
                "summary": self.summary, "seconds": self.seconds, "detail": self.detail}


# -- shared fixtures ------------------------------------------------------------------------
@lru_cache(maxsize=None)
def ising_chain(n: int, eps: float, boundary: str = "periodic"):
    lat = Lattice(n, boundary=boundary)
    return lat, build_hamiltonian(ising(eps), lat)


@lru_cache(maxsize=None)
def ising_spectrum(n: int, eps: float, levels: int | None = None):
    lat, h = ising_chain(n, eps)
    return momentum_sectors(h, lat, levels=levels)


@lru_cache(maxsize=None)
def certificate(eps: float):
    return lr_velocity(ising(eps), LAMBDA_GRID)


@lru_cache(maxsize=None)
def frame(n: int, eps: float, ceiling: float | None = None) -> SpectralFrame:
    return SpectralFrame(ising_spectrum(n, eps), ceiling)


def _random_filter(rng, lo=0.3, hi=1.5) -> FilterFunction:
    return FilterFunction.box(rng.uniform(-3, 3), rng.uniform(lo, hi), rng.uniform(-np.pi, np.pi),
                              rng.uniform(0.4, np.pi))


def _random_local(lat: Lattice, rng):
    w = int(rng.integers(1, 3))
    start = int(rng.integers(lat.origin, lat.origin + lat.n - w + 1))
    return random_operator(lat.region(range(start, start + w)), rng)


def charged_band(js) -> np.ndarray:
    """Lowest level per momentum in the charge sector opposite to the vacuum.

    Unlike an energy window this stays well defined once the band overlaps
    the two-particle continuum, which happens near ε = 0.2.
    """
    odd = js.charge != js.charge[0]
    return np.array([js.energies[odd & (js.k == k)].min() for k in range(len(js.grid))])


# -- criteria ----------------------------------------------------------------------------------
def c1_oracle(eps_values=(0.05, 0.1, 0.2), sizes=(8, 10, 12)):
    worst_e = worst_b = 0.0
    slowest = 0.0
    for eps in eps_values:
        for n in sizes:
            t0 = time.perf_counter()
            js = ising_spectrum(n, eps)
            o = IsingChainOracle(eps, n)
            E, K, _ = o.levels()
            worst_e = max(worst_e, float(np.max(np.abs(np.sort(js.energies) - np.sort(E - E[0])))))
            worst_b = max(worst_b, float(np.max(np.abs(charged_band(js) - o.band()))))
            slowest = max(slowest, time.perf_counter() - t0)
    ok = worst_e <= ORACLE_TOL and worst_b <= BAND_TOL and slowest <= 120
    return ok, f"max level error {worst_e:.2e} (tol {ORACLE_TOL:g}), band error {worst_b:.2e} " \
               f"(tol {BAND_TOL:g}), slowest case {slowest:.1f}s", \
        {"level_error": worst_e, "band_error": worst_b, "slowest_seconds": slowest}


def c2_bands(eps=0.05, sizes=(8, 10, 12), e_max=3.5):
    cs = [band_constant(ising_spectrum(n, eps), eps, e_max) for n in sizes]
    spread = (max(cs) - min(cs)) / cs[-1] if cs[-1] > 0 else np.inf
    ok = cs[-1] <= BAND_C_MAX and spread <= BAND_C_SPREAD
    return ok, f"c(N) = {', '.join(f'{c:.4g}' for c in cs)} (≤ {BAND_C_MAX:g}, spread {spread:.1%} ≤ 20%)", \
        {"sizes": list(sizes), "c": cs, "spread": spread}


def c3_lightcone(n=14, eps=0.1, times=(0.0, 0.5, 1.0, 2.0, 3.0), threshold=1e-3, r0=0.0):
    lat, h = ising_chain(n, eps)
    cert = certificate(eps)
    eng = EvolutionEngine(h, js=ising_spectrum(n, eps))
    a = pauli(lat, 0, "x")
    prof = lightcone_profile(eng, a, a, times, range(0, n // 2 + 1), threshold, r0, fit=True, tol=1e-8)
    env = envelope_check(prof, cert, a, a, DecayFunction(dim=1))
    outside = prof.outside() & (prof.samples[:, 2] > 0)
    ratios = np.asarray(prof.samples[:, 3]) / np.where(np.isnan(env["envelope"]), np.inf, env["envelope"])
    worst_out = float(np.max(ratios[outside])) if outside.any() else 0.0
    ok = prof.v_emp <= cert.v and env["dominated"] and worst_out <= 1.0
    return ok, f"v_emp = {prof.v_emp:.4g} ≤ v* = {cert.v:.6g}; {int(outside.sum())} outside-cone samples, " \
               f"worst sample/envelope {worst_out:.2e}", \
        {"v_emp": prof.v_emp, "v_star": cert.v, "lambda_star": cert.lam, "C": cert.c,
         "worst_ratio_outside": worst_out, "worst_ratio_all": env["worst_ratio"], "profile": prof.to_dict()}


def c4_velocity(n=16, eps=0.1):
    js = ising_spectrum(n, eps, levels=4)
    sh = extract_mass_shell(js, SHELL_WINDOW)
    vr = group_velocity(sh)
    o = IsingChainOracle(eps, n)
    p = np.linspace(-np.pi, np.pi, 20001)
    exact_max = float(np.max(np.abs(o.group_velocity(p))))
    interp_max = float(np.max(np.abs(sh.velocity(p))))
    grid = 2 * np.pi * np.arange(n) / n
    pointwise = float(np.max(np.abs(sh.velocity(grid) - o.group_velocity(grid))))
    v_star = certificate(eps).v
    ok = interp_max <= v_star and abs(interp_max - exact_max) <= VELOCITY_TOL
    return ok, f"max|Σ'| = {interp_max:.10f} vs analytic {exact_max:.10f} (|Δ| = {abs(interp_max - exact_max):.1e}, " \
               f"tol {VELOCITY_TOL:g}); ≤ v* = {v_star:.4g}", \
        {"max_speed": interp_max, "analytic_max": exact_max, "pointwise_error": pointwise, "v_star": v_star,
         "finite_difference_discrepancy": vr.discrepancy}


def c5_transfer(n=10, eps=0.1, cases=20, seed=5):
    fr = frame(n, eps)
    lat = fr.lattice
    rng = np.random.default_rng(seed)
    worst_f = worst_a = 0.0
    for _ in range(cases):
        a = smear(_random_local(lat, rng), _random_filter(rng), fr)
        f2 = _random_filter(rng)
        b = smear(a, f2, fr)
        lo = rng.uniform(0, 3)
        delta = (fr.energies >= lo) & (fr.energies <= lo + rng.uniform(0.5, 2))
        worst_f = max(worst_f, em_transfer_check(b, fr, delta, transfer=f2).residual)
        worst_a = max(worst_a, em_transfer_check(b, fr, delta).residual)
    ok = max(worst_f, worst_a) <= TRANSFER_TOL
    return ok, f"max residual {max(worst_f, worst_a):.2e} over {cases} filtered operators (tol {TRANSFER_TOL:g})", \
        {"filter_support_residual": worst_f, "arveson_residual": worst_a}


def c6_quadrature(n=10, eps=0.1, cases=10, seed=6):
    fr = frame(n, eps)
    lat = fr.lattice
    rng = np.random.default_rng(seed)
    worst = 0.0
    rows = []
    for _ in range(cases):
        a = _random_local(lat, rng)
        f = _random_filter(rng, 0.5, 1.5)
        q = smear_quadrature(a, f, fr, tol=QUADRATURE_TOL / 10)
        d = (smear(a, f, fr) - q.operator).norm()
        worst = max(worst, d)
        rows.append({"discrepancy": d, "t_max": q.t_max, "nodes": q.nodes, "truncation": q.truncation})
    ok = worst <= QUADRATURE_TOL
    return ok, f"max ‖eigenbasis - quadrature‖ = {worst:.2e} over {cases} cases (tol {QUADRATURE_TOL:g})", \
        {"cases": rows}


def _creation_setup(n=12, eps=0.1, p0=np.pi / 3, widths=(0.3, 0.6)):
    js = ising_spectrum(n, eps)
    sh = extract_mass_shell(js, SHELL_WINDOW)
    fr = frame(n, eps, 3.0)
    lat = fr.lattice
    co = make_creation_operator(pauli(lat, 0, "x"), fr, sh, p0, widths)
    g = WavePacket(sh, Window(0, float(fr.grid.points[fr.grid.nearest(p0)][0]), widths[1]))
    return sh, fr, co, g


def c7_invariance():
    _, _, co, g = _creation_setup()
    dev = single_particle_invariance(co.operator, g, range(11))
    ok = max(dev) <= INVARIANCE_TOL and co.passed
    return ok, f"max ‖B*_t(g_t)Ω - B*(g)Ω‖ = {max(dev):.2e} for t = 0..10 (tol {INVARIANCE_TOL:g}); " \
               f"creation diagnostics {'pass' if co.passed else 'fail'}", \
        {"deviations": dev, "diagnostics": co.diagnostics}


def c8_stationary_phase(m=4096):
    sh = extract_mass_shell(ising_spectrum(12, 0.1), SHELL_WINDOW)
    g = WavePacket(sh, Window(0, 0.0, 1.0))
    t0 = time.perf_counter()
    ns = packet_norm_scaling(g, np.geomspace(300, 8000, 12), m)
    el = time.perf_counter() - t0
    ok = (ns.slope_sup is not None and abs(ns.slope_sup + 0.5) <= SLOPE_TOL and abs(ns.slope_l1 - 0.5) <= SLOPE_TOL
          and el <= 60)
    return ok, f"slopes sup|g_t| {ns.slope_sup:.4f}, ‖g_t‖₁ {ns.slope_l1:.4f} (targets ∓0.5 ± {SLOPE_TOL:g}, " \
               f"grid {m}, {int(ns.used.sum())} pre-wrap times)", ns.to_dict()


def fock_setup(cfg=FOCK):
    n, eps = cfg["n"], cfg["eps"]
    js = ising_spectrum(n, eps)
    sh = extract_mass_shell(js, SHELL_WINDOW)
    fr = frame(n, eps, cfg["ceiling"])
    seed = pauli(fr.lattice, 0, "x")
    parts, filters = [], []
    for sgn in (1, -1):
        p = float(fr.grid.points[fr.grid.index(sgn * cfg["k"])][0])
        co = make_creation_operator(seed, fr, sh, p, (cfg["wE"], None))
        g = WavePacket(sh, Window(0, p, cfg["wp"]), sgn * cfg["center"])
        b = co.operator
        b = b.scale(1 / np.linalg.norm(hr_operator(b, g, 0.0) @ fr.vacuum))
        parts.append((b, g))
        filters.append(co.filter)
    return sh, fr, parts, filters


def c9_fock(cfg=FOCK):
    _, _, parts, filters = fock_setup(cfg)
    devs, cross = [], []
    for t in cfg["times"]:
        two = scattering_state(parts, t, filters, commutators=False)
        one = scattering_state(parts[:1], t, commutators=False)
        devs.append(fock_factorization_check(two, two).deviation)
        cross.append(fock_factorization_check(two, one).deviation)
    ok = monotone_decreasing(devs) and devs[-1] <= FOCK_FINAL and monotone_decreasing(cross)
    return ok, f"permanent deviation {', '.join(f'{d:.3g}' for d in devs)} (final ≤ {FOCK_FINAL:g}); " \
               f"cross-sector {', '.join(f'{c:.1e}' for c in cross)}", \
        {"times": list(cfg["times"]), "deviation": devs, "cross": cross, "config": dict(cfg)}


def c10_additivity_gap(eps=0.1, n=12, sizes=tuple(range(8, 15))):
    js = ising_spectrum(n, eps)
    c = band_constant(js, eps, 3.5)
    add = check_additivity(js, 100, c * 2 * eps, seed=10)
    gf = gap_flow(ising(eps), sizes, GAP_FLOOR)
    og = [IsingChainOracle(eps, s).gap() for s in sizes]
    gerr = float(np.max(np.abs(np.array(gf.gaps) - og)))
    ok = add.passed and add.tested == 100 and min(gf.gaps) > GAP_FLOOR and gerr <= GAP_ORACLE_TOL
    return ok, f"additivity worst {add.worst:.3g} ≤ {add.tol:.3g} on {add.tested} pairs; gaps " \
               f"{', '.join(f'{g:.6f}' for g in gf.gaps)} > {GAP_FLOOR:g}, oracle error {gerr:.1e}", \
        {"additivity": add.to_dict(), "gap_flow": gf.to_dict(), "oracle_gaps": og}


def property_battery(seed: int = 11) -> dict[str, bool]:
    """Module invariants under randomized inputs with fixed seeds."""
    rng = np.random.default_rng(seed)
    out: dict[str, bool] = {}
    # dynamics
    lat, h = ising_chain(8, 0.1)
    eng = EvolutionEngine(h)
    A = random_operator(lat.region([0]), rng, hermitian=True)
    from .dynamics import evolve_operator
    from .operators import embed
    X = evolve_operator(eng, A, 0.7).matrix
    out["unitarity: spectrum of τ_t(A)"] = bool(np.allclose(np.linalg.eigvalsh(X),
                                                            np.linalg.eigvalsh(embed(A, lat.full()).dense()),
                                                            atol=1e-10))
    Y = eng.heisenberg_matrix(eng.heisenberg_matrix(embed(A, lat.full()).dense(), 0.3), 0.4)
    out["group law"] = bool(np.linalg.norm(Y - X, 2) <= 1e-9)
    bd = boundary_difference(ising(0.1), (8, 10, 12, 14), 3.0)
    out["boundary independence decreasing"] = bool(np.all(np.diff(bd) < 0))
    cl = clustering_profile(ising_chain(12, 0.1)[1], pauli(ising_chain(12, 0.1)[0], 0, "x"),
                            pauli(ising_chain(12, 0.1)[0], 0, "x"), range(1, 6))
    out["clustering rate positive"] = cl.rate > 0
    # arveson
    fr = frame(8, 0.1)
    a = random_operator(fr.lattice.region([0, 1]), rng)
    f, g = _random_filter(rng), _random_filter(rng)
    out["filter calculus"] = bool((smear(smear(a, f, fr), g, fr) - smear(a, f * g, fr)).norm() <= 1e-10)
    out["adjoint covariance"] = bool((smear(a, f, fr).adjoint
                                      - smear(fr.represent(a).adjoint, f.reflected(), fr)).norm() <= 1e-12)
    sa = arveson_spectrum(smear(a, f, fr), fr)
    out["reflection of bins"] = sa.negated().keys() == arveson_spectrum(smear(a, f, fr).adjoint, fr).keys()
    gm = f.momentum_part()
    full_bins = arveson_spectrum(a, fr, threshold=1e-12)
    sub = arveson_spectrum(smear(a, gm, fr), fr, threshold=1e-12)
    out["spatial smearing containment"] = sub.keys() <= full_bins.keys()
    out["marginal composition"] = bool((smear(smear(a, f.energy_part(), fr), f.momentum_part(), fr)
                                        - smear(a, f, fr)).norm() <= 1e-12)
    prof = almost_locality_profile(smear(pauli(fr.lattice, 0, "x"), FilterFunction.box(1.0, 1.0), fr),
                                   fr.lattice, range(0, 5))
    out["almost locality monotone"] = prof.monotone
    # scattering
    sh, frs, co, gp = _creation_setup()
    out["Parseval"] = all(abs(np.sum(np.abs(gp.profile(t)) ** 2) - np.sum(np.abs(gp.amplitudes()) ** 2)) <= 1e-12
                          for t in (0.0, 2.5, 9.0))
    out["derivative identity order"] = derivative_identity_check(co.operator, gp, 1.5).order >= 1.9
    frac, slope = velocity_pair_density(sh, np.geomspace(2e-3, 2e-2, 6))
    out["velocity-disjointness density ∝ δ"] = abs(slope - 1) <= 0.2
    return out


def c11_properties(budget_s: float = 45 * 60, elapsed: float = 0.0):
    t0 = time.perf_counter()
    res = property_battery()
    total = elapsed + time.perf_counter() - t0
    bad = [k for k, v in res.items() if not v]
    ok = not bad and total <= budget_s
    return ok, f"{len(res) - len(bad)}/{len(res)} invariants green; suite wall clock {total:.0f}s (≤ {budget_s:.0f}s)" \
               + (f"; failing: {', '.join(bad)}" if bad else ""), {"invariants": res, "wall_clock": total}


CRITERIA = [
    (1, "oracle equivalence", c1_oracle),
    (2, "band structure", c2_bands),
    (3, "light cone vs certificate", c3_lightcone),
    (4, "velocity bound", c4_velocity),
    (5, "energy-momentum transfer", c5_transfer),
    (6, "smearing cross-validation", c6_quadrature),
    (7, "single-particle invariance", c7_invariance),
    (8, "stationary-phase exponents", c8_stationary_phase),
    (9, "Fock factorization trend", c9_fock),
    (10, "additivity and gap flow", c10_additivity_gap),
    (11, "property suites", c11_properties),
]


def run_one(number: int, elapsed: float = 0.0) -> CriterionResult:
    num, name, fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        ok, summary, detail = fn(elapsed=elapsed) if num == 11 else fn()
    except Exception as exc:  # a crash is a failure of that criterion, not of the suite
        ok, summary, detail = False, f"error: {type(exc).__name__}: {exc}", {}
    return CriterionResult(num, name, bool(ok), summary, detail, time.perf_counter() - t0)


def run(select=None, echo=print) -> list[CriterionResult]:
    out = []
    elapsed = 0.0
    for num, _, _ in CRITERIA:
        if select and num not in select:
            continue
        r = run_one(num, elapsed)
        elapsed += r.seconds
        out.append(r)
        if echo:
            echo(r.line())
    return out


if __name__ == "__main__":
    import sys
    sys.exit(0 if all(r.passed for r in run([int(a) for a in sys.argv[1:]] or None)) else 1)
