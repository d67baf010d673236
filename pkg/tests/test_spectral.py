import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ising_dense, momentum_dims, shift_matrix
from hrlab.errors import AmbiguityError, CoverageError, DomainError
from hrlab.interactions import build_hamiltonian, ising
from hrlab.lattice import Lattice
from hrlab.oracle import IsingChainOracle, quasiparticle_energy
from hrlab.sectors import diagonalize_sectors
from hrlab.spectral import (TrigInterpolant, band_constant, check_additivity, energy_residual,
                            extract_mass_shell, gap_flow, group_velocity, momentum_sectors)


def spectrum(n, eps, **kw):
    lat = Lattice(n, boundary="periodic")
    h = build_hamiltonian(ising(eps), lat)
    return h, momentum_sectors(h, lat, **kw)


def test_sector_dimensions():
    lat = Lattice(6, boundary="periodic")
    secs = diagonalize_sectors(build_hamiltonian(ising(0.1), lat), lat, None)
    assert [s.dim for s in secs] == momentum_dims(6) == [14, 9, 11, 10, 11, 9]


@given(st.floats(0.0, 0.3), st.sampled_from([4, 5, 6, 7]))
def test_levels_match_dense_and_free_fermions(eps, n):
    h, js = spectrum(n, eps)
    w = np.linalg.eigvalsh(ising_dense(n, eps))
    assert np.allclose(np.sort(js.energies), w - w[0], atol=1e-10)
    E, K, _ = IsingChainOracle(eps, n).levels()
    assert np.allclose(np.sort(js.energies), np.sort(E - E[0]), atol=1e-9)
    assert js.complete and energy_residual(js, h) < 1e-10


def test_momentum_labels_are_translation_eigenvalues():
    _, js = spectrum(6, 0.2)
    T = shift_matrix(6, 1)
    for i in range(0, len(js), 5):
        v = js.vector(i)
        p = js.momenta[i, 0]
        assert np.allclose(T @ v, np.exp(-1j * p) * v, atol=1e-10)


def test_oracle_momenta_agree():
    _, js = spectrum(6, 0.1)
    E, K, _ = IsingChainOracle(0.1, 6).levels()
    pts = {(round(e, 8), k) for e, k, _ in js.points()}
    assert pts == {(round(e - E[0], 8), int(k)) for e, k in zip(E, K)}


def test_decoupled_spins_integer_bands():
    _, js = spectrum(6, 0.0)
    assert np.allclose(js.energies, np.rint(js.energies), atol=1e-12)
    sh = extract_mass_shell(js, (0.5, 1.5))
    assert np.allclose(sh.sigma, 1.0, atol=1e-12)
    assert sh.valid is False          # a flat band has no curvature anywhere
    assert band_constant(js, 0.0, 3.5) == 0.0


def test_band_constant_frozen():
    cs = [band_constant(spectrum(n, 0.05)[1], 0.05, 3.5) for n in (8, 10)]
    assert cs == pytest.approx([2.0, 2.0], abs=1e-3)


def test_mass_shell_matches_dispersion():
    _, js = spectrum(10, 0.1)
    o = IsingChainOracle(0.1, 10)
    sh = extract_mass_shell(js, (0.5, 1.5))
    assert np.allclose(sh.sigma, o.band(), atol=1e-10)
    assert sh.valid and sh.residual < 1e-12
    assert np.all(sh.margin > 0.1)
    vr = group_velocity(sh)
    p = 2 * np.pi * np.arange(10) / 10
    assert np.max(np.abs(vr.interpolant - o.group_velocity(p))) < 1e-4
    assert vr.max_speed <= 0.2 + 1e-4


def test_interpolated_velocity_converges_geometrically():
    errs = []
    for n in (8, 12, 16):
        sh = extract_mass_shell(spectrum(n, 0.1, levels=3)[1], (0.5, 1.5))
        q = np.linspace(-np.pi, np.pi, 201)
        errs.append(np.max(np.abs(sh.velocity(q) - IsingChainOracle(0.1, n).group_velocity(q))))
    assert errs[0] > 10 * errs[1] > 100 * errs[2]
    assert errs[2] < 1e-6


def test_shell_window_errors():
    _, js = spectrum(6, 0.1)
    with pytest.raises(AmbiguityError):
        extract_mass_shell(js, (0.5, 2.5))
    with pytest.raises(CoverageError):
        extract_mass_shell(js, (0.5, 0.8))


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.sampled_from([8, 9, 12]))
def test_interpolant_reproduces_trig_polynomials(c, n):
    f = lambda p: c[0] + c[1] * np.cos(p) + c[2] * np.sin(2 * p)
    df = lambda p: -c[1] * np.sin(p) + 2 * c[2] * np.cos(2 * p)
    t = TrigInterpolant(f(2 * np.pi * np.arange(n) / n))
    q = np.linspace(-3, 3, 17)
    assert np.allclose(t(q), f(q), atol=1e-12)
    assert np.allclose(t.derivative(q), df(q), atol=1e-11)


def test_truncated_spectrum_ceiling():
    _, js = spectrum(8, 0.1, levels=3)
    assert not js.complete and np.isfinite(js.ceiling)
    _, full = spectrum(8, 0.1)
    low = np.sort(full.energies[full.energies <= js.ceiling])
    assert np.allclose(np.sort(js.energies[js.energies <= js.ceiling]), low)


def test_additivity():
    _, js = spectrum(10, 0.1)
    c = band_constant(js, 0.1, 3.5)
    rep = check_additivity(js, 50, c * 2 * 0.1, seed=1)
    assert rep.passed and rep.tested == 50
    assert not check_additivity(js, 50, 1e-6, seed=1).passed


def test_gap_flow():
    gf = gap_flow(ising(0.1), (6, 8, 10))
    assert gf.gaps == pytest.approx([IsingChainOracle(0.1, n).gap() for n in (6, 8, 10)], abs=1e-9)
    assert gf.verdict == "PASS"
    assert gap_flow(ising(0.3), (6, 8, 10)).verdict == "REPORT"
    with pytest.raises(DomainError):
        gap_flow(ising(0.1), (6, 8))


def test_quasiparticle_band():
    # Λ(p) = 2√((1/2 - ε cos p)² + ε² sin² p) at ε = 0 is 1
    assert np.allclose(quasiparticle_energy(np.linspace(0, 6, 7), 0.0), 1.0)
