import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrlab.arveson import (FilterFunction, SpectralFrame, Window, almost_locality_profile, arveson_spectrum,
                           em_transfer_check, harmonic_bound_check, make_creation_operator, shell_mask, smear,
                           smear_quadrature, smooth_step, spatial_profile)
from hrlab.errors import DomainError
from hrlab.interactions import build_hamiltonian, ising
from hrlab.lattice import Lattice
from hrlab.operators import embed, pauli, random_operator
from hrlab.spectral import extract_mass_shell, momentum_sectors


def make_frame(n, eps, ceiling=None):
    lat = Lattice(n, boundary="periodic")
    return SpectralFrame(momentum_sectors(build_hamiltonian(ising(eps), lat), lat), ceiling)


FR6 = make_frame(6, 0.15)
FR6_FREE = make_frame(6, 0.0)

filters = st.builds(lambda e, we, p, wp: FilterFunction.box(e, we, p, wp),
                    st.floats(-3, 3), st.floats(0.2, 2.0), st.floats(-np.pi, np.pi), st.floats(0.3, np.pi))
seeds = st.integers(0, 2**31 - 1)


def rand_op(seed, frame=FR6):
    lat = frame.lattice
    return random_operator(lat.region([0, 1]), np.random.default_rng(seed))


def test_window_shape():
    w = Window("E", 1.0, 0.4)
    assert w(np.array([1.0, 1.2, 0.8]))  == pytest.approx([1, 1, 1])
    assert w(np.array([1.4, 0.6, 2.0])) == pytest.approx([0, 0, 0])
    assert 0 < w(1.3) < 1
    m = Window(0, np.pi - 0.1, 0.5)
    assert m(-np.pi + 0.1) == pytest.approx(1.0)      # wraps across ±π
    assert smooth_step(np.array([-1.0, 0.0, 1.0, 2.0])) == pytest.approx([0, 0, 1, 1])
    with pytest.raises(DomainError):
        Window("E", 0, 0)
    with pytest.raises(DomainError):
        Window(0, 0, 4.0)


@given(seeds, filters, filters)
def test_filter_calculus(seed, f, g):
    a = rand_op(seed)
    lhs = smear(smear(a, f, FR6), g, FR6)
    assert (lhs - smear(a, f * g, FR6)).norm() <= 1e-12 * max(1, lhs.norm())
    # marginals compose to the joint filter
    two = smear(smear(a, f.energy_part(), FR6), f.momentum_part(), FR6)
    assert (two - smear(a, f, FR6)).norm() <= 1e-12


@given(seeds, filters)
def test_adjoint_covariance(seed, f):
    a = rand_op(seed)
    lhs = smear(a, f, FR6).adjoint
    rhs = smear(FR6.represent(a).adjoint, f.reflected(), FR6)
    assert (lhs - rhs).norm() <= 1e-12


@given(seeds, filters, st.integers(-3, 3), st.floats(-5, 5))
def test_space_time_covariance(seed, f, x, t):
    a = rand_op(seed)
    b = smear(a, f, FR6)
    assert (b.translate(x) - smear(FR6.represent(a).translate(x), f, FR6)).norm() <= 1e-12
    assert (b.evolve(t) - smear(FR6.represent(a).evolve(t), f, FR6)).norm() <= 1e-12


@given(seeds, filters)
def test_arveson_reflection(seed, f):
    b = smear(rand_op(seed), f, FR6)
    assert arveson_spectrum(b.adjoint, FR6).keys() == arveson_spectrum(b, FR6).negated().keys()


@given(seeds, filters)
def test_smeared_spectrum_inside_filter_support(seed, f):
    b = smear(rand_op(seed), f, FR6)
    est = arveson_spectrum(b, FR6)
    lo, hi = f.energy_support
    assert est.within_energy(lo, hi)
    # spatial smearing only removes momentum bins
    assert arveson_spectrum(smear(rand_op(seed), f.momentum_part(), FR6), FR6, 1e-12).keys() <= \
        arveson_spectrum(rand_op(seed), FR6, 1e-12).keys()


def test_decoupled_spin_flip_transfers_unit_energy():
    est = arveson_spectrum(pauli(FR6_FREE.lattice, 0, "x"), FR6_FREE)
    assert est.energy_values() == pytest.approx([-1.0, 1.0], abs=est.de)
    assert est.momentum_marginal() == {(k,) for k in range(6)}
    assert est.contains(1.0, 2) and not est.contains(2.0, 0)


def test_spatial_profile_reproduces_window():
    f = FilterFunction.box(p0=1.0, wp=1.2)
    lat = FR6.lattice
    g = spatial_profile(f, lat)
    x = np.array([c[0] for c in lat.coords])
    p = FR6.grid.points[:, 0]
    back = (2 * np.pi) ** -0.5 * np.array([np.sum(g * np.exp(-1j * q * x)) for q in p])
    assert np.allclose(back, f(0 * p, p), atol=1e-12)


@pytest.mark.parametrize("p0", [0.0, 1.1, -2.5])
def test_quadrature_matches_eigenbasis(p0):
    a = pauli(FR6.lattice, 0, "x")
    f = FilterFunction.box(0.9, 0.7, p0, 1.4)
    q = smear_quadrature(a, f, FR6, tol=1e-8)
    assert (smear(a, f, FR6) - q.operator).norm() < 1e-7
    assert q.truncation <= 1e-8 and q.nodes > 0


def test_transfer_check():
    a = pauli(FR6.lattice, 0, "x")
    f = FilterFunction.box(1.0, 0.5, 0.0, 2.0)
    b = smear(a, f, FR6)
    delta = FR6.energies <= 1.5
    assert em_transfer_check(b, FR6, delta, transfer=f).residual <= 1e-12
    assert em_transfer_check(b, FR6, delta).residual <= 1e-12
    # a transfer set missing the actual transfer leaves a visible residual
    wrong = FilterFunction.box(-1.0, 0.5)
    assert em_transfer_check(b, FR6, delta, transfer=wrong).residual > 1e-3


def test_almost_locality():
    lat = FR6.lattice
    a = pauli(lat, 0, "x")
    prof = almost_locality_profile(a, lat, range(4))
    assert prof.distances[0] == 0.0 and prof.first_below(1e-12) == 0
    b = smear(a, FilterFunction.box(1.0, 0.8), FR6)
    pb = almost_locality_profile(b, lat, range(4))
    assert pb.monotone and pb.distances[0] > pb.distances[2] > 0
    with pytest.raises(DomainError):
        almost_locality_profile(smear(a, FilterFunction.box(1.0, 0.8), make_frame(6, 0.15, 1.5)), lat, [0])


def test_harmonic_bound():
    a = smear(pauli(FR6.lattice, 0, "x"), FilterFunction.box(-1.0, 0.5), FR6)
    delta = FR6.energies <= 2.5
    rep = harmonic_bound_check(a, FR6, delta, radii=(0, 1, 2))
    assert rep.passed and rep.constant > 0
    with pytest.raises(DomainError):
        harmonic_bound_check(a.adjoint, FR6, delta)


@pytest.fixture(scope="module")
def frame10():
    lat = Lattice(10, boundary="periodic")
    js = momentum_sectors(build_hamiltonian(ising(0.1), lat), lat)
    return SpectralFrame(js, 3.0), extract_mass_shell(js, (0.5, 1.5))


def test_creation_operator_diagnostics(frame10):
    fr, sh = frame10
    co = make_creation_operator(pauli(fr.lattice, 0, "x"), fr, sh, np.pi / 5, (0.3, 0.6))
    d = co.diagnostics
    assert co.passed and d["vacuum_annihilation"] < 1e-12 and d["shell_residual"] < 1e-12
    assert d["window_states"] >= 1 and d["density_residual"] < 1e-6
    assert shell_mask(fr, sh).sum() == 10


def test_creation_operator_rejects_bad_windows(frame10):
    fr, sh = frame10
    seed = pauli(fr.lattice, 0, "x")
    with pytest.raises(DomainError, match="non-shell"):
        make_creation_operator(seed, fr, sh, 0.0, (1.0, 1.0))
    with pytest.raises(DomainError, match="ceiling"):
        make_creation_operator(seed, fr, sh, 0.0, (2.5, 1.0))


def test_frame_basics():
    fr = make_frame(6, 0.15, 2.0)
    assert not fr.complete and np.all(fr.energies <= 2.0)
    assert np.linalg.norm(fr.vacuum) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        make_frame(6, 0.15).__class__(momentum_sectors(build_hamiltonian(ising(0.1), Lattice(6, boundary="periodic")),
                                                       Lattice(6, boundary="periodic"), levels=2), 5.0)
    M = fr.represent(embed(pauli(fr.lattice, 0, "z"), fr.lattice.full()).matrix)
    assert np.allclose(M.matrix, M.matrix.conj().T)
