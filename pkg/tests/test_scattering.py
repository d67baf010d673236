import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrlab.arveson import SpectralFrame, Window, make_creation_operator
from hrlab.errors import DomainError
from hrlab.interactions import build_hamiltonian, ising
from hrlab.lattice import Lattice
from hrlab.operators import pauli
from hrlab.scattering import (WavePacket, derivative_identity_check, fock_factorization_check, hr_operator,
                              monotone_decreasing, packet_center_velocity, packet_norm_scaling, permanent,
                              recurrence_time, scattering_state, single_particle_invariance, velocity_gap,
                              velocity_pair_density)
from hrlab.spectral import extract_mass_shell, momentum_sectors


@pytest.fixture(scope="module")
def setup8():
    lat = Lattice(8, boundary="periodic")
    js = momentum_sectors(build_hamiltonian(ising(0.1), lat), lat)
    sh = extract_mass_shell(js, (0.5, 1.5))
    fr = SpectralFrame(js, 3.3)
    seed = pauli(lat, 0, "x")
    parts = []
    for k in (2, -2):
        p = float(fr.grid.points[fr.grid.index(k)][0])
        co = make_creation_operator(seed, fr, sh, p, (0.6, None))
        parts.append((co.operator, WavePacket(sh, Window(0, p, 1.2), np.sign(k) * 1.0), co.filter))
    return sh, fr, parts


@pytest.fixture(scope="module")
def shell12():
    lat = Lattice(12, boundary="periodic")
    return extract_mass_shell(momentum_sectors(build_hamiltonian(ising(0.1), lat), lat), (0.5, 1.5))


@given(st.floats(-np.pi, np.pi), st.floats(0.3, 3.0), st.floats(-4, 4), st.floats(-50, 50),
       st.sampled_from([12, 64, 256]))
def test_parseval(shell12, p0, wp, center, t, m):
    g = WavePacket(shell12, Window(0, p0, wp), center)
    amp = g.amplitudes(m)
    assert np.sum(np.abs(g.profile(t, m)) ** 2) == pytest.approx(np.sum(np.abs(amp) ** 2), rel=1e-12)
    # the physical grid is normalized
    assert np.sum(np.abs(g.profile(t)) ** 2) == pytest.approx(1.0, rel=1e-12)


def test_packet_center_moves_with_group_velocity(shell12):
    p0 = np.pi / 2
    g = WavePacket(shell12, Window(0, p0, 0.4))
    v = packet_center_velocity(g, np.linspace(0, 20, 9), m=2048)
    assert v == pytest.approx(float(shell12.velocity(np.array([p0]))[0]), rel=0.05)


def test_norm_scaling_slopes(shell12):
    g = WavePacket(shell12, Window(0, 0.0, 1.0))
    ns = packet_norm_scaling(g, np.geomspace(300, 8000, 12), 4096)
    assert ns.slope_sup == pytest.approx(-0.5, abs=0.1)
    assert ns.slope_l1 == pytest.approx(0.5, abs=0.1)
    # a window around the inflection point is excluded from the fit
    infl = WavePacket(shell12, Window(0, np.pi / 2, 1.0))
    bad = packet_norm_scaling(infl, np.geomspace(10, 100, 4), 1024)
    assert bad.slope_sup is None and bad.warnings


def test_velocity_gap_and_recurrence(shell12):
    a = WavePacket(shell12, Window(0, 1.0, 0.3))
    b = WavePacket(shell12, Window(0, -1.0, 0.3))
    assert velocity_gap(a, b) > 0 and velocity_gap(a, b) == velocity_gap(b, a)
    assert velocity_gap(a, a) == 0.0
    p = np.linspace(-np.pi, np.pi, 2001)
    assert recurrence_time(shell12) == pytest.approx(12 / (2 * np.max(np.abs(shell12.velocity(p)))))


def test_velocity_pair_density_linear(shell12):
    frac, slope = velocity_pair_density(shell12, np.geomspace(1e-3, 1e-2, 6), m=1024)
    assert np.all(np.diff(frac) > 0)
    assert slope == pytest.approx(1.0, abs=0.2)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_permanent_matches_definition(n, seed):
    m = np.random.default_rng(seed).normal(size=(n, n)) + 1j
    ref = sum(np.prod([m[i, s[i]] for i in range(n)]) for s in itertools.permutations(range(n)))
    assert permanent(m) == pytest.approx(ref)
    assert permanent(np.eye(n)) == 1
    assert permanent(np.ones((n, n))) == pytest.approx(math.factorial(n))


def test_monotone_floor():
    assert monotone_decreasing([3, 2, 2, 1e-14, 1e-13])
    assert not monotone_decreasing([1, 2])


def test_single_particle_invariance(setup8):
    _, _, parts = setup8
    b, g, _ = parts[0]
    assert max(single_particle_invariance(b, g, range(6))) < 1e-8


def test_derivative_identity_second_order(setup8):
    _, _, parts = setup8
    b, g, _ = parts[0]
    chk = derivative_identity_check(b, g, 1.3, steps=(1e-2, 1e-3))
    assert chk.order >= 1.9


def test_hr_operator_sum_is_linear_in_profile(setup8):
    _, _, parts = setup8
    b, g, _ = parts[0]
    p1, p2 = g.profile(0.5), g.profile(2.0)
    lhs = hr_operator(b, g, 0.5, profile=p1 + 2 * p2)
    rhs = hr_operator(b, g, 0.5, profile=p1).matrix + 2 * hr_operator(b, g, 0.5, profile=p2).matrix
    assert np.allclose(lhs.matrix, rhs, atol=1e-12)


def test_fock_single_particle_and_covariance(setup8):
    _, _, parts = setup8
    cfg = [(b, g) for b, g, _ in parts]
    one = scattering_state(cfg[:1], 2.0)
    rep = fock_factorization_check(one, one)
    assert rep.deviation < 1e-12 and rep.covariance < 1e-10
    two = scattering_state(cfg, 2.0, [f for *_, f in parts])
    assert fock_factorization_check(two, two).covariance < 1e-10
    assert fock_factorization_check(two, one).permanent is None
    assert two.norm_bound >= np.linalg.norm(two.psi)


def test_scattering_state_domain_errors(setup8):
    _, fr, parts = setup8
    b, g, f = parts[0]
    with pytest.raises(DomainError, match="overlap"):
        scattering_state([(b, g), (b, g)], 1.0)
    with pytest.raises(DomainError, match="empty"):
        scattering_state([], 1.0)
    with pytest.raises(DomainError, match="ceiling"):
        scattering_state([(b, g), parts[1][:2]], 1.0, [f.__class__.box(3.0, 0.5), f])
    one = scattering_state([(b, g)], 1.0)
    with pytest.raises(DomainError):
        fock_factorization_check(one, scattering_state([(b, g)], 2.0))
