import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ising_certificate, ising_dense, kron_sites, X, Y, Z
from hrlab.errors import DomainError
from hrlab.interactions import (DecayFunction, Interaction, Term, build_hamiltonian, heisenberg, interaction_norm,
                                ising, lr_velocity, shell_count, translation_defect, translation_unitary)
from hrlab.lattice import Lattice
from oracles import shift_matrix

GRID = np.linspace(0.1, 5.0, 50)


@pytest.mark.parametrize("n,eps,bc", [(4, 0.1, "periodic"), (6, 0.3, "periodic"), (5, 0.2, "open")])
def test_hamiltonian_matches_dense_oracle(n, eps, bc):
    H = build_hamiltonian(ising(eps), Lattice(n, boundary=bc)).dense()
    assert np.allclose(H, ising_dense(n, eps, bc == "periodic"))


def test_heisenberg_bond():
    H = build_hamiltonian(heisenberg(1.0, 0.5), Lattice(3)).dense()
    ref = sum(kron_sites(3, {i: P, i + 1: P}) * c for i in range(2) for P, c in ((X, 1), (Y, 1), (Z, 0.5)))
    assert np.allclose(H, ref)


def test_translation_unitary_is_shift():
    lat = Lattice(5, boundary="periodic")
    assert np.allclose(translation_unitary(lat, 2).toarray(), shift_matrix(5, 2))
    assert translation_defect(build_hamiltonian(ising(0.2), lat), lat) < 1e-12


def test_shell_count():
    assert shell_count(0, 1) == 1 and shell_count(3, 1) == 2
    assert shell_count(2, 2) == 16
    assert shell_count(2, 2, "l1") == 8


def test_decay_constant_closed_form():
    # Σ_{x∈Z} (1+|x|)^-2 = π²/3 - 1, and C = 2^{d+ε+1}‖F‖
    f = DecayFunction()
    assert f.norm == pytest.approx(math.pi ** 2 / 3 - 1, abs=3e-6)
    assert f.c_bound == pytest.approx(8 * (math.pi ** 2 / 3 - 1), rel=1e-6)


@given(st.floats(0.0, 0.24), st.floats(0.05, 5.0))
def test_interaction_norm_closed_form(eps, lam):
    assert interaction_norm(ising(eps), lam, DecayFunction()) == pytest.approx(
        max(1 + 2 * eps, 4 * eps * math.exp(lam)), rel=1e-12)


def test_certificate_frozen_values():
    cert = lr_velocity(ising(0.1), GRID)
    lam, C, v = ising_certificate(0.1)
    assert cert.lam == pytest.approx(lam, rel=1e-6)
    assert cert.c == pytest.approx(C, rel=1e-9)
    assert cert.v == pytest.approx(v, rel=1e-8)
    assert cert.v == pytest.approx(40.019, abs=1e-3)
    assert cert.c == pytest.approx(18.3189, abs=1e-4)
    assert interaction_norm(ising(0.1), 1.0, DecayFunction()) == pytest.approx(1.2)


@given(st.floats(0.02, 0.2))
def test_refinement_never_worse_than_grid(eps):
    cert = lr_velocity(ising(eps), GRID)
    assert cert.v <= min(row[3] for row in cert.table) + 1e-12


@given(st.floats(0.1, 4.0))
def test_velocity_scales_linearly(c):
    a = lr_velocity(ising(0.1), GRID, refine=False)
    b = lr_velocity(ising(0.1).scaled(c), GRID, refine=False)
    assert b.v == pytest.approx(c * a.v, rel=1e-12)


def test_envelope_grows_with_time():
    cert = lr_velocity(ising(0.1), GRID)
    e = [cert.envelope(t, 0.1, 1, 1) for t in (0, 1, 2)]
    assert e[0] < e[1] < e[2]


def test_validation():
    with pytest.raises(DomainError):
        lr_velocity(ising(0.1), [])
    with pytest.raises(DomainError):
        Interaction(1, (Term(((0,),), np.array([[0, 1], [0, 0]])),))
    with pytest.raises(DomainError):
        DecayFunction(eps_f=0)
