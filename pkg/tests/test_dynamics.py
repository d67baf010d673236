import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import heisenberg_expm, ising_dense, kron_sites, X
from hrlab.dynamics import (EvolutionEngine, boundary_difference, clustering_profile, commutator_norm,
                            envelope_check, evolve_operator, fit_front_decay, front_velocity, ground_state,
                            lightcone_profile)
from hrlab.errors import DiagnosticError, DomainError
from hrlab.interactions import build_hamiltonian, ising, lr_velocity
from hrlab.lattice import Lattice
from hrlab.operators import embed, pauli

GRID = np.linspace(0.1, 5.0, 50)


@pytest.fixture(scope="module")
def chain6():
    lat = Lattice(6, boundary="periodic")
    return lat, build_hamiltonian(ising(0.2), lat)


@pytest.mark.parametrize("method", ["dense", "sectors", "krylov"])
def test_engines_match_expm(chain6, method):
    lat, h = chain6
    eng = EvolutionEngine(h, method)
    A = embed(pauli(lat, 0, "x"), lat.full()).dense()
    ref = heisenberg_expm(ising_dense(6, 0.2), A, 1.3)
    M = eng.heisenberg_matrix(A, 1.3)
    M = M @ np.eye(64) if not isinstance(M, np.ndarray) else M
    assert np.allclose(M, ref, atol=1e-9)


def test_unitarity_and_reconstruction(chain6):
    _, h = chain6
    eng = EvolutionEngine(h, "dense")
    assert eng.unitarity_defect() < 1e-12 and eng.reconstruction_residual() < 1e-12
    assert EvolutionEngine(h, "sectors").unitarity_defect() < 1e-12
    with pytest.raises(DomainError):
        EvolutionEngine(h, "krylov").unitarity_defect()
    with pytest.raises(DomainError):
        EvolutionEngine(h, "bogus")


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_group_law(s, t):
    lat = Lattice(5, boundary="periodic")
    eng = EvolutionEngine(build_hamiltonian(ising(0.15), lat), "dense")
    A = embed(pauli(lat, 0, "z"), lat.full()).dense()
    assert np.allclose(eng.heisenberg_matrix(eng.heisenberg_matrix(A, s), t), eng.heisenberg_matrix(A, s + t),
                       atol=1e-10)


def test_time_zero_is_identity(chain6):
    lat, h = chain6
    a = pauli(lat, 0, "x")
    assert np.array_equal(evolve_operator(EvolutionEngine(h), a, 0.0).dense(), embed(a, lat.full()).dense())


def test_evolution_preserves_spectrum(chain6):
    lat, h = chain6
    X_t = evolve_operator(EvolutionEngine(h, "dense"), pauli(lat, 0, "x"), 0.8).dense()
    assert np.allclose(np.linalg.eigvalsh(X_t), np.repeat([-1, 1], 32), atol=1e-10)


def test_decoupled_spins_have_no_spreading():
    lat = Lattice(6, boundary="periodic")
    eng = EvolutionEngine(build_hamiltonian(ising(0.0), lat))
    a = pauli(lat, 0, "x")
    prof = lightcone_profile(eng, a, a, [0.0, 1.0, 5.0], range(4), fit=False)
    assert np.all(prof.samples[prof.samples[:, 2] > 0, 3] < 1e-14)
    assert prof.v_emp == 0


def test_commutator_norm_dense_vs_implicit():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(32, 32)), rng.normal(size=(32, 32))
    import scipy.sparse.linalg as spla
    ref = np.linalg.norm(A @ B - B @ A, 2)
    assert commutator_norm(A, B) == pytest.approx(ref, rel=1e-10)
    assert commutator_norm(spla.aslinearoperator(A), B, tol=1e-12) == pytest.approx(ref, rel=1e-8)


def test_front_velocity():
    s = np.array([[1.0, 0, 2, 0.5], [1.0, 0, 3, 1e-5], [2.0, 0, 4, 0.1]])
    assert front_velocity(s, 1e-3, 0.0) == 2.0
    assert front_velocity(s, 1e-3, 3.0) == 0.5
    assert front_velocity(np.array([[0.0, 0, 1, 1.0]]), 1e-3, 0.0) == np.inf


@pytest.fixture(scope="module")
def profile8():
    lat = Lattice(8, boundary="periodic")
    eng = EvolutionEngine(build_hamiltonian(ising(0.1), lat))
    a = pauli(lat, 0, "x")
    return a, lightcone_profile(eng, a, a, [0.0, 0.5, 1.0, 2.0], range(5))


def test_lightcone_below_certificate(profile8):
    a, prof = profile8
    cert = lr_velocity(ising(0.1), GRID)
    env = envelope_check(prof, cert, a, a)
    assert prof.v_emp <= cert.v
    assert env["dominated"] and env["worst_ratio"] < 1
    assert prof.decay_rate > 0


def test_decay_fit_needs_samples(profile8):
    _, prof = profile8
    from dataclasses import replace
    few = replace(prof, samples=prof.samples[:3])
    with pytest.raises(DiagnosticError):
        fit_front_decay(few)


def test_boundary_independence_decreasing():
    d = boundary_difference(ising(0.1), (6, 8, 10), 3.0)
    assert d[0] > d[1] > d[2] > 0


def test_ground_state_and_clustering():
    lat = Lattice(8, boundary="periodic")
    h = build_hamiltonian(ising(0.1), lat)
    e0, psi = ground_state(h)
    assert e0 == pytest.approx(np.linalg.eigvalsh(ising_dense(8, 0.1))[0], abs=1e-10)
    a = pauli(lat, 0, "x")
    cl = clustering_profile(h, a, a, range(1, 5))
    assert cl.rate > 0 and np.all(np.diff(cl.values) < 0)
    assert abs(np.vdot(psi, kron_sites(8, {4: X}) @ psi)) < 1e-12
