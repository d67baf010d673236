import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from oracles import PAULIS, X, Z, kron_sites
from hrlab.errors import DomainError
from hrlab.lattice import Lattice
from hrlab.operators import (LocalOperator, block_krylov_norm, commutator, conditional_expectation, embed,
                             is_zero, matrix_norm, op_norm, pauli, pauli_string, partial_trace,
                             random_operator, translate)

LAT = Lattice(5)


@given(st.integers(0, 4), st.sampled_from("xyz"))
def test_embedding_matches_kronecker(i, w):
    a = pauli(LAT, LAT.coord(i), w)
    assert np.allclose(embed(a, LAT.full()).dense(), kron_sites(5, {i: PAULIS[w]}))


def test_pauli_string_order():
    a = pauli_string(LAT, {-2: "x", 1: "z"})
    assert np.allclose(embed(a, LAT.full()).dense(), kron_sites(5, {0: X, 3: Z}))


@given(st.integers(0, 2**31 - 1))
def test_embedding_respects_products(seed):
    rng = np.random.default_rng(seed)
    a = random_operator(LAT.region([0, 2]), rng)
    b = random_operator(LAT.region([1, 2]), rng)
    u = LAT.region([0, 1, 2])
    assert np.allclose(embed(a @ b, u).dense(), embed(a, u).dense() @ embed(b, u).dense())


@given(st.integers(0, 2**31 - 1))
def test_commutator_antisymmetric_and_local(seed):
    rng = np.random.default_rng(seed)
    a = random_operator(LAT.region([0, 1]), rng)
    b = random_operator(LAT.region([1]), rng)
    c, d = commutator(a, b), commutator(b, a)
    assert np.allclose(c.dense(), -embed(d, c.support).dense())
    assert is_zero(commutator(a, random_operator(LAT.region([-2, -1]), rng)))


def test_translation_periodic_wraps():
    lat = Lattice(4, boundary="periodic")
    a = pauli(lat, 1, "x")
    assert translate(a, 1).support.points == [-2]
    with pytest.raises(DomainError):
        translate(pauli(LAT, 2, "x"), 1)


@given(st.integers(0, 2**31 - 1))
def test_norms_agree_with_dense(seed):
    rng = np.random.default_rng(seed)
    a = random_operator(LAT.region([0, 1, 2]), rng)
    M = a.dense()
    ref = np.linalg.norm(M, 2)
    assert op_norm(a) == pytest.approx(ref, rel=1e-10)
    assert matrix_norm(spla.aslinearoperator(M), tol=1e-12) == pytest.approx(ref, rel=1e-8)
    H = M + M.conj().T
    assert block_krylov_norm(H, hermitian=True, tol=1e-12) == pytest.approx(np.linalg.norm(H, 2), rel=1e-8)


def test_krylov_absolute_floor_resolves_roundoff():
    tiny = 1e-15 * np.random.default_rng(0).normal(size=(64, 64))
    assert block_krylov_norm(spla.aslinearoperator(tiny), tol=1e-12, atol=1e-13) <= 1e-13


def test_partial_trace_of_product():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    assert np.allclose(partial_trace(np.kron(a, b), [0, 1], [0]), a * np.trace(b) / 2)
    assert np.allclose(partial_trace(np.kron(a, b), [0, 1], [1]), b * np.trace(a) / 2)


@given(st.integers(0, 2**31 - 1))
def test_conditional_expectation_properties(seed):
    rng = np.random.default_rng(seed)
    a = random_operator(LAT.region([0, 1, 2]), rng)
    target = LAT.region([1, 2])
    e = conditional_expectation(a, target)
    # idempotent, contractive, and bimodular over the target algebra
    assert np.allclose(conditional_expectation(e, target).dense(), e.dense())
    assert op_norm(e) <= op_norm(a) + 1e-12
    c = random_operator(target, rng)
    lhs = conditional_expectation(embed(c, a.support) @ a, target).dense()
    assert np.allclose(lhs, c.dense() @ e.dense())


def test_hermitian_flag_checked():
    with pytest.raises(DomainError):
        LocalOperator(LAT.region([0]), np.array([[0, 1], [0, 0]]), hermitian=True)
    with pytest.raises(DomainError):
        LocalOperator(LAT.region([0]), np.eye(4))
