import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapchem.errors import DataError, LayoutError, ParseError, SymmetryError
from trapchem.fermion import (
    FermionOpSum,
    MolecularIntegrals,
    build_electronic_hamiltonian,
    dense_fermion_matrix,
    hartree_fock_state,
    jordan_wigner,
    jordan_wigner_terms,
    load_integrals,
    number_operator,
    save_integrals,
    term_census,
)
from trapchem.hilbert import HilbertLayout, pauli_matrix


def pauli_dict_matrix(coeffs, m):
    return sum(c * pauli_matrix(s) for s, c in coeffs.items()) if coeffs else np.zeros((1 << m,) * 2)


def ladder_matrices(m):
    """c_p as explicit 2**m matrices from the occupation-number definition."""
    dim = 1 << m
    out = []
    for p in range(m):
        c = np.zeros((dim, dim))
        for b in range(dim):
            bit = 1 << (m - 1 - p)
            if b & bit:
                sign = (-1) ** bin(b >> (m - p)).count("1")
                c[b ^ bit, b] = sign
        out.append(c)
    return out


def test_fixture_header(h2):
    assert (h2.n_orbitals, h2.n_electrons) == (4, 2)
    assert h2.geometry.startswith("0.75")


def test_empty_and_malformed_files(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    with pytest.raises(ParseError):
        load_integrals(empty)
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1\n1 1 0 0 x\n")
    with pytest.raises(ParseError) as info:
        load_integrals(bad)
    assert info.value.line == 2
    clash = tmp_path / "clash.txt"
    clash.write_text("2 1\n1 2 0 0 0.1\n2 1 0 0 0.2\n")
    with pytest.raises(DataError):
        load_integrals(clash)
    with pytest.raises(DataError):
        MolecularIntegrals(2, 3, np.zeros((2, 2)), np.zeros((2,) * 4))


def test_round_trip(h2, tmp_path):
    path = tmp_path / "h2.txt"
    save_integrals(h2, path, comment="round trip")
    again = load_integrals(path)
    assert np.array_equal(again.one_body, h2.one_body)
    assert np.array_equal(again.two_body, h2.two_body)
    assert again.e_nuc == h2.e_nuc


def test_number_operator_single_mode():
    op = jordan_wigner(FermionOpSum([(1.0, ((0, True), (0, False)))]), 1)
    assert dict(zip(op.strings, op.coeffs)) == pytest.approx({"I": 0.5, "Z": -0.5})


def test_hopping_two_modes():
    op = FermionOpSum([(1.0, ((0, True), (1, False))), (1.0, ((1, True), (0, False)))])
    h = jordan_wigner(op, 2)
    assert dict(zip(h.strings, h.coeffs)) == pytest.approx({"XX": 0.5, "YY": 0.5})


def test_anticommutators_three_modes():
    m = 3
    for p, q in itertools.product(range(m), repeat=2):
        cp = jordan_wigner_terms(FermionOpSum([(1.0, ((p, False),))]), m)
        cqd = jordan_wigner_terms(FermionOpSum([(1.0, ((q, True),))]), m)
        a = pauli_dict_matrix(cp, m)
        b = pauli_dict_matrix(cqd, m)
        assert np.allclose(a @ b + b @ a, np.eye(8) * (p == q), atol=1e-12)


def test_jw_ladder_matches_occupation_definition():
    m = 3
    for p, c in enumerate(ladder_matrices(m)):
        jw = pauli_dict_matrix(jordan_wigner_terms(FermionOpSum([(1.0, ((p, False),))]), m), m)
        assert np.allclose(jw, c)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_jw_matrix_equals_direct_construction(m, n_terms, seed):
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(n_terms):
        k = int(rng.integers(1, 5))
        ops = tuple((int(rng.integers(m)), bool(rng.integers(2))) for _ in range(k))
        terms.append((complex(rng.normal(), rng.normal()), ops))
    op = FermionOpSum(terms)
    jw = pauli_dict_matrix(jordan_wigner_terms(op, m), m)
    assert np.allclose(jw, dense_fermion_matrix(op, m), atol=1e-12)
    # normal ordering preserved the operator
    c = ladder_matrices(m)
    raw = sum(coef * np.linalg.multi_dot([np.eye(1 << m)] + [c[i].T if d else c[i] for i, d in ops])
              for coef, ops in terms)
    assert np.allclose(jw, raw, atol=1e-12)


def test_non_hermitian_operator_rejected():
    with pytest.raises(SymmetryError):
        jordan_wigner(FermionOpSum([(1j, ((0, True), (0, False)))]), 1)


def test_mode_out_of_range():
    with pytest.raises(LayoutError):
        jordan_wigner(FermionOpSum([(1.0, ((2, True), (2, False)))]), 2)


def test_diagonal_integrals_give_z_terms_only():
    h = MolecularIntegrals(3, 1, np.diag([-1.0, 0.3, 0.7]), np.zeros((3,) * 4))
    ham = build_electronic_hamiltonian(h)
    assert all(set(s) <= {"I", "Z"} for s in ham.strings)


def test_two_body_convention_against_explicit_sum(h2):
    # 1/2 sum h_pqrs c_p^+ c_q^+ c_r c_s built from explicit ladder matrices
    c = ladder_matrices(4)
    cd = [x.T for x in c]
    dense = sum(h2.one_body[p, q] * cd[p] @ c[q] for p, q in itertools.product(range(4), repeat=2))
    for p, q, r, s in itertools.product(range(4), repeat=4):
        v = h2.two_body[p, q, r, s]
        if v:
            dense = dense + 0.5 * v * cd[p] @ cd[q] @ c[r] @ c[s]
    assert np.allclose(build_electronic_hamiltonian(h2).to_matrix(), dense, atol=1e-12)


def test_h2_ground_energy(h2, h2_hamiltonian, h2_exact):
    e0 = h2_exact[0][0]
    oracle = np.linalg.eigvalsh(dense_fermion_matrix(h2.fermion_operator(), 4).real)[0]
    assert e0 == pytest.approx(oracle, abs=1e-12)
    # the two-electron sector holds the ground state; total energy near the known STO-3G value
    assert e0 + h2.e_nuc == pytest.approx(-1.137, abs=2e-3)


def test_h2_hamiltonian_is_real_and_conserves_number(h2_hamiltonian):
    h = h2_hamiltonian.to_matrix()
    assert np.allclose(h, h.conj().T, atol=1e-12)
    n = number_operator(4).to_matrix()
    assert np.max(np.abs(h @ n - n @ h)) < 1e-10


def test_census(h2_hamiltonian):
    census = term_census(h2_hamiltonian, fermionic_terms=12)
    assert census["identity_count"] == 1
    assert census["local_count"] == 4
    assert census["nonlocal_count"] + census["local_count"] == census["total"]
    assert census["fermionic_terms"] == 12


@pytest.mark.parametrize("n,bits", [(2, "1100"), (0, "0000"), (4, "1111")])
def test_hartree_fock_state(n, bits):
    psi = hartree_fock_state(HilbertLayout(4), n, 4)
    assert psi.amplitudes[int(bits, 2)] == 1.0
