"""Molecular integrals, second-quantized Hamiltonians and the Jordan-Wigner map.

Integral convention
-------------------
``two_body[p, q, r, s]`` multiplies ``c_p^dagger c_q^dagger c_r c_s`` with a
prefactor 1/2, and equals the Coulomb integral

    integral phi_p*(1) phi_q*(2) V(|r1 - r2|) phi_r(2) phi_s(1)

i.e. ``(ps|qr)`` in chemists' notation.  For real orbitals the stored unique
elements are completed with the symmetries ``pqrs = sqrp = prqs = qpsr``.

Spin-orbitals are interleaved ``(1a, 1b, 2a, 2b, ...)``; orbital ``p`` is
qubit ``p`` (qubit 0 = most significant), and an occupied orbital is bit 1.

Integral file format
--------------------
Lines starting with ``#`` are comments; ``# geometry: <label>`` sets the
geometry tag.  The first data line is ``M N`` (spin-orbitals, electrons).
Every following line is ``p q r s value`` with 1-based indices: ``r = s = 0``
marks a one-body element ``h_pq`` and ``p = q = r = s = 0`` the nuclear
repulsion constant.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DomainError, LayoutError, ParseError, SymmetryError
from .hilbert import HilbertLayout, HybridState, PauliTermSum, basis_state, pauli_product, pauli_weight

SYMMETRY_TOL = 1e-10

Ladder = tuple[int, bool]  # (mode, is_creation)


# --------------------------------------------------------------------------- integrals


@dataclass
class MolecularIntegrals:
    """One- and two-body integrals of one nuclear geometry."""

    n_orbitals: int
    n_electrons: int
    one_body: np.ndarray
    two_body: np.ndarray
    e_nuc: float = 0.0
    geometry: str = ""

    def __post_init__(self):
        m = self.n_orbitals
        self.one_body = np.asarray(self.one_body, dtype=float)
        self.two_body = np.asarray(self.two_body, dtype=float)
        if self.one_body.shape != (m, m) or self.two_body.shape != (m,) * 4:
            raise DataError(f"integral shapes {self.one_body.shape}/{self.two_body.shape} do not match M={m}")
        if not 0 <= self.n_electrons <= m:
            raise DataError(f"need 0 <= N <= M, got N={self.n_electrons}, M={m}")
        if np.max(np.abs(self.one_body - self.one_body.T), initial=0.0) > SYMMETRY_TOL:
            raise DataError("one-body integrals are not symmetric")
        g = self.two_body
        for perm in ((3, 1, 2, 0), (0, 2, 1, 3), (1, 0, 3, 2)):
            if np.max(np.abs(g - g.transpose(perm)), initial=0.0) > SYMMETRY_TOL:
                raise DataError(f"two-body integrals violate the index symmetry {perm}")

    def rescaled(self, factor: float) -> "MolecularIntegrals":
        """All energies multiplied by ``factor`` (e.g. ``1/|h_11|`` for h11 units)."""
        return replace(self, one_body=self.one_body * factor, two_body=self.two_body * factor,
                       e_nuc=self.e_nuc * factor)

    def fermion_operator(self) -> "FermionOpSum":
        """``sum h_pq c_p^+ c_q + 1/2 sum h_pqrs c_p^+ c_q^+ c_r c_s``."""
        terms = []
        m = self.n_orbitals
        for p, q in product(range(m), repeat=2):
            if self.one_body[p, q] != 0.0:
                terms.append((self.one_body[p, q], ((p, True), (q, False))))
        for p, q, r, s in zip(*np.nonzero(self.two_body)):
            terms.append((0.5 * self.two_body[p, q, r, s], ((p, True), (q, True), (r, False), (s, False))))
        return FermionOpSum(terms)


def _two_body_orbit(idx: tuple[int, int, int, int]) -> set[tuple[int, int, int, int]]:
    seen = {idx}
    queue = deque([idx])
    while queue:
        p, q, r, s = queue.popleft()
        for nxt in ((s, q, r, p), (p, r, q, s), (q, p, s, r)):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def load_integrals(path) -> MolecularIntegrals:
    """Parse an integral file and complete it by symmetry."""
    path = os.fspath(path)
    header = None
    geometry = ""
    one = two = None
    one_set = two_set = None
    e_nuc = 0.0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                if sep and key.strip().lower() == "geometry":
                    geometry = value.strip()
                continue
            fields = line.split()
            if header is None:
                if len(fields) != 2:
                    raise ParseError("header must be 'M N'", lineno)
                try:
                    m, n = int(fields[0]), int(fields[1])
                except ValueError:
                    raise ParseError("header must hold two integers", lineno) from None
                if m < 1:
                    raise ParseError("M must be >= 1", lineno)
                header = (m, n)
                one = np.zeros((m, m))
                one_set = np.zeros((m, m), dtype=bool)
                two = np.zeros((m,) * 4)
                two_set = np.zeros((m,) * 4, dtype=bool)
                continue
            if len(fields) != 5:
                raise ParseError("expected 'p q r s value'", lineno)
            try:
                p, q, r, s = (int(x) for x in fields[:4])
                value = float(fields[4])
            except ValueError:
                raise ParseError("malformed integral entry", lineno) from None
            m = header[0]
            if not all(0 <= i <= m for i in (p, q, r, s)):
                raise ParseError(f"index out of range 0..{m}", lineno)
            if p == q == r == s == 0:
                e_nuc = value
            elif r == 0 and s == 0:
                if p == 0 or q == 0:
                    raise ParseError("one-body entries need p, q >= 1", lineno)
                for a, b in ((p - 1, q - 1), (q - 1, p - 1)):
                    if one_set[a, b] and abs(one[a, b] - value) > SYMMETRY_TOL:
                        raise DataError(f"line {lineno}: h[{a + 1},{b + 1}] conflicts with its symmetric image")
                    one[a, b] = value
                    one_set[a, b] = True
            else:
                if 0 in (p, q, r, s):
                    raise ParseError("two-body entries need all indices >= 1", lineno)
                for idx in _two_body_orbit((p - 1, q - 1, r - 1, s - 1)):
                    if two_set[idx] and abs(two[idx] - value) > SYMMETRY_TOL:
                        raise DataError(f"line {lineno}: two-body element conflicts with a symmetric image")
                    two[idx] = value
                    two_set[idx] = True
    if header is None:
        raise ParseError(f"{path}: empty integral file")
    return MolecularIntegrals(header[0], header[1], one, two, e_nuc, geometry)


def save_integrals(ints: MolecularIntegrals, path, comment: str = "", tol: float = 0.0) -> None:
    """Write the unique elements in the documented text format."""
    m = ints.n_orbitals
    lines = []
    for text in comment.splitlines():
        lines.append(f"# {text}")
    if ints.geometry:
        lines.append(f"# geometry: {ints.geometry}")
    lines.append(f"{m} {ints.n_electrons}")
    for p, q, r, s in product(range(m), repeat=4):
        v = ints.two_body[p, q, r, s]
        if abs(v) > tol and v != 0.0 and (p, q, r, s) == min(_two_body_orbit((p, q, r, s))):
            lines.append(f"{p + 1} {q + 1} {r + 1} {s + 1} {float(v)!r}")
    for p in range(m):
        for q in range(p + 1):
            v = ints.one_body[p, q]
            if abs(v) > tol and v != 0.0:
                lines.append(f"{p + 1} {q + 1} 0 0 {float(v)!r}")
    lines.append(f"0 0 0 0 {float(ints.e_nuc)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --------------------------------------------------------------------------- fermion operators


def _normal_order_term(coef: complex, ops: tuple[Ladder, ...]) -> list[tuple[complex, tuple[Ladder, ...]]]:
    """Creation operators left (descending index), annihilators right (descending index)."""
    out = []
    stack = [(coef, list(ops))]
    while stack:
        c, seq = stack.pop()
        swapped = False
        for i in range(len(seq) - 1):
            (m1, d1), (m2, d2) = seq[i], seq[i + 1]
            if d1 == d2:
                if m1 == m2:
                    # c_p c_p = 0 and c_p^+ c_p^+ = 0
                    c = 0.0
                    swapped = True
                    break
                if m1 < m2:
                    seq[i], seq[i + 1] = seq[i + 1], seq[i]
                    c = -c
                    swapped = True
                    break
            elif not d1 and d2:
                # c_a c_b^+ = delta_ab - c_b^+ c_a
                if m1 == m2:
                    stack.append((c, seq[:i] + seq[i + 2:]))
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
                c = -c
                swapped = True
                break
        if swapped:
            if c != 0.0:
                stack.append((c, seq))
            continue
        out.append((c, tuple(seq)))
    return out


class FermionOpSum:
    """Sum of products of ladder operators, normal-ordered on construction.

    ``terms`` is an iterable of ``(coefficient, ((mode, is_creation), ...))``.
    """

    def __init__(self, terms: Iterable[tuple[complex, Sequence[Ladder]]] = (), atol: float = 0.0):
        acc: dict[tuple[Ladder, ...], complex] = {}
        for coef, ops in terms:
            ops = tuple((int(m), bool(d)) for m, d in ops)
            for c, ordered in _normal_order_term(complex(coef), ops):
                acc[ordered] = acc.get(ordered, 0.0) + c
        self._terms = {k: v for k, v in acc.items() if abs(v) > atol}

    @property
    def terms(self) -> list[tuple[complex, tuple[Ladder, ...]]]:
        return [(c, ops) for ops, c in self._terms.items()]

    def __len__(self):
        return len(self._terms)

    def __add__(self, other: "FermionOpSum") -> "FermionOpSum":
        return FermionOpSum(self.terms + other.terms)

    def __mul__(self, scalar: complex) -> "FermionOpSum":
        return FermionOpSum((scalar * c, ops) for c, ops in self.terms)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + other * -1

    def adjoint(self) -> "FermionOpSum":
        return FermionOpSum((np.conj(c), tuple((m, not d) for m, d in reversed(ops))) for c, ops in self.terms)

    def max_mode(self) -> int:
        return max((m for ops in self._terms for m, _ in ops), default=-1)


@lru_cache(maxsize=None)
def _jw_ladder(mode: int, creation: bool, n_modes: int) -> tuple[tuple[complex, str], ...]:
    z = "Z" * mode
    rest = "I" * (n_modes - mode - 1)
    sign = -1j if creation else 1j
    return ((0.5, z + "X" + rest), (0.5 * sign, z + "Y" + rest))


def jordan_wigner_terms(op: FermionOpSum, n_modes: int) -> dict[str, complex]:
    """Complex Pauli coefficients of ``op`` (no Hermiticity requirement)."""
    if op.max_mode() >= n_modes:
        raise LayoutError(f"operator uses mode {op.max_mode()}, only {n_modes} available")
    out: dict[str, complex] = {}
    ident = "I" * n_modes
    for coef, ops in op.terms:
        partial = {ident: complex(coef)}
        for mode, dag in ops:
            nxt: dict[str, complex] = {}
            for s1, c1 in partial.items():
                for c2, s2 in _jw_ladder(mode, dag, n_modes):
                    ph, s = pauli_product(s1, s2)
                    nxt[s] = nxt.get(s, 0.0) + c1 * c2 * ph
            partial = nxt
        for s, c in partial.items():
            out[s] = out.get(s, 0.0) + c
    return out


def jordan_wigner(op: FermionOpSum, n_modes: int) -> PauliTermSum:
    """Jordan-Wigner image of a Hermitian fermion operator.

    ``c_p^dagger -> Z_1 ... Z_{p-1} (X_p - i Y_p)/2``; raises
    :class:`SymmetryError` if the result has complex coefficients.
    """
    return PauliTermSum.from_dict(jordan_wigner_terms(op, n_modes), n_qubits=n_modes)


def dense_fermion_matrix(op: FermionOpSum, n_modes: int) -> np.ndarray:
    """Occupation-basis matrix built directly from the ladder algebra (oracle route).

    Index ``b`` has orbital ``p`` occupied when bit ``n_modes-1-p`` of ``b`` is set.
    """
    dim = 1 << n_modes
    out = np.zeros((dim, dim), dtype=complex)
    for coef, ops in op.terms:
        for col in range(dim):
            state, sign = col, 1
            for mode, dag in reversed(ops):
                bit = 1 << (n_modes - 1 - mode)
                occupied = bool(state & bit)
                if occupied == dag:
                    sign = 0
                    break
                # parity of occupied orbitals before `mode`
                higher = state >> (n_modes - mode)
                if bin(higher).count("1") % 2:
                    sign = -sign
                state ^= bit
            if sign:
                out[state, col] += coef * sign
    return out


def build_electronic_hamiltonian(ints: MolecularIntegrals, include_nuclear: bool = False) -> PauliTermSum:
    """Qubit Hamiltonian of the electronic problem; the identity term carries the constant."""
    h = jordan_wigner(ints.fermion_operator(), ints.n_orbitals)
    if include_nuclear and ints.e_nuc:
        h = h + PauliTermSum([(ints.e_nuc, "I" * ints.n_orbitals)])
    return h


def term_census(hamiltonian: PauliTermSum, fermionic_terms: int | None = None) -> dict:
    """Counts of local (weight 1) and nonlocal (weight >= 2) Pauli terms.

    ``total`` excludes the identity term, which is reported separately.
    """
    weights = [pauli_weight(s) for s in hamiltonian.strings]
    out = {
        "local_count": sum(w == 1 for w in weights),
        "nonlocal_count": sum(w >= 2 for w in weights),
        "identity_count": sum(w == 0 for w in weights),
        "total": sum(w >= 1 for w in weights),
        "max_weight": max(weights, default=0),
    }
    if fermionic_terms is not None:
        out["fermionic_terms"] = int(fermionic_terms)
    return out


def census_json(census: dict) -> str:
    return json.dumps(census, indent=2, sort_keys=True)


def hartree_fock_state(layout: HilbertLayout, n_electrons: int, n_orbitals: int) -> HybridState:
    """Basis state with the ``n_electrons`` lowest orbitals occupied (bits ``1..10..0``)."""
    if layout.qubit_count != n_orbitals:
        raise LayoutError(f"layout has {layout.qubit_count} qubits, need {n_orbitals}")
    if not 0 <= n_electrons <= n_orbitals:
        raise DomainError(f"cannot place {n_electrons} electrons in {n_orbitals} orbitals")
    bits = "1" * n_electrons + "0" * (n_orbitals - n_electrons)
    return basis_state(layout, bits, [0] * layout.n_modes)


def number_operator(n_modes: int) -> PauliTermSum:
    """Total particle number ``sum_p (I - Z_p)/2``."""
    terms = [(n_modes / 2, "I" * n_modes)]
    for p in range(n_modes):
        terms.append((-0.5, "I" * p + "Z" + "I" * (n_modes - p - 1)))
    return PauliTermSum(terms)


BUNDLED_BOND_LENGTHS = ("0.60", "0.75", "0.90", "1.00")


def bundled_h2_path(bond: str = "0.75") -> str:
    """Path of a packaged H2/STO-3G integral file (bond length in Angstrom)."""
    if bond not in BUNDLED_BOND_LENGTHS:
        raise DomainError(f"no bundled H2 fixture for bond length {bond}; have {BUNDLED_BOND_LENGTHS}")
    return os.path.join(os.path.dirname(__file__), "data", f"h2_sto3g_{bond}.txt")


def load_h2(bond: str = "0.75") -> MolecularIntegrals:
    return load_integrals(bundled_h2_path(bond))
