"""Hybrid qubit x boson state vectors and the dense linear-algebra oracles.

Index convention (used by every module):

* qubit 1 (string position 0) is the most significant tensor factor;
* bosonic modes follow the qubits, mode 0 before mode 1, and so on;
* a qubit bit ``1`` is "spin up", i.e. an occupied fermionic orbital.  With
  the standard Pauli matrices this means ``Z|1> = -|1>``.

The flat amplitude index of ``(bits, focks)`` is therefore
``int(bits, 2) * prod(mode_dims) + ravel_multi_index(focks, mode_dims)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, LayoutError, NormalizationError, SymmetryError, TruncationError

#: Largest total dimension a layout may have (16M complex amplitudes = 256 MB).
MEMORY_BUDGET = 1 << 24
#: Tolerance used when a public operation checks its input normalization.
NORM_TOL = 1e-10

PAULI_LETTERS = "IXYZ"
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(letter: str) -> np.ndarray:
    """Return the 2x2 matrix of a single Pauli letter."""
    return _PAULI[letter].copy()


@dataclass(frozen=True)
class HilbertLayout:
    """Tensor structure of a hybrid register: ``qubit_count`` qubits then bosonic modes."""

    qubit_count: int
    mode_dims: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode_dims", tuple(int(d) for d in self.mode_dims))
        if self.qubit_count < 0:
            raise LayoutError("qubit_count must be >= 0")
        if any(d < 1 for d in self.mode_dims):
            raise LayoutError("every Fock truncation must be >= 1")
        if self.dim > MEMORY_BUDGET:
            raise LayoutError(f"total dimension {self.dim} exceeds the memory budget {MEMORY_BUDGET}")

    @property
    def qubit_dim(self) -> int:
        return 1 << self.qubit_count

    @property
    def mode_dim(self) -> int:
        return int(np.prod(self.mode_dims, dtype=np.int64)) if self.mode_dims else 1

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.mode_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (2,) * self.qubit_count + self.mode_dims

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    def encode(self, bits, focks: Sequence[int] = ()) -> int:
        """Flat index of the basis state ``|bits> (x) |focks>``."""
        bits = _bits_tuple(bits)
        focks = tuple(int(n) for n in focks)
        if len(bits) != self.qubit_count:
            raise LayoutError(f"expected {self.qubit_count} bits, got {len(bits)}")
        if len(focks) != self.n_modes:
            raise LayoutError(f"expected {self.n_modes} Fock occupations, got {len(focks)}")
        for n, d in zip(focks, self.mode_dims):
            if not 0 <= n < d:
                raise TruncationError(f"occupation {n} outside truncation {d}")
        q = 0
        for b in bits:
            q = (q << 1) | b
        m = int(np.ravel_multi_index(focks, self.mode_dims)) if focks else 0
        return q * self.mode_dim + m

    def decode(self, index: int) -> tuple[str, tuple[int, ...]]:
        """Inverse of :meth:`encode`; returns ``(bitstring, focks)``."""
        if not 0 <= index < self.dim:
            raise LayoutError(f"index {index} outside dimension {self.dim}")
        q, m = divmod(int(index), self.mode_dim)
        bits = format(q, f"0{self.qubit_count}b") if self.qubit_count else ""
        focks = tuple(int(n) for n in np.unravel_index(m, self.mode_dims)) if self.mode_dims else ()
        return bits, focks

    def with_ancilla(self) -> "HilbertLayout":
        """Layout with one extra qubit placed in front (as the new qubit 1)."""
        return HilbertLayout(self.qubit_count + 1, self.mode_dims)


def _bits_tuple(bits) -> tuple[int, ...]:
    if isinstance(bits, str):
        if any(c not in "01" for c in bits):
            raise LayoutError(f"bitstring {bits!r} may only contain 0/1")
        return tuple(int(c) for c in bits)
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise LayoutError("bits must be 0 or 1")
    return out


@dataclass
class HybridState:
    """Dense amplitude vector over a :class:`HilbertLayout`."""

    layout: HilbertLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.layout.dim:
            raise LayoutError(
                f"amplitude vector has length {self.amplitudes.size}, layout needs {self.layout.dim}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        n = self.norm()
        if abs(n - 1.0) > tol:
            raise NormalizationError(f"state norm {n!r} deviates from 1 by more than {tol}")

    def copy(self) -> "HybridState":
        return HybridState(self.layout, self.amplitudes.copy())

    def tensor(self) -> np.ndarray:
        """View of the amplitudes with one axis per qubit and per mode."""
        return self.amplitudes.reshape(self.layout.shape)

    def matrix_view(self) -> np.ndarray:
        """View of shape ``(2**qubits, prod(mode_dims))``."""
        return self.amplitudes.reshape(self.layout.qubit_dim, self.layout.mode_dim)

    def mode_populations(self, mode: int) -> np.ndarray:
        """Marginal Fock-level populations of one mode."""
        if not 0 <= mode < self.layout.n_modes:
            raise LayoutError(f"mode {mode} not in layout")
        probs = np.abs(self.tensor()) ** 2
        axis = self.layout.qubit_count + mode
        other = tuple(a for a in range(probs.ndim) if a != axis)
        return probs.sum(axis=other)

    def qubit_probabilities(self, qubit: int) -> np.ndarray:
        """``(P(bit=0), P(bit=1))`` for one qubit."""
        if not 0 <= qubit < self.layout.qubit_count:
            raise LayoutError(f"qubit {qubit} not in layout")
        probs = np.abs(self.tensor()) ** 2
        other = tuple(a for a in range(probs.ndim) if a != qubit)
        return probs.sum(axis=other)


def basis_state(layout: HilbertLayout, bits="", focks: Sequence[int] = ()) -> HybridState:
    """Computational basis state ``|bits> (x) |focks>``.

    >>> basis_state(HilbertLayout(1), "0").amplitudes
    array([1.+0.j, 0.+0.j])
    """
    amps = np.zeros(layout.dim, dtype=complex)
    amps[layout.encode(bits, focks)] = 1.0
    return HybridState(layout, amps)


def renormalize(state: HybridState) -> HybridState:
    """Explicitly renormalize, e.g. after a post-selection."""
    n = state.norm()
    if n == 0.0:
        raise NormalizationError("cannot renormalize the zero vector")
    return HybridState(state.layout, state.amplitudes / n)


def random_state(layout: HilbertLayout, rng: np.random.Generator, max_fock=None) -> HybridState:
    """Haar-like random state; optionally restrict every mode to levels ``< max_fock``."""
    amps = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    if max_fock is not None and layout.n_modes:
        t = amps.reshape(layout.shape)
        q = layout.qubit_count
        for m, d in enumerate(layout.mode_dims):
            idx = [slice(None)] * t.ndim
            idx[q + m] = slice(min(max_fock, d), None)
            t[tuple(idx)] = 0.0
    amps /= np.linalg.norm(amps)
    return HybridState(layout, amps)


# --------------------------------------------------------------------------- local gates


def apply_local(
    state: HybridState,
    operator: np.ndarray,
    qubits: Sequence[int] = (),
    modes: Sequence[int] = (),
) -> HybridState:
    """Apply a matrix acting on the listed qubits (in order) then the listed modes.

    The operator's row/column ordering follows the same qubit-major convention
    as the full register restricted to ``qubits`` + ``modes``.
    """
    layout = state.layout
    for q in qubits:
        if not 0 <= q < layout.qubit_count:
            raise LayoutError(f"qubit {q} not in layout")
    for m in modes:
        if not 0 <= m < layout.n_modes:
            raise LayoutError(f"mode {m} not in layout")
    axes = list(qubits) + [layout.qubit_count + m for m in modes]
    if len(set(axes)) != len(axes):
        raise LayoutError("repeated target")
    sub = [2] * len(qubits) + [layout.mode_dims[m] for m in modes]
    k = len(sub)
    size = int(np.prod(sub))
    op = np.asarray(operator, dtype=complex)
    if op.shape != (size, size):
        raise LayoutError(f"operator shape {op.shape} does not match targets of dimension {size}")
    psi = state.tensor()
    out = np.tensordot(op.reshape(sub + sub), psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return HybridState(layout, out.reshape(-1))


def apply_qubit_diagonal(state: HybridState, diagonal: np.ndarray) -> HybridState:
    """Multiply by an operator diagonal in the qubit basis (identity on modes)."""
    m = state.matrix_view() * np.asarray(diagonal)[:, None]
    return HybridState(state.layout, m.reshape(-1))


# --------------------------------------------------------------------------- Pauli algebra


@lru_cache(maxsize=32)
def _bit_table(n_qubits: int) -> np.ndarray:
    """``table[b, k]`` is the bit of qubit ``k`` in basis index ``b``."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    shifts = np.arange(n_qubits - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


def _masks(string: str) -> tuple[int, np.ndarray, int]:
    n = len(string)
    xmask = 0
    zvec = np.zeros(n, dtype=np.int8)
    ny = 0
    for k, c in enumerate(string):
        bit = 1 << (n - 1 - k)
        if c in "XY":
            xmask |= bit
        if c in "YZ":
            zvec[k] = 1
        if c == "Y":
            ny += 1
        if c not in PAULI_LETTERS:
            raise DomainError(f"invalid Pauli letter {c!r}")
    return xmask, zvec, ny


@lru_cache(maxsize=4096)
def _pauli_action(string: str) -> tuple[np.ndarray, np.ndarray]:
    """Permutation and phase such that ``(P v)[c] = phase[c] * v[perm[c]]``."""
    n = len(string)
    xmask, zvec, ny = _masks(string)
    idx = np.arange(1 << n, dtype=np.int64)
    parity = (_bit_table(n) @ zvec) & 1 if n else np.zeros(1, dtype=np.int64)
    sign = 1 - 2 * parity.astype(np.int64)
    phase_in = (1j**ny) * sign
    perm = idx ^ xmask
    return perm, phase_in[perm]


def pauli_apply(string: str, matrix_view: np.ndarray) -> np.ndarray:
    """Apply a Pauli string to a ``(2**n, D)`` amplitude array (fast kernel)."""
    perm, phase = _pauli_action(string)
    return phase[:, None] * matrix_view[perm]


def pauli_matrix(string: str) -> np.ndarray:
    """Dense matrix of a Pauli string by explicit Kronecker products (oracle route)."""
    for c in string:
        if c not in PAULI_LETTERS:
            raise DomainError(f"invalid Pauli letter {c!r}")
    if not string:
        return np.eye(1, dtype=complex)
    return reduce(np.kron, (_PAULI[c] for c in string))


def pauli_weight(string: str) -> int:
    return sum(c != "I" for c in string)


_PRODUCT = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"),
    ("Z", "Y"): (-1j, "X"),
    ("X", "Z"): (-1j, "Y"),
}


def pauli_product(a: str, b: str) -> tuple[complex, str]:
    """``P_a P_b = phase * P_c``; returns ``(phase, c)``."""
    if len(a) != len(b):
        raise LayoutError("Pauli strings of different length")
    phase = 1 + 0j
    out = []
    for x, y in zip(a, b):
        if x == "I":
            out.append(y)
        elif y == "I":
            out.append(x)
        elif x == y:
            out.append("I")
        else:
            p, c = _PRODUCT[(x, y)]
            phase *= p
            out.append(c)
    return phase, "".join(out)


def paulis_commute(a: str, b: str) -> bool:
    clashes = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return clashes % 2 == 0


class PauliTermSum:
    """Real-weighted sum of Pauli strings, ``sum_l g_l P_l``.

    Identical strings are merged on construction and terms whose merged
    coefficient is below ``atol`` in magnitude are dropped.  Coefficients
    must be real; an imaginary part above ``imag_tol`` raises
    :class:`SymmetryError` (the sum would not be Hermitian).
    """

    def __init__(self, terms: Iterable[tuple[complex, str]] = (), n_qubits: int | None = None,
                 atol: float = 1e-14, imag_tol: float = 1e-12):
        merged: dict[str, complex] = {}
        for coef, string in terms:
            string = str(string).upper()
            if n_qubits is None:
                n_qubits = len(string)
            if len(string) != n_qubits:
                raise LayoutError(f"string {string!r} has length {len(string)}, expected {n_qubits}")
            for c in string:
                if c not in PAULI_LETTERS:
                    raise DomainError(f"invalid Pauli letter {c!r} in {string!r}")
            merged[string] = merged.get(string, 0.0) + complex(coef)
        if n_qubits is None:
            raise LayoutError("n_qubits is required for an empty sum")
        self.n_qubits = int(n_qubits)
        self._terms: dict[str, float] = {}
        for string, coef in merged.items():
            if abs(coef.imag) > imag_tol:
                raise SymmetryError(f"coefficient of {string} has imaginary part {coef.imag:.3e}")
            if abs(coef.real) > atol:
                self._terms[string] = float(coef.real)

    @classmethod
    def from_dict(cls, coefficients: Mapping[str, complex], n_qubits: int | None = None, **kw):
        return cls(((c, s) for s, c in coefficients.items()), n_qubits=n_qubits, **kw)

    @property
    def terms(self) -> list[tuple[float, str]]:
        return [(c, s) for s, c in self._terms.items()]

    @property
    def strings(self) -> list[str]:
        return list(self._terms)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array(list(self._terms.values()), dtype=float)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self):
        body = " + ".join(f"{c:+.6g}*{s}" for c, s in self.terms[:6])
        more = "" if len(self) <= 6 else f" + ... ({len(self)} terms)"
        return f"PauliTermSum({body or '0'}{more})"

    def coefficient(self, string: str) -> float:
        return self._terms.get(string.upper(), 0.0)

    @property
    def identity_coefficient(self) -> float:
        return self._terms.get("I" * self.n_qubits, 0.0)

    def without_identity(self) -> "PauliTermSum":
        ident = "I" * self.n_qubits
        return PauliTermSum(((c, s) for s, c in self._terms.items() if s != ident), self.n_qubits)

    def __add__(self, other: "PauliTermSum") -> "PauliTermSum":
        if other.n_qubits != self.n_qubits:
            raise LayoutError("cannot add sums over different qubit counts")
        return PauliTermSum(self.terms + other.terms, self.n_qubits)

    def __mul__(self, scalar: float) -> "PauliTermSum":
        return PauliTermSum(((scalar * c, s) for c, s in self.terms), self.n_qubits)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def to_matrix(self) -> np.ndarray:
        """Dense matrix via Kronecker products (the oracle route)."""
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, s in self.terms:
            out += c * pauli_matrix(s)
        return out

    def apply(self, matrix_view: np.ndarray) -> np.ndarray:
        """Apply to a ``(2**n, D)`` amplitude array with the fast kernel."""
        out = np.zeros_like(matrix_view, dtype=complex)
        for c, s in self.terms:
            out += c * pauli_apply(s, matrix_view)
        return out

    def commutes_pairwise(self) -> bool:
        strings = self.strings
        return all(paulis_commute(a, b) for i, a in enumerate(strings) for b in strings[i + 1:])


# --------------------------------------------------------------------------- observables


def _check_qubits(state: HybridState, n_qubits: int):
    if n_qubits != state.layout.qubit_count:
        raise LayoutError(
            f"observable acts on {n_qubits} qubits, state has {state.layout.qubit_count}"
        )


def expectation(state: HybridState, observable: PauliTermSum) -> float:
    """``sum_l g_l <psi|P_l|psi>``, summed term by term."""
    _check_qubits(state, observable.n_qubits)
    state.check_normalized()
    v = state.matrix_view()
    total = 0.0 + 0.0j
    for c, s in observable.terms:
        total += c * np.vdot(v, pauli_apply(s, v))
    if abs(total.imag) > 1e-10:
        raise SymmetryError(f"expectation has imaginary residual {total.imag:.3e}")
    return float(total.real)


def pauli_expectation(state: HybridState, string: str) -> float:
    """``<psi|P|psi>`` for a single Pauli string."""
    return expectation(state, PauliTermSum([(1.0, string)]))


def operator_expectation(state: HybridState, operator: np.ndarray) -> complex:
    """``<psi|O|psi>`` for a dense operator on the full register."""
    state.check_normalized()
    v = state.amplitudes
    return complex(np.vdot(v, operator @ v))


def apply_pauli_sum(state: HybridState, observable: PauliTermSum) -> np.ndarray:
    """Flat vector ``H|psi>`` (not normalized, hence returned as an array)."""
    _check_qubits(state, observable.n_qubits)
    return observable.apply(state.matrix_view()).reshape(-1)


def pauli_rotation(state: HybridState, phi: float, string: str) -> HybridState:
    """Direct kernel for ``exp(i phi P)|psi> = cos(phi)|psi> + i sin(phi) P|psi>``."""
    _check_qubits(state, len(string))
    v = state.matrix_view()
    out = np.cos(phi) * v + 1j * np.sin(phi) * pauli_apply(string, v)
    return HybridState(state.layout, out.reshape(-1))


def exact_unitary(generator: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i G t)`` through the eigendecomposition of a Hermitian ``G``."""
    g = np.asarray(generator, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise LayoutError("generator must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(g)))) if g.size else 1.0
    if g.size and np.max(np.abs(g - g.conj().T)) > 1e-12 * scale:
        raise SymmetryError("generator is not Hermitian")
    w, v = np.linalg.eigh(g)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def fidelity(a: HybridState, b: HybridState) -> float:
    """``|<a|b>|**2``."""
    if a.layout != b.layout:
        raise LayoutError("states live on different layouts")
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(1.0, f))


# --------------------------------------------------------------------------- dense builders


def annihilation(d: int) -> np.ndarray:
    """Truncated bosonic annihilation operator on ``d`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def creation(d: int) -> np.ndarray:
    return annihilation(d).conj().T


def number(d: int) -> np.ndarray:
    return np.diag(np.arange(d, dtype=float)).astype(complex)


def position(d: int) -> np.ndarray:
    """``a + a^dagger`` on ``d`` levels."""
    a = annihilation(d)
    return a + a.conj().T


def embed(layout: HilbertLayout, qubit_ops: Mapping[int, np.ndarray] | None = None,
          mode_ops: Mapping[int, np.ndarray] | None = None) -> np.ndarray:
    """Dense full-register operator: given local factors, identity elsewhere."""
    qubit_ops = qubit_ops or {}
    mode_ops = mode_ops or {}
    factors = [np.asarray(qubit_ops.get(q, np.eye(2)), dtype=complex) for q in range(layout.qubit_count)]
    factors += [np.asarray(mode_ops.get(m, np.eye(d)), dtype=complex) for m, d in enumerate(layout.mode_dims)]
    if not factors:
        return np.eye(1, dtype=complex)
    return reduce(np.kron, factors)


def pauli_sum_operator(observable: PauliTermSum, layout: HilbertLayout) -> np.ndarray:
    """Dense matrix of a qubit observable extended by identity on the modes."""
    _check = observable.n_qubits == layout.qubit_count
    if not _check:
        raise LayoutError("observable and layout disagree on the qubit count")
    return np.kron(observable.to_matrix(), np.eye(layout.mode_dim))


def top_level_population(state: HybridState) -> float:
    """Largest population found in the top Fock level of any mode."""
    worst = 0.0
    for m in range(state.layout.n_modes):
        worst = max(worst, float(state.mode_populations(m)[-1]))
    return worst
