"""Ion-native gate layer.

Laser pulses (carrier, red and blue sidebands in the Lamb-Dicke regime),
Molmer-Sorensen gates, and the compilation of Pauli-string exponentials
into the ``U_MS(-pi/2,0) R_N(phi) U_MS(pi/2,0)`` sandwich.

Conventions: hbar = 1; ``sigma_+ = |1><0|`` raises spin-down (bit 0) to
spin-up (bit 1); single-qubit rotations are ``R_a(angle) = exp(-i angle sigma_a / 2)``.
Basis changes applied before the sandwich map each letter of the string to
the canonical ``Z X X ... X`` form:

====================  ==============  ===============
letter                pivot (-> Z)    others (-> X)
====================  ==============  ===============
X                     R_y(-pi/2)      none
Y                     R_x(+pi/2)      R_z(-pi/2)
Z                     none            R_y(+pi/2)
====================  ==============  ===============
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, LayoutError, TruncationError
from .hilbert import (
    HybridState,
    _bit_table,
    annihilation,
    apply_local,
    apply_qubit_diagonal,
    exact_unitary,
    pauli,
    top_level_population,
)

#: Top-Fock-level population increase that triggers a :class:`TruncationError`.
LEAKAGE_TOL = 1e-8

PULSE_KINDS = ("carrier", "red", "blue", "dispersive")

_SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
_SIGMA_MINUS = _SIGMA_PLUS.T.copy()


def rotation(axis: str, angle: float) -> np.ndarray:
    """``exp(-i angle sigma_axis / 2)``."""
    s = pauli(axis)
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * s


# --------------------------------------------------------------------------- circuit trace


@dataclass(frozen=True)
class GateRecord:
    """One line of a compiled circuit."""

    kind: str
    params: tuple[tuple[str, float], ...] = ()
    targets: tuple[int, ...] = ()
    modes: tuple[int, ...] = ()

    def to_line(self) -> str:
        parts = [self.kind]
        parts += [f"{k}={v!r}" for k, v in self.params]
        parts.append("targets=" + ",".join(str(t) for t in self.targets))
        if self.modes:
            parts.append("modes=" + ",".join(str(m) for m in self.modes))
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "GateRecord":
        kind, *rest = line.split()
        params, targets, modes = [], (), ()
        for item in rest:
            key, _, value = item.partition("=")
            if key == "targets":
                targets = tuple(int(x) for x in value.split(",") if x)
            elif key == "modes":
                modes = tuple(int(x) for x in value.split(",") if x)
            elif key == "axis":
                params.append((key, value.strip("'\"")))
            else:
                params.append((key, float(value)))
        return cls(kind, tuple(params), targets, modes)


@dataclass
class Circuit:
    """Ordered gate trace; one gate per line in its text form."""

    gates: list[GateRecord] = field(default_factory=list)

    def append(self, kind: str, targets: Sequence[int], modes: Sequence[int] = (), **params):
        self.gates.append(GateRecord(kind, tuple(params.items()), tuple(targets), tuple(modes)))

    def extend(self, other: "Circuit"):
        self.gates.extend(other.gates)

    def __len__(self):
        return len(self.gates)

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    @property
    def ms_count(self) -> int:
        return self.count("ms")

    @property
    def local_count(self) -> int:
        return sum(g.kind in ("rx", "ry", "rz", "spin_boson") for g in self.gates)

    def to_text(self) -> str:
        return "".join(g.to_line() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        return cls([GateRecord.from_line(line) for line in text.splitlines() if line.strip()])


def _record(circuit, kind, targets, modes=(), **params):
    if circuit is not None:
        circuit.append(kind, targets, modes, **params)


# --------------------------------------------------------------------------- laser pulses


@dataclass(frozen=True)
class LaserPulse:
    """A resonant (or, for ``dispersive``, far-detuned) laser interaction on one ion.

    ``dispersive`` is the adiabatically eliminated form of a red sideband
    detuned by ``detuning``: ``chi (P_up (n+1) - P_down n)`` with
    ``chi = (eta*rabi)**2 / detuning``.
    """

    kind: str
    rabi: float
    duration: float
    phase: float = 0.0
    eta: float = 0.0
    qubit: int = 0
    mode: int | None = None
    detuning: float | None = None

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise DomainError(f"unknown pulse kind {self.kind!r}")
        if self.eta < 0:
            raise DomainError("Lamb-Dicke parameter must be >= 0")
        if self.duration < 0:
            raise DomainError("pulse duration must be >= 0")
        if self.kind != "carrier" and self.mode is None:
            raise LayoutError(f"{self.kind} pulse needs a target mode")
        if self.kind == "dispersive" and not self.detuning:
            raise DomainError("dispersive pulse needs a nonzero detuning")

    def hamiltonian(self, d: int | None = None) -> np.ndarray:
        """Local Hamiltonian on qubit (x) mode (carrier: qubit only)."""
        om, ph = self.rabi, self.phase
        if self.kind == "carrier":
            return om * (_SIGMA_PLUS * np.exp(1j * ph) + _SIGMA_MINUS * np.exp(-1j * ph))
        a = annihilation(d)
        ad = a.conj().T
        g = self.eta * om
        if self.kind == "red":
            return 1j * g * (np.kron(_SIGMA_PLUS, a) * np.exp(1j * ph) - np.kron(_SIGMA_MINUS, ad) * np.exp(-1j * ph))
        if self.kind == "blue":
            return 1j * g * (np.kron(_SIGMA_PLUS, ad) * np.exp(1j * ph) - np.kron(_SIGMA_MINUS, a) * np.exp(-1j * ph))
        chi = g * g / self.detuning
        n = np.diag(np.arange(d, dtype=float))
        up = np.diag([0.0, 1.0])
        down = np.diag([1.0, 0.0])
        return chi * (np.kron(up, n + np.eye(d)) - np.kron(down, n)).astype(complex)


def _check_leakage(before: float, after: HybridState, max_leakage):
    if max_leakage is None:
        return
    grown = top_level_population(after) - before
    if grown > max_leakage:
        raise TruncationError(
            f"top Fock level gained population {grown:.3e} (> {max_leakage:.1e}); increase the truncation"
        )


def apply_pulse(state: HybridState, pulse: LaserPulse, max_leakage: float | None = LEAKAGE_TOL) -> HybridState:
    """Evolve under one pulse for its duration."""
    return apply_simultaneous(state, [pulse], max_leakage=max_leakage)


def apply_simultaneous(state: HybridState, pulses: Sequence[LaserPulse],
                       max_leakage: float | None = LEAKAGE_TOL) -> HybridState:
    """Evolve under the sum of several pulses switched on together (e.g. bichromatic red+blue)."""
    if not pulses:
        return state.copy()
    duration = pulses[0].duration
    if any(not math.isclose(p.duration, duration, rel_tol=0, abs_tol=1e-15) for p in pulses):
        raise DomainError("simultaneous pulses must share one duration")
    layout = state.layout
    qubits = sorted({p.qubit for p in pulses})
    modes = sorted({p.mode for p in pulses if p.kind != "carrier"})
    if modes and layout.n_modes == 0:
        raise LayoutError("sideband pulses need a bosonic mode")
    for q in qubits:
        if not 0 <= q < layout.qubit_count:
            raise LayoutError(f"qubit {q} not in layout")
    for m in modes:
        if not 0 <= m < layout.n_modes:
            raise LayoutError(f"mode {m} not in layout")
    sub = [2] * len(qubits) + [layout.mode_dims[m] for m in modes]
    h = np.zeros((int(np.prod(sub)),) * 2, dtype=complex)
    for p in pulses:
        d = layout.mode_dims[p.mode] if p.kind != "carrier" else None
        local = p.hamiltonian(d)
        factors = [np.eye(n) for n in sub]
        # place the pulse Hamiltonian on its qubit (and mode) factors
        qi = qubits.index(p.qubit)
        if p.kind == "carrier":
            factors[qi] = local
            h += _kron_all(factors)
        else:
            mi = len(qubits) + modes.index(p.mode)
            h += _embed_pair(local, sub, qi, mi)
    before = top_level_population(state) if modes else 0.0
    out = apply_local(state, exact_unitary(h, duration), qubits=qubits, modes=modes)
    if modes:
        _check_leakage(before, out, max_leakage)
    return out


def _kron_all(factors):
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def _embed_pair(local: np.ndarray, sub: list[int], i: int, j: int) -> np.ndarray:
    """Embed an operator on factors ``(i, j)`` of a product space with dims ``sub``."""
    di, dj = sub[i], sub[j]
    total = int(np.prod(sub))
    if len(sub) == 2 and (i, j) == (0, 1):
        return local
    loc = local.reshape(di, dj, di, dj)
    eye = np.eye(total // (di * dj)).reshape(*(s for k, s in enumerate(sub) if k not in (i, j)),
                                               *(s for k, s in enumerate(sub) if k not in (i, j)))
    rest = len(sub) - 2
    full = np.tensordot(loc, eye, axes=0) if rest else loc
    # axes now: (i_out, j_out, i_in, j_in, rest_out..., rest_in...)
    order_out = [None] * len(sub)
    order_in = [None] * len(sub)
    others = [k for k in range(len(sub)) if k not in (i, j)]
    order_out[i], order_out[j], order_in[i], order_in[j] = 0, 1, 2, 3
    for n, k in enumerate(others):
        order_out[k] = 4 + n
        order_in[k] = 4 + rest + n
    full = np.transpose(full, order_out + order_in)
    return full.reshape(total, total)


# --------------------------------------------------------------------------- Molmer-Sorensen


@dataclass(frozen=True)
class MsGate:
    """``U_MS(theta, phi) = exp[-i theta (cos(phi) S_x + sin(phi) S_y)**2 / 4]`` with ``S_a = sum_i sigma_a^i``."""

    theta: float
    phi: float = 0.0
    qubits: tuple[int, ...] | None = None


def apply_ms(state: HybridState, gate: MsGate, circuit: Circuit | None = None) -> HybridState:
    """Exact action of the MS exponential on the gate's qubit subset."""
    layout = state.layout
    qubits = tuple(range(layout.qubit_count)) if gate.qubits is None else tuple(gate.qubits)
    if not qubits:
        raise LayoutError("MS gate needs at least one qubit")
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < layout.qubit_count for q in qubits):
        raise LayoutError(f"invalid MS qubit subset {qubits}")
    _record(circuit, "ms", qubits, theta=float(gate.theta), phi=float(gate.phi))
    if gate.theta == 0.0:
        return state.copy()
    if layout.qubit_count <= DENSE_MS_QUBITS:
        u = _ms_matrix(layout.qubit_count, qubits, float(gate.theta), float(gate.phi))
        return HybridState(layout, (u @ state.matrix_view()).reshape(-1))
    w = _ms_basis(gate.phi)
    out = state
    for q in qubits:
        out = apply_local(out, w.conj().T, qubits=[q])
    out = apply_qubit_diagonal(out, _ms_diagonal(layout.qubit_count, qubits, gate.theta))
    for q in qubits:
        out = apply_local(out, w, qubits=[q])
    return out


#: Registers up to this size apply MS gates as cached dense qubit-space unitaries.
DENSE_MS_QUBITS = 8


def _ms_basis(phi: float) -> np.ndarray:
    # eigenbasis of cos(phi) X + sin(phi) Y: columns (1, +-e^{i phi})/sqrt(2)
    e = np.exp(1j * phi)
    return np.array([[1, 1], [e, -e]], dtype=complex) / math.sqrt(2)


def _ms_diagonal(n: int, qubits: tuple[int, ...], theta: float) -> np.ndarray:
    bits = _bit_table(n)[:, list(qubits)]
    collective = (1 - 2 * bits.astype(np.int64)).sum(axis=1)
    return np.exp(-1j * theta * collective**2 / 4.0)


@lru_cache(maxsize=256)
def _ms_matrix(n: int, qubits: tuple[int, ...], theta: float, phi: float) -> np.ndarray:
    w = _ms_basis(phi)
    full = np.ones((1, 1), dtype=complex)
    for q in range(n):
        full = np.kron(full, w if q in qubits else np.eye(2))
    u = (full * _ms_diagonal(n, qubits, theta)[None, :]) @ full.conj().T
    u.setflags(write=False)
    return u


def r_n_rule(n: int) -> tuple[str, int]:
    """Axis and sign of the pivot rotation ``R_N(phi) = exp(sign * i phi sigma_axis)``."""
    if n < 1:
        raise DomainError("R_N needs N >= 1")
    r = n % 4
    if r == 1:
        return "Z", 1
    if r == 3:
        return "Z", -1
    if r == 0:
        return "Y", 1
    return "Y", -1


def r_n(n: int, phi: float) -> np.ndarray:
    """Single-qubit rotation ``R_N(phi)`` acting on qubit 1 of the sandwich."""
    axis, sign = r_n_rule(n)
    return math.cos(phi) * np.eye(2) + 1j * sign * math.sin(phi) * pauli(axis)


# --------------------------------------------------------------------------- Pauli exponentials

_PIVOT_CHANGE = {"X": ("ry", "Y", -math.pi / 2), "Y": ("rx", "X", math.pi / 2), "Z": None}
_OTHER_CHANGE = {"X": None, "Y": ("rz", "Z", -math.pi / 2), "Z": ("ry", "Y", math.pi / 2)}


def _support(string: str) -> list[int]:
    return [k for k, c in enumerate(string) if c != "I"]


def _basis_change(state, string, support, circuit, inverse=False):
    for k, q in enumerate(support):
        change = (_PIVOT_CHANGE if k == 0 else _OTHER_CHANGE)[string[q]]
        if change is None:
            continue
        kind, axis, angle = change
        if inverse:
            angle = -angle
        state = apply_local(state, rotation(axis, angle), qubits=[q])
        _record(circuit, kind, [q], angle=angle)
    return state


def _check_string(state: HybridState, string: str) -> tuple[str, list[int]]:
    string = string.upper()
    if len(string) != state.layout.qubit_count:
        raise LayoutError(f"string {string!r} does not match {state.layout.qubit_count} qubits")
    support = _support(string)
    if not support:
        raise DomainError("all-identity string: apply a global phase instead")
    return string, support


def exp_pauli_string(state: HybridState, phi: float, string: str, circuit: Circuit | None = None) -> HybridState:
    """Apply ``exp(i phi P)`` through local basis changes and two MS gates.

    Weight-one strings are plain local rotations and use no MS gate.
    """
    string, support = _check_string(state, string)
    pivot = support[0]
    out = _basis_change(state, string, support, circuit)
    if len(support) == 1:
        out = apply_local(out, rotation("Z", -2 * phi), qubits=[pivot])
        _record(circuit, "rz", [pivot], angle=-2 * phi)
    else:
        axis, sign = r_n_rule(len(support))
        out = apply_ms(out, MsGate(math.pi / 2, 0.0, tuple(support)), circuit)
        angle = -2 * sign * phi
        out = apply_local(out, rotation(axis, angle), qubits=[pivot])
        _record(circuit, "r" + axis.lower(), [pivot], angle=angle)
        out = apply_ms(out, MsGate(-math.pi / 2, 0.0, tuple(support)), circuit)
    return _basis_change(out, string, support, circuit, inverse=True)


def spin_boson_unitary(axis: str, angle: float, d: int) -> np.ndarray:
    """``exp(-i angle sigma_axis (a + a^dagger))`` on qubit (x) mode."""
    a = annihilation(d)
    g = np.kron(pauli(axis), a + a.conj().T)
    return exact_unitary(g, angle)


def exp_pauli_boson(state: HybridState, theta: float, string: str, mode: int,
                    circuit: Circuit | None = None, max_leakage: float | None = LEAKAGE_TOL) -> HybridState:
    """Apply ``exp(-i theta P (x) (a + a^dagger))``.

    Same sandwich as :func:`exp_pauli_string`, with the pivot rotation
    ``R_N`` replaced by the spin-boson term ``exp(+-i phi sigma (a + a^dagger))``.
    """
    string, support = _check_string(state, string)
    if not 0 <= mode < state.layout.n_modes:
        raise LayoutError(f"mode {mode} not in layout")
    d = state.layout.mode_dims[mode]
    before = top_level_population(state)
    pivot = support[0]
    out = _basis_change(state, string, support, circuit)
    if len(support) == 1:
        out = apply_local(out, spin_boson_unitary("Z", theta, d), qubits=[pivot], modes=[mode])
        _record(circuit, "spin_boson", [pivot], [mode], axis="Z", angle=theta)
    else:
        axis, sign = r_n_rule(len(support))
        out = apply_ms(out, MsGate(math.pi / 2, 0.0, tuple(support)), circuit)
        # exp(i phi sign sigma x) with phi = -theta
        angle = sign * theta
        out = apply_local(out, spin_boson_unitary(axis, angle, d), qubits=[pivot], modes=[mode])
        _record(circuit, "spin_boson", [pivot], [mode], axis=axis, angle=angle)
        out = apply_ms(out, MsGate(-math.pi / 2, 0.0, tuple(support)), circuit)
    out = _basis_change(out, string, support, circuit, inverse=True)
    _check_leakage(before, out, max_leakage)
    return out


def global_phase(state: HybridState, angle: float, circuit: Circuit | None = None) -> HybridState:
    """Multiply by ``exp(i angle)``; recorded so traces stay complete."""
    _record(circuit, "global_phase", [], angle=float(angle))
    return HybridState(state.layout, state.amplitudes * np.exp(1j * angle))
