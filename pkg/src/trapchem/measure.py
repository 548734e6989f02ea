"""Measurement protocols built on single-qubit readout.

* nonlocal Pauli correlators read from one qubit after an MS-compiled rotation;
* Pauli-boson correlators from the derivative of that readout;
* single-ancilla phase estimation with a classical Fourier transform;
* transition elements from a weak perturbation and ancilla tomography.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import get_window

from .errors import DegenerateError, DomainError, LayoutError, ProtocolError, SamplingError
from .hilbert import (
    HybridState,
    PauliTermSum,
    apply_local,
    apply_pauli_sum,
    exact_unitary,
    pauli_sum_operator,
)
from .ionops import (
    LEAKAGE_TOL,
    Circuit,
    _basis_change,
    _check_string,
    _record,
    exp_pauli_boson,
    exp_pauli_string,
    rotation,
)

#: Central-difference step (radians) for the bosonic derivative.
FD_STEP = 1e-4

# The readout rotation is exp(-i theta J) with J = X on the support.
# Conjugation gives cos(2 theta) Z + sin(2 theta) Y X..X on the pivot,
# so theta = pi/4 leaves the pure correlator.
READOUT_ANGLE = math.pi / 4


def _readout_frame(state: HybridState, string: str, circuit: Circuit | None):
    """Rotate so that the target string becomes ``Y`` on the pivot and ``X`` elsewhere.

    The MS basis change maps the string to ``Z X..X``; an extra ``R_x(-pi/2)``
    on the pivot turns that ``Z`` into ``Y``.
    """
    string, support = _check_string(state, string)
    out = _basis_change(state, string, support, circuit)
    pivot = support[0]
    out = apply_local(out, rotation("X", -math.pi / 2), qubits=[pivot])
    _record(circuit, "rx", [pivot], angle=-math.pi / 2)
    j = "".join("X" if c != "I" else "I" for c in string)
    return out, j, pivot


def _pivot_z(state: HybridState, pivot: int) -> float:
    p0, p1 = state.qubit_probabilities(pivot)
    return float(p0 - p1)


def measure_nonlocal(state: HybridState, string: str, circuit: Circuit | None = None) -> float:
    """``<P>`` for a Pauli string from a single-qubit ``Z`` readout.

    The state is rotated into the frame where ``P = Y X..X``, evolved with
    ``exp(-i pi/4 X..X)`` (two MS gates), and the pivot qubit is read out.
    """
    state.check_normalized()
    out, j, pivot = _readout_frame(state, string, circuit)
    if j.count("X") == 1:
        # weight one: exp(-i pi/4 X) is a local rotation
        out = apply_local(out, rotation("X", 2 * READOUT_ANGLE), qubits=[pivot])
        _record(circuit, "rx", [pivot], angle=2 * READOUT_ANGLE)
    else:
        out = exp_pauli_string(out, -READOUT_ANGLE, j, circuit)
    return _pivot_z(out, pivot)


def readout_curve(state: HybridState, string: str, theta: float, mode: int | None = None,
                  max_leakage: float | None = LEAKAGE_TOL) -> float:
    """``<Z_pivot>`` after the readout rotation by ``theta``.

    Without ``mode`` the rotation is ``exp(-i theta X..X)`` and the result is
    ``cos(2 theta) <Z'> + sin(2 theta) <P>``; with a mode it is
    ``exp(-i theta X..X (a + a^dagger))``.
    """
    out, j, pivot = _readout_frame(state, string, None)
    if mode is None:
        out = apply_local(out, rotation("X", 2 * theta), qubits=[pivot]) if j.count("X") == 1 \
            else exp_pauli_string(out, -theta, j)
    else:
        out = exp_pauli_boson(out, theta, j, mode, max_leakage=max_leakage)
    return _pivot_z(out, pivot)


def measure_pauli_boson(state: HybridState, string: str, mode: int, step: float = FD_STEP,
                        max_leakage: float | None = LEAKAGE_TOL) -> float:
    """``<P (a + a^dagger)>`` from the slope of the one-qubit readout at ``theta = 0``.

    The readout derivative is ``+2 <P (a + a^dagger)>`` in this frame; it is
    taken by central difference with the given step.
    """
    state.check_normalized()
    if not 0 <= mode < state.layout.n_modes:
        raise LayoutError(f"mode {mode} not in layout")
    plus = readout_curve(state, string, step, mode, max_leakage)
    minus = readout_curve(state, string, -step, mode, max_leakage)
    return (plus - minus) / (2 * step) / 2


# --------------------------------------------------------------------------- phase estimation


@dataclass(frozen=True)
class SpectralLine:
    omega: float
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise DomainError("line weights are non-negative")


@dataclass
class AncillaSeries:
    """Ancilla coherence ``g(t) = <1|rho|0>`` on a uniform time grid."""

    t: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.g = np.asarray(self.g, dtype=complex)
        if self.t.shape != self.g.shape or self.t.ndim != 1:
            raise LayoutError("t and g must be aligned 1-d arrays")
        if np.any(np.abs(self.g) > 0.5 + 1e-9):
            raise DomainError("|g(t)| exceeds the reduced-density-matrix bound 1/2")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def resolution(self) -> float:
        """Frequency bin ``2 pi / (t span)``."""
        return 2 * math.pi / (self.t[-1] - self.t[0] + self.dt)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_g", "im_g"])
            for tj, gj in zip(self.t, self.g):
                w.writerow([repr(float(tj)), repr(float(gj.real)), repr(float(gj.imag))])


def _uniform(t: np.ndarray, rtol: float = 1e-9) -> bool:
    if t.size < 2:
        return False
    d = np.diff(t)
    return bool(d[0] > 0 and np.allclose(d, d[0], rtol=rtol, atol=0))


def phase_estimation_scan(state: HybridState, hamiltonian: PauliTermSum, t_grid,
                          backend: str = "exact", trotter_steps: int = 1) -> AncillaSeries:
    """Ancilla in ``|+>``, controlled ``exp(-iHt)``, partial trace over the system.

    ``backend="trotter"`` replaces the exact propagator by the first-order
    product formula with ``trotter_steps`` steps.
    """
    from .trotter import TrotterPlan, trotter_evolve

    state.check_normalized()
    t = np.asarray(t_grid, dtype=float)
    if not _uniform(t):
        raise SamplingError("phase estimation needs a uniform time grid")
    if backend not in ("exact", "trotter"):
        raise DomainError(f"unknown backend {backend!r}")
    layout = state.layout
    h = pauli_sum_operator(hamiltonian, layout) if backend == "exact" else None
    if h is not None:
        energies, vecs = np.linalg.eigh(h)
        coeffs = vecs.conj().T @ state.amplitudes
    else:
        plan = TrotterPlan.for_hamiltonian(hamiltonian, 0.0, trotter_steps)
    g = np.empty(t.size, dtype=complex)
    for j, tj in enumerate(t):
        if h is not None:
            evolved = vecs @ (np.exp(-1j * energies * tj) * coeffs)
        else:
            evolved = trotter_evolve(state, hamiltonian, plan.with_time(tj), backend="direct")[0].amplitudes
        # joint state (|0>|psi> + |1> U|psi>)/sqrt 2 with the ancilla in front
        joint = np.stack([state.amplitudes, evolved]) / math.sqrt(2)
        rho = joint @ joint.conj().T
        g[j] = rho[1, 0]
    return AncillaSeries(t, g)


def _dtft(series: AncillaSeries, window: np.ndarray, omega):
    phase = np.exp(1j * np.multiply.outer(np.atleast_1d(omega), series.t))
    return phase @ (window * series.g)


def extract_spectrum(series: AncillaSeries, omega_max: float | None = None, threshold: float = 1e-3,
                     pad: int = 8, edge_fraction: float = 0.05, edge_tol: float = 0.01) -> list[SpectralLine]:
    """Lines ``(omega_k, |alpha_k|^2)`` from the ancilla coherence.

    A Blackman-Harris window suppresses leakage between lines. Peaks of the
    zero-padded transform are refined on the continuous transform, and weights
    follow from the window-normalized peak height.

    Raises :class:`SamplingError` if the grid is too short or non-uniform, if
    the declared ``omega_max`` exceeds the Nyquist limit, or if more than
    ``edge_tol`` of the spectral power sits in the outer ``edge_fraction`` of
    the band (a sign of aliasing).
    """
    n = series.t.size
    if n < 64:
        raise SamplingError(f"need at least 64 samples, got {n}")
    if not _uniform(series.t):
        raise SamplingError("time grid is not uniform")
    dt = series.dt
    nyquist = math.pi / dt
    if omega_max is not None and omega_max >= nyquist:
        raise SamplingError(f"declared spectral bound {omega_max} exceeds the Nyquist limit {nyquist}")
    window = get_window("blackmanharris", n, fftbins=False)
    m = pad * n
    # F(w_k) = sum_j w_j g_j exp(+i w_k t_j) on the FFT grid
    spec = np.fft.ifft(window * series.g, m) * m * np.exp(1j * np.fft.fftfreq(m, d=dt) * 2 * np.pi * series.t[0])
    omega = np.fft.fftfreq(m, d=dt) * 2 * np.pi
    order = np.argsort(omega)
    omega, spec = omega[order], spec[order]
    amp = np.abs(spec)
    power = amp ** 2
    edge = np.abs(omega) >= (1 - edge_fraction) * nyquist
    if power.sum() > 0 and power[edge].sum() > edge_tol * power.sum():
        raise SamplingError("spectral power at the band edge: the grid is probably aliased")
    top = amp.max()
    if top == 0:
        return []
    norm = window.sum()
    step = omega[1] - omega[0]
    lines = []
    for k in range(1, m - 1):
        if amp[k] >= amp[k - 1] and amp[k] > amp[k + 1] and amp[k] >= threshold * top:
            res = minimize_scalar(lambda w: -abs(_dtft(series, window, w)[0]),
                                  bounds=(omega[k] - step, omega[k] + step), method="bounded",
                                  options={"xatol": step * 1e-6})
            w_k = float(res.x)
            weight = float(2 * abs(_dtft(series, window, w_k)[0]) / norm)
            lines.append(SpectralLine(w_k, weight))
    return lines


def spectrum_json(lines) -> str:
    return json.dumps([{"omega": ln.omega, "weight": ln.weight} for ln in lines], indent=2)


# --------------------------------------------------------------------------- weak measurement


@dataclass(frozen=True)
class WeakMeasurement:
    estimate: complex
    q: float
    postselection_probability: float


def weak_transition_element(g: HybridState, e: HybridState, a_op: PauliTermSum, lam: float,
                            q_op: PauliTermSum, detail: bool = False):
    """Estimate ``<e|A|g>`` from a weak kick ``exp(-i lam Q)`` and ancilla tomography.

    The phase of ``|e>`` is gauged internally so that ``<e|Q|g> = i q`` with
    ``q > 0``; the estimate ``i q (r - 1)``, with ``r`` the ratio of the
    post-selected ancilla amplitudes, is converted back to the caller's phase
    of ``|e>``. The bias is of order ``lam``.
    """
    if not 0 < lam <= 0.1:
        raise DomainError("lambda must lie in (0, 0.1]")
    g.check_normalized()
    e.check_normalized()
    if g.layout != e.layout:
        raise LayoutError("g and e live in different layouts")
    m = complex(np.vdot(e.amplitudes, apply_pauli_sum(g, q_op)))
    if abs(m) < 1e-12:
        raise ProtocolError("<e|Q|g> vanishes; choose a different perturbation Q")
    q = abs(m)
    gauge = np.conj(1j * q / m)  # |e'> = gauge |e>, so <e'|Q|g> = i q
    e_amp = gauge * e.amplitudes
    layout = g.layout
    kicked = exact_unitary(pauli_sum_operator(q_op, layout), lam) @ g.amplitudes
    controlled = exact_unitary(pauli_sum_operator(a_op, layout), lam) @ kicked
    # ancilla amplitudes after projecting the system onto |e'>
    c0 = np.vdot(e_amp, kicked) / math.sqrt(2)
    c1 = np.vdot(e_amp, controlled) / math.sqrt(2)
    prob = abs(c0) ** 2 + abs(c1) ** 2
    if prob < 1e-12 or abs(c0) ** 2 < 1e-24:
        raise DegenerateError(f"post-selection probability {prob:.3e} is numerically zero")
    # exact tomography of the normalized ancilla state: r = rho_10 / rho_00
    rho = np.outer([c0, c1], np.conj([c0, c1])) / prob
    r = rho[1, 0] / rho[0, 0]
    estimate_gauged = 1j * q * (r - 1)
    estimate = complex(estimate_gauged / np.conj(gauge))
    if detail:
        return WeakMeasurement(estimate, q, float(prob))
    return estimate
