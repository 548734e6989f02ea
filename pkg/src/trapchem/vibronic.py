"""Two-surface spin-boson models: Hamiltonians, dipole correlations, absorption spectra.

The electronic two-level system is qubit 0 (bit 1 = excited surface, spin up);
nuclear normal modes follow as bosonic modes. The Hamiltonian is assembled
from its surface blocks,

    H = P_down (x) (D_g + sum_k w_k^g a_k^+ a_k) + P_up (x) (D_e + sum_k w_k^e b_k^+ b_k),

with ``b_k = sum_j s_kj a_j + lam_k``. ``D_g, D_e`` are the electronic offsets
at the surface minima (no zero-point energy), so the 0-0 line sits at
``D_e - D_g``.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DomainError,
    LayoutError,
    ParseError,
    ProtocolError,
    SaddlePointError,
    SamplingError,
    TruncationError,
    WindowingError,
)
from .hilbert import (
    HilbertLayout,
    HybridState,
    annihilation,
    apply_local,
    embed,
    pauli,
)
from .ionops import LaserPulse, apply_pulse, apply_simultaneous, rotation

ORTHOGONALITY_TOL = 1e-8
WINDOW_TOL = 1e-4
LEAKAGE_TOL = 1e-6


class TruncationWarning(UserWarning):
    """Fock truncation below the ``4 lam**2 + 10`` heuristic."""


def _floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(values))


@dataclass
class VibronicModel:
    """Parameters of a two-surface harmonic model.

    ``thermal`` holds ground-surface populations ``p_n`` over the flattened
    multimode Fock index; ``None`` means the vibrational ground state.
    """

    delta_g: float
    delta_e: float
    omega_g: tuple
    omega_e: tuple
    shifts: tuple
    duschinsky: np.ndarray | None = None
    mu_ge: float = 1.0
    thermal: np.ndarray | None = None

    def __post_init__(self):
        self.omega_g = _floats(self.omega_g)
        self.omega_e = _floats(self.omega_e)
        self.shifts = _floats(self.shifts)
        k = len(self.omega_g)
        if k == 0 or len(self.omega_e) != k or len(self.shifts) != k:
            raise LayoutError("omega_g, omega_e and shifts need one entry per mode")
        if min(self.omega_g + self.omega_e) <= 0:
            raise DomainError("vibrational frequencies must be positive")
        if self.duschinsky is None:
            self.duschinsky = np.eye(k)
        self.duschinsky = np.asarray(self.duschinsky, dtype=float)
        if self.duschinsky.shape != (k, k):
            raise LayoutError(f"Duschinsky matrix must be {k}x{k}")
        if not np.allclose(self.duschinsky @ self.duschinsky.T, np.eye(k), atol=ORTHOGONALITY_TOL, rtol=0):
            raise DomainError("Duschinsky matrix is not orthogonal")
        if self.thermal is not None:
            p = np.asarray(self.thermal, dtype=float).reshape(-1)
            if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
                raise DomainError("thermal weights must be non-negative and sum to 1")
            self.thermal = p

    @property
    def n_modes(self) -> int:
        return len(self.omega_g)

    @property
    def zero_zero(self) -> float:
        return self.delta_e - self.delta_g

    def recommended_truncation(self) -> int:
        return int(math.ceil(4 * max(lam * lam for lam in self.shifts) + 10))

    def layout(self, d: int) -> HilbertLayout:
        return HilbertLayout(1, (d,) * self.n_modes)

    def populations(self, d: int) -> np.ndarray:
        """``p_n`` over the ``d**K`` ground-surface Fock states."""
        size = d ** self.n_modes
        if self.thermal is None:
            p = np.zeros(size)
            p[0] = 1.0
            return p
        p = self.thermal
        if p.size > size:
            if np.any(p[size:] > 0):
                raise TruncationError("thermal weights extend beyond the Fock truncation")
            p = p[:size]
        return np.pad(p, (0, size - p.size))


def boltzmann_weights(omega_g, d: int, temperature: float) -> np.ndarray:
    """Boltzmann populations of the ground-surface oscillators (``k_B = 1``), normalized in the truncated space."""
    omega_g = _floats(omega_g)
    if temperature < 0:
        raise DomainError("temperature must be >= 0")
    p = np.ones(1)
    for w in omega_g:
        levels = np.zeros(d)
        if temperature == 0:
            levels[0] = 1.0
        else:
            levels = np.exp(-w * np.arange(d) / temperature)
        p = np.kron(p, levels)
    return p / p.sum()


def build_hamiltonian(model: VibronicModel, d: int) -> np.ndarray:
    """Dense Hermitian matrix on qubit (x) ``d**K`` Fock space."""
    if d < model.recommended_truncation():
        warnings.warn(f"truncation {d} below the heuristic {model.recommended_truncation()}", TruncationWarning,
                      stacklevel=2)
    k = model.n_modes
    layout = model.layout(d)
    eye_m = np.eye(layout.mode_dim)
    a = [embed(HilbertLayout(0, layout.mode_dims), None, {j: annihilation(d)}) for j in range(k)]
    h_g = model.delta_g * eye_m + sum(w * aj.conj().T @ aj for w, aj in zip(model.omega_g, a))
    h_e = model.delta_e * eye_m
    for kk in range(k):
        b = sum(model.duschinsky[kk, j] * a[j] for j in range(k)) + model.shifts[kk] * eye_m
        h_e = h_e + model.omega_e[kk] * b.conj().T @ b
    down = np.diag([1.0, 0.0])
    up = np.diag([0.0, 1.0])
    return np.kron(down, h_g) + np.kron(up, h_e)


def displaced_oscillator_weights(lam: float, m_max: int) -> np.ndarray:
    """Franck-Condon factors ``|<m|D(lam)|0>|**2 = exp(-lam**2) lam**(2m) / m!``."""
    m = np.arange(m_max + 1)
    if lam == 0:
        return (m == 0).astype(float)
    lgam = np.array([math.lgamma(x + 1.0) for x in m])
    return np.exp(-lam * lam + 2 * m * math.log(abs(lam)) - lgam)


# --------------------------------------------------------------------------- correlation and spectrum


@dataclass
class CorrelationSeries:
    t: np.ndarray
    c: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_C", "im_C"])
            for tj, cj in zip(self.t, self.c):
                w.writerow([repr(float(tj)), repr(float(cj.real)), repr(float(cj.imag))])


def _uniform(t):
    d = np.diff(t)
    return t.size >= 2 and d[0] > 0 and np.allclose(d, d[0], rtol=1e-9, atol=0)


def dipole_correlation(model: VibronicModel, t_grid, d: int,
                       max_leakage: float | None = LEAKAGE_TOL) -> CorrelationSeries:
    """``C(t) = mu**2 sum_n p_n <n,down| e^{iHt} sigma_x e^{-iHt} sigma_x |n,down>``.

    Evaluated from one eigendecomposition of ``H``. Raises
    :class:`TruncationError` if the propagated states put more than
    ``max_leakage`` population in the top Fock level of any mode.
    """
    t = np.asarray(t_grid, dtype=float)
    h = build_hamiltonian(model, d)
    energies, vecs = np.linalg.eigh(h)
    layout = model.layout(d)
    dm = layout.mode_dim
    p = model.populations(d)
    sx = np.kron(pauli("X"), np.eye(dm))
    phases = np.exp(-1j * np.multiply.outer(energies, t))
    top = _top_level_masks(layout)
    c = np.zeros(t.size, dtype=complex)
    for n in np.nonzero(p)[0]:
        ket = np.zeros(layout.dim, dtype=complex)
        ket[n] = 1.0  # qubit bit 0 (down), mode index n
        bra_t = vecs @ (phases * (vecs.conj().T @ ket)[:, None])  # e^{-iHt}|n,down>
        ket_t = vecs @ (phases * (vecs.conj().T @ (sx @ ket))[:, None])  # e^{-iHt} sigma_x |n,down>
        if max_leakage is not None:
            leak = max((np.abs(ket_t[m]) ** 2).sum(axis=0).max() for m in top)
            if leak > max_leakage:
                raise TruncationError(f"top Fock level population {leak:.2e} exceeds {max_leakage:.0e}")
        c += p[n] * np.einsum("it,it->t", bra_t.conj(), sx @ ket_t)
    return CorrelationSeries(t, model.mu_ge ** 2 * c)


def _top_level_masks(layout: HilbertLayout):
    masks = []
    for m, dim in enumerate(layout.mode_dims):
        idx = np.zeros(layout.shape, dtype=bool)
        sl = [slice(None)] * len(layout.shape)
        sl[layout.qubit_count + m] = dim - 1
        idx[tuple(sl)] = True
        masks.append(idx.reshape(-1))
    return masks


@dataclass
class SpectralPeak:
    omega: float
    weight: float


@dataclass
class SpectrumResult:
    omega: np.ndarray
    sigma: np.ndarray
    gamma: float
    peaks: list = field(default_factory=list)
    imag_ratio: float = 0.0

    @property
    def bin(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def integrated(self) -> float:
        """``sum sigma d omega / (2 pi)`` on the grid."""
        return float(self.sigma.sum() * self.bin / (2 * math.pi))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "sigma_abs"])
            for om, s in zip(self.omega, self.sigma):
                w.writerow([repr(float(om)), repr(float(s))])


def _transform(t: np.ndarray, c: np.ndarray, gamma: float, pad: int):
    """Two-sided trapezoid transform ``sum_j w_j f(t_j) e^{+i omega t_j} dt`` with ``f(-t) = conj f(t)``."""
    n = t.size
    dt = t[1] - t[0]
    f = c * np.exp(-gamma * t)
    f = f.astype(complex)
    f[-1] *= 0.5
    m = pad * 2 * n
    z = np.zeros(m, dtype=complex)
    z[:n] = f
    z[m - n + 1:] = np.conj(f[1:])[::-1]
    spec = np.fft.ifft(z) * m * dt
    omega = np.fft.fftfreq(m, d=dt) * 2 * math.pi
    order = np.argsort(omega)
    return omega[order], spec[order]


def absorption_spectrum(series: CorrelationSeries, gamma: float, pad: int = 2, threshold: float = 1e-3,
                        fit_lines: bool = True) -> SpectrumResult:
    """``sigma(omega) = 2 Re int_0^inf e^{+i omega t} C(t) e^{-gamma t} dt`` on an FFT grid.

    The line for a transition at energy ``E`` sits at ``omega = +E``. Peaks are
    local maxima above ``threshold * max``; their weights come from a least-squares
    fit of the exact discrete line shapes (centres refined together with the weights).
    """
    t = np.asarray(series.t, dtype=float)
    c = np.asarray(series.c, dtype=complex)
    if t.size < 16 or not _uniform(t) or t[0] != 0:
        raise SamplingError("correlation series needs a uniform grid starting at t = 0")
    if gamma <= 0:
        raise DomainError("damping must be positive")
    scale = abs(c[0]) or 1.0
    tail = abs(c[-1]) * math.exp(-gamma * t[-1]) / scale
    if tail >= WINDOW_TOL:
        raise WindowingError(f"|C(t_max)| exp(-gamma t_max) = {tail:.2e} (relative); extend the time window")
    omega, spec = _transform(t, c, gamma, pad)
    imag_ratio = float(np.abs(spec.imag).max() / max(np.abs(spec.real).max(), 1e-300))
    sigma = spec.real
    result = SpectrumResult(omega, sigma, gamma, imag_ratio=imag_ratio)
    if fit_lines:
        result.peaks = _fit_peaks(t, omega, sigma, gamma, pad, threshold)
    return result


def _fit_peaks(t, omega, sigma, gamma, pad, threshold):
    top = sigma.max()
    idx = [k for k in range(1, sigma.size - 1)
           if sigma[k] >= sigma[k - 1] and sigma[k] > sigma[k + 1] and sigma[k] >= threshold * top]
    if not idx:
        return []
    h = omega[1] - omega[0]
    centres = []
    for k in idx:
        y0, y1, y2 = sigma[k - 1], sigma[k], sigma[k + 1]
        den = y0 - 2 * y1 + y2
        centres.append(omega[k] + (0.5 * h * (y0 - y2) / den if den else 0.0))
    centres = np.array(centres)

    def shapes(cs):
        return np.stack([_transform(t, np.exp(-1j * w * t), gamma, pad)[1].real for w in cs], axis=1)

    weights = np.linalg.lstsq(shapes(centres), sigma, rcond=None)[0]

    def resid(x):
        cs, ws = x[: len(centres)], x[len(centres):]
        return shapes(cs) @ ws - sigma

    x0 = np.concatenate([centres, weights])
    lo = np.concatenate([centres - h, np.full(len(centres), -np.inf)])
    hi = np.concatenate([centres + h, np.full(len(centres), np.inf)])
    fit = least_squares(resid, x0, bounds=(lo, hi), x_scale="jac")
    cs, ws = fit.x[: len(centres)], fit.x[len(centres):]
    return [SpectralPeak(float(cw), float(max(ww, 0.0))) for cw, ww in zip(cs, ws)]


# --------------------------------------------------------------------------- harmonic fit


@dataclass
class SurfaceScan:
    """Energies on a tensor-product grid of mass-weighted displacements.

    ``axes`` holds one uniform 1-d grid per coordinate; ``energies`` has shape
    ``tuple(len(ax) for ax in axes)``. The quadratic model is
    ``E = E* + 1/2 dR^T K dR`` and frequencies are ``sqrt(eig K)``.
    """

    axes: list
    energies: np.ndarray

    def __post_init__(self):
        self.axes = [np.asarray(ax, dtype=float) for ax in self.axes]
        self.energies = np.asarray(self.energies, dtype=float)
        if self.energies.shape != tuple(ax.size for ax in self.axes):
            raise LayoutError("energy array shape does not match the coordinate axes")
        if not np.all(np.isfinite(self.energies)):
            raise DomainError("energies must be finite")


@dataclass
class HarmonicFit:
    minimum: np.ndarray
    energy: float
    hessian: np.ndarray
    frequencies: np.ndarray
    modes: np.ndarray


def harmonic_fit(scan: SurfaceScan) -> HarmonicFit:
    """Minimum, Hessian and normal modes from central differences around the lowest grid point.

    Finite-difference error is ``O(h**2)`` in the grid spacing ``h`` for
    non-quadratic surfaces; quadratic surfaces are exact.
    """
    k = len(scan.axes)
    for ax in scan.axes:
        if ax.size < 3:
            raise SamplingError("need at least 3 points per coordinate")
        if not _uniform(ax):
            raise SamplingError("coordinate grids must be uniform and increasing")
    e = scan.energies
    i0 = np.unravel_index(int(np.argmin(e)), e.shape)
    if any(i == 0 or i == ax.size - 1 for i, ax in zip(i0, scan.axes)):
        raise SamplingError("the scan does not bracket a minimum")
    h = np.array([ax[1] - ax[0] for ax in scan.axes])

    def at(*shift):
        return e[tuple(i + s for i, s in zip(i0, shift))]

    def unit(a, s=1):
        v = [0] * k
        v[a] = s
        return v

    grad = np.zeros(k)
    hess = np.zeros((k, k))
    e0 = e[i0]
    for a in range(k):
        grad[a] = (at(*unit(a)) - at(*unit(a, -1))) / (2 * h[a])
        hess[a, a] = (at(*unit(a)) - 2 * e0 + at(*unit(a, -1))) / h[a] ** 2
        for b in range(a + 1, k):
            pp = [0] * k; pp[a] = 1; pp[b] = 1
            pm = [0] * k; pm[a] = 1; pm[b] = -1
            mp = [0] * k; mp[a] = -1; mp[b] = 1
            mm = [0] * k; mm[a] = -1; mm[b] = -1
            hess[a, b] = hess[b, a] = (at(*pp) - at(*pm) - at(*mp) + at(*mm)) / (4 * h[a] * h[b])
    vals, vecs = np.linalg.eigh(hess)
    if vals.min() <= 0:
        raise SaddlePointError(f"Hessian has a non-positive eigenvalue {vals.min():.3e}")
    x0 = np.array([ax[i] for ax, i in zip(scan.axes, i0)])
    step = np.linalg.solve(hess, grad)
    minimum = x0 - step
    energy = float(e0 - 0.5 * grad @ step)
    return HarmonicFit(minimum, energy, hess, np.sqrt(vals), vecs)


# --------------------------------------------------------------------------- ion protocol

ION_ETA = 0.1


def _carrier_rotation(state, axis, angle, qubit):
    # carrier with phase phi generates cos(phi) X + sin(phi) Y; rabi*duration = angle/2
    phase = {"X": 0.0, "Y": math.pi / 2}[axis]
    if angle < 0:
        phase += math.pi
    return apply_pulse(state, LaserPulse("carrier", 1.0, abs(angle) / 2, phase=phase, qubit=qubit))


def _carrier_z(state, angle, qubit):
    # R_z(a) = R_x(pi/2) R_y(a) R_x(-pi/2)
    state = _carrier_rotation(state, "X", -math.pi / 2, qubit)
    state = _carrier_rotation(state, "Y", angle, qubit)
    return _carrier_rotation(state, "X", math.pi / 2, qubit)


def _dispersive(state, chi, tau, qubit):
    """``exp(-i chi tau sigma_z n)`` from a detuned red sideband plus a carrier z-rotation."""
    if chi == 0 or tau == 0:
        return state
    rabi = 1.0
    detuning = (ION_ETA * rabi) ** 2 / chi
    state = apply_pulse(state, LaserPulse("dispersive", rabi, tau, eta=ION_ETA, qubit=qubit, mode=0,
                                          detuning=detuning))
    # residual chi*tau*P_up equals a z-rotation R_z(-chi tau) up to a global phase
    return _carrier_z(state, chi * tau, qubit)


def _sz_position(state, coupling, tau, qubit):
    """``exp(-i coupling tau sigma_z (a + a^+))`` from bichromatic sidebands between carrier rotations."""
    if coupling == 0 or tau == 0:
        return state
    phase = -math.pi / 2 if coupling > 0 else math.pi / 2
    rabi = abs(coupling) / ION_ETA
    # R_y(pi/2) X R_y(-pi/2) = -Z = sigma_z
    state = _carrier_rotation(state, "Y", -math.pi / 2, qubit)
    pulses = [LaserPulse(kind, rabi, tau, phase=phase, eta=ION_ETA, qubit=qubit, mode=0) for kind in ("red", "blue")]
    state = apply_simultaneous(state, pulses)
    return _carrier_rotation(state, "Y", math.pi / 2, qubit)


def ion_protocol_evolve(model: VibronicModel, t: float, slices: int, initial: HybridState) -> HybridState:
    """Digital-analog evolution on two ions and one motional mode.

    Ion 1 carries the electronic state, ion 2 is prepared spin-up so that its
    ``sigma_z`` acts as the identity. Each slice applies dispersive pulses for
    the spin-dependent frequency and bichromatic sidebands for the
    displacement coupling; the purely electronic part commutes with everything
    and is applied exactly at the end.
    """
    if model.n_modes != 1 or not np.allclose(model.duschinsky, 1):
        raise DomainError("the ion protocol covers the single-mode model")
    if initial.layout.qubit_count != 2 or initial.layout.n_modes != 1:
        raise LayoutError("ion protocol needs 2 qubits and 1 mode")
    if slices < 1:
        raise DomainError("slices must be >= 1")
    if initial.qubit_probabilities(1)[1] < 1 - 1e-10:
        raise ProtocolError("ion 2 must be prepared spin-up")
    wg, we, lam = model.omega_g[0], model.omega_e[0], model.shifts[0]
    tau = t / slices
    out = initial
    for _ in range(slices):
        out = _dispersive(out, 0.5 * (wg + we), tau, 1)
        out = _dispersive(out, 0.5 * (we - wg), tau, 0)
        out = _sz_position(out, 0.5 * lam * we, tau, 0)
        out = _sz_position(out, 0.5 * lam * we, tau, 1)
    # electronic part: const + 1/2 (D_e + w_e lam^2 - D_g) sigma_z, sigma_z = -Z
    const = 0.5 * (model.delta_g + model.delta_e + we * lam * lam)
    split = 0.5 * (model.delta_e + we * lam * lam - model.delta_g)
    out = apply_local(out, rotation("Z", -2 * split * t), qubits=[0])
    return HybridState(out.layout, out.amplitudes * np.exp(-1j * const * t))


def ion_protocol_fidelity(model: VibronicModel, t: float, slices: int, electronic_mode: HybridState) -> float:
    """Fidelity of the protocol to dense ``exp(-iHt)`` on ion 1 (x) mode."""
    lay = electronic_mode.layout
    if lay.qubit_count != 1 or lay.n_modes != 1:
        raise LayoutError("expected a 1-qubit, 1-mode state")
    d = lay.mode_dims[0]
    up = np.array([0.0, 1.0])
    two = HilbertLayout(2, (d,))
    joint = np.einsum("am,b->abm", electronic_mode.tensor(), up).reshape(-1)
    out = ion_protocol_evolve(model, t, slices, HybridState(two, joint))
    block = out.tensor()[:, 1, :].reshape(-1)
    h = build_hamiltonian(model, d)
    vals, vecs = np.linalg.eigh(h)
    exact = vecs @ (np.exp(-1j * vals * t) * (vecs.conj().T @ electronic_mode.amplitudes))
    return float(abs(np.vdot(exact, block)) ** 2)


# --------------------------------------------------------------------------- model files

_KEYS = {"delta_g", "delta_e", "omega_g", "omega_e", "lambda", "duschinsky", "mu_ge", "thermal",
         "temperature", "truncation", "gamma", "t_max", "dt"}


def load_model(path):
    """Parse a ``key = value`` model file; returns ``(model, options)``.

    Arrays are whitespace- or comma-separated; ``duschinsky`` is row-major.
    ``temperature`` (with ``truncation``) fills ``thermal`` with Boltzmann weights.
    Remaining keys (``truncation``, ``gamma``, ``t_max``, ``dt``) are returned as options.
    """
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", lineno)
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _KEYS:
                raise ParseError(f"unknown key {key!r}", lineno)
            if key in values:
                raise ParseError(f"duplicate key {key!r}", lineno)
            try:
                values[key] = [float(x) for x in re.split(r"[,\s]+", val) if x]
            except ValueError:
                raise ParseError(f"non-numeric value for {key!r}", lineno) from None
            if not values[key]:
                raise ParseError(f"empty value for {key!r}", lineno)
    for key in ("delta_g", "delta_e", "omega_g", "omega_e", "lambda"):
        if key not in values:
            raise ParseError(f"missing key {key!r}")
    k = len(values["omega_g"])
    dus = values.get("duschinsky")
    if dus is not None:
        if len(dus) != k * k:
            raise ParseError(f"duschinsky needs {k * k} entries")
        dus = np.array(dus).reshape(k, k)
    options = {key: values[key][0] for key in ("truncation", "gamma", "t_max", "dt", "temperature") if key in values}
    if "truncation" in options:
        options["truncation"] = int(options["truncation"])
    thermal = values.get("thermal")
    if thermal is None and options.get("temperature", 0) > 0:
        d = options.get("truncation")
        if d is None:
            raise ParseError("temperature needs a truncation")
        thermal = boltzmann_weights(values["omega_g"], d, options["temperature"])
    model = VibronicModel(values["delta_g"][0], values["delta_e"][0], values["omega_g"], values["omega_e"],
                          values["lambda"], dus, values.get("mu_ge", [1.0])[0], thermal)
    return model, options
