"""Unitary coupled cluster by pseudo time evolution, and the gradient-descent loop around it."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DomainError, LayoutError, TrapChemError
from .fermion import (
    FermionOpSum,
    MolecularIntegrals,
    build_electronic_hamiltonian,
    hartree_fock_state,
    jordan_wigner,
    load_integrals,
)
from .hilbert import HilbertLayout, HybridState, PauliTermSum, apply_pauli_sum, expectation, pauli_rotation
from .ionops import exp_pauli_string


def _excitations(n_orbitals: int, n_electrons: int):
    occ = range(n_electrons)
    virt = range(n_electrons, n_orbitals)
    singles = [(i, a) for i in occ for a in virt]
    doubles = [(i, j, a, b) for i, j in combinations(occ, 2) for a, b in combinations(virt, 2)]
    return singles, doubles


@dataclass
class ClusterAmplitudes:
    """Real singles ``t_i^a`` and doubles ``t_ij^ab`` (``i<j`` occupied, ``a<b`` virtual).

    Orbitals ``0..N-1`` are occupied in the reference. The flat-vector order
    is singles sorted by ``(i, a)`` followed by doubles sorted by ``(i, j, a, b)``.
    """

    n_orbitals: int
    n_electrons: int
    singles: dict = field(default_factory=dict)
    doubles: dict = field(default_factory=dict)

    def __post_init__(self):
        s, d = _excitations(self.n_orbitals, self.n_electrons)
        bad = set(self.singles) - set(s)
        if bad:
            raise DomainError(f"single excitations {sorted(bad)} do not go from occupied to virtual")
        bad = set(self.doubles) - set(d)
        if bad:
            raise DomainError(f"double excitations {sorted(bad)} need i<j occupied and a<b virtual")
        self.singles = {k: float(self.singles.get(k, 0.0)) for k in s}
        self.doubles = {k: float(self.doubles.get(k, 0.0)) for k in d}

    @classmethod
    def zeros(cls, n_orbitals: int, n_electrons: int) -> "ClusterAmplitudes":
        return cls(n_orbitals, n_electrons)

    @property
    def labels(self) -> list[tuple[int, ...]]:
        return list(self.singles) + list(self.doubles)

    @property
    def size(self) -> int:
        return len(self.singles) + len(self.doubles)

    def to_vector(self) -> np.ndarray:
        return np.array(list(self.singles.values()) + list(self.doubles.values()), dtype=float)

    def from_vector(self, vec) -> "ClusterAmplitudes":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise LayoutError(f"expected {self.size} amplitudes, got shape {vec.shape}")
        ns = len(self.singles)
        return ClusterAmplitudes(self.n_orbitals, self.n_electrons,
                                 dict(zip(self.singles, vec[:ns])), dict(zip(self.doubles, vec[ns:])))

    def to_dict(self) -> dict:
        return {"singles": [[*k, v] for k, v in self.singles.items()],
                "doubles": [[*k, v] for k, v in self.doubles.items()]}


def excitation_operator(label: tuple[int, ...]) -> FermionOpSum:
    """``c_a^dagger c_i`` for ``(i, a)``, ``c_a^dagger c_b^dagger c_j c_i`` for ``(i, j, a, b)``."""
    if len(label) == 2:
        i, a = label
        return FermionOpSum([(1.0, ((a, True), (i, False)))])
    i, j, a, b = label
    return FermionOpSum([(1.0, ((a, True), (b, True), (j, False), (i, False)))])


def _hermitian_generator(ops: FermionOpSum, n: int) -> PauliTermSum:
    # i (T - T^dagger) is Hermitian; its JW image has real coefficients
    return jordan_wigner((ops - ops.adjoint()) * 1j, n)


def cluster_generator_by_rank(t: ClusterAmplitudes) -> list[PauliTermSum]:
    """``[K_1, K_2]`` with ``K_r = i (T_r - T_r^dagger)``."""
    n = t.n_orbitals
    out = []
    for amps in (t.singles, t.doubles):
        op = FermionOpSum([])
        for label, v in amps.items():
            if v:
                op = op + excitation_operator(label) * v
        out.append(_hermitian_generator(op, n))
    return out


def cluster_generator(t: ClusterAmplitudes) -> PauliTermSum:
    """``K = i (T - T^dagger)`` as a Pauli sum; ``exp(-iK) = exp(T - T^dagger)``."""
    k1, k2 = cluster_generator_by_rank(t)
    return k1 + k2


def _slices(delta: float) -> int:
    inv = 1.0 / delta
    n = int(round(inv))
    if n < 1 or abs(inv - n) > 1e-9 * max(1.0, inv):
        raise DomainError(f"1/delta must be a positive integer, got delta={delta}")
    return n


def prepare_ucc_state(reference: HybridState, t: ClusterAmplitudes, delta: float = 1 / 16,
                      backend: str = "ms") -> HybridState:
    """``(exp(-i K_2 delta) exp(-i K_1 delta))**(1/delta) |reference>``.

    Each Pauli term is applied with :func:`exp_pauli_string` (``backend="ms"``)
    or directly as ``cos + i sin P`` (``"direct"``, same operator).
    """
    if reference.layout.qubit_count != t.n_orbitals:
        raise LayoutError("reference and amplitudes disagree on the orbital count")
    if backend not in ("ms", "direct"):
        raise DomainError(f"unknown backend {backend!r}")
    n = _slices(delta)
    ranks = [k.without_identity().terms for k in cluster_generator_by_rank(t)]
    out = reference
    for _ in range(n):
        for terms in ranks:
            for c, s in terms:
                if backend == "ms":
                    out = exp_pauli_string(out, -c * delta, s)
                else:
                    out = pauli_rotation(out, -c * delta, s)
    return out


def ucc_energy(t: ClusterAmplitudes, hamiltonian: PauliTermSum, reference: HybridState,
               delta: float = 1 / 16, backend: str = "ms") -> float:
    """``<H>`` on the prepared state, summed term by term."""
    return expectation(prepare_ucc_state(reference, t, delta, backend), hamiltonian)


def commutator_gradient(t: ClusterAmplitudes, hamiltonian: PauliTermSum, reference: HybridState,
                        delta: float = 1 / 16, backend: str = "ms") -> np.ndarray:
    """``<[H, tau - tau^dagger]>`` on the prepared state for each excitation ``tau``.

    This equals ``2 Re <H phi | (tau - tau^dagger) phi>``; it is the exact
    derivative only when the varied factor acts last (first order in ``T``).
    """
    phi = prepare_ucc_state(reference, t, delta, backend)
    h_phi = apply_pauli_sum(phi, hamiltonian)
    out = np.empty(t.size)
    for k, label in enumerate(t.labels):
        gen = _hermitian_generator(excitation_operator(label), t.n_orbitals)  # i (tau - tau^dagger)
        g_phi = -1j * apply_pauli_sum(phi, gen)
        out[k] = 2 * np.vdot(h_phi, g_phi).real
    return out


FD_STEP = 1e-5


def finite_difference_gradient(t: ClusterAmplitudes, hamiltonian: PauliTermSum, reference: HybridState,
                               delta: float = 1 / 16, backend: str = "ms", step: float = FD_STEP) -> np.ndarray:
    vec = t.to_vector()
    out = np.empty(vec.size)
    for k in range(vec.size):
        e = np.zeros_like(vec)
        e[k] = step
        plus = ucc_energy(t.from_vector(vec + e), hamiltonian, reference, delta, backend)
        minus = ucc_energy(t.from_vector(vec - e), hamiltonian, reference, delta, backend)
        out[k] = (plus - minus) / (2 * step)
    return out


@dataclass
class GradientComparison:
    finite_difference: np.ndarray
    commutator: np.ndarray

    @property
    def max_discrepancy(self) -> float:
        return float(np.max(np.abs(self.finite_difference - self.commutator), initial=0.0))


def ucc_gradient(t: ClusterAmplitudes, hamiltonian: PauliTermSum, reference: HybridState,
                 delta: float = 1 / 16, mode: str = "finite-difference", backend: str = "ms"):
    """Gradient of :func:`ucc_energy` in the flat-vector order.

    ``mode="both"`` returns a :class:`GradientComparison`.
    """
    if mode == "finite-difference":
        return finite_difference_gradient(t, hamiltonian, reference, delta, backend)
    if mode == "commutator":
        return commutator_gradient(t, hamiltonian, reference, delta, backend)
    if mode == "both":
        return GradientComparison(finite_difference_gradient(t, hamiltonian, reference, delta, backend),
                                  commutator_gradient(t, hamiltonian, reference, delta, backend))
    raise DomainError(f"unknown gradient mode {mode!r}")


# --------------------------------------------------------------------------- optimizer


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient descent with Armijo backtracking.

    ``gradient`` picks the descent direction; ``"both"`` descends along the
    finite-difference gradient and records the commutator discrepancy.
    """

    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-12
    gradient: str = "finite-difference"
    tolerance: float = 1e-10
    max_iterations: int = 200
    delta: float = 1 / 16
    backend: str = "ms"

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("tolerance must be positive")
        if not 0 < self.backtrack < 1:
            raise DomainError("backtracking factor must lie in (0, 1)")
        if self.initial_step <= 0 or self.max_iterations < 0:
            raise DomainError("initial step must be positive and max_iterations non-negative")
        if self.gradient not in ("finite-difference", "commutator", "both"):
            raise DomainError(f"unknown gradient mode {self.gradient!r}")
        _slices(self.delta)


@dataclass
class OptimizationResult:
    amplitudes: ClusterAmplitudes
    energy: float
    hf_energy: float
    state: HybridState
    trace: list
    converged: bool
    stagnated: bool

    @property
    def energies(self) -> list[float]:
        return [row["E"] for row in self.trace]

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(row) + "\n" for row in self.trace)


def quantum_assisted_optimize(ints: MolecularIntegrals, config: OptimizerConfig = OptimizerConfig(),
                              hamiltonian: PauliTermSum | None = None,
                              initial: ClusterAmplitudes | None = None) -> OptimizationResult:
    """Minimize the UCC energy from ``T = 0`` (or ``initial``) by gradient descent.

    Every accepted iterate satisfies the Armijo condition, so the energy trace
    is non-increasing. The run converges once an accepted step lowers the
    energy by less than ``tolerance`` and the gradient norm there is below
    ``sqrt(tolerance)``. If no step down to ``min_step`` is accepted the run
    stops with ``stagnated=True`` instead of raising.
    """
    h = build_electronic_hamiltonian(ints) if hamiltonian is None else hamiltonian
    layout = HilbertLayout(ints.n_orbitals)
    ref = hartree_fock_state(layout, ints.n_electrons, ints.n_orbitals)
    t = ClusterAmplitudes.zeros(ints.n_orbitals, ints.n_electrons) if initial is None else initial

    def energy(amps):
        return ucc_energy(amps, h, ref, config.delta, config.backend)

    def gradient(amps):
        g = ucc_gradient(amps, h, ref, config.delta, config.gradient, config.backend)
        if isinstance(g, GradientComparison):
            return g.finite_difference, g.max_discrepancy
        return g, None

    hf = expectation(ref, h)
    e = energy(t)
    step = config.initial_step
    trace = [{"iter": 0, "E": e, "grad_norm": None, "step": None}]
    converged = stagnated = False
    for it in range(1, config.max_iterations + 1):
        grad, disc = gradient(t)
        gnorm2 = float(grad @ grad)
        vec = t.to_vector()
        while True:
            trial = t.from_vector(vec - step * grad)
            e_new = energy(trial)
            if e_new <= e - config.armijo * step * gnorm2:
                break
            step *= config.backtrack
            if step < config.min_step:
                stagnated = True
                break
        if stagnated:
            break
        row = {"iter": it, "E": e_new, "grad_norm": math.sqrt(gnorm2), "step": step}
        if disc is not None:
            row["gradient_discrepancy"] = disc
        trace.append(row)
        de = e - e_new
        t, e = trial, e_new
        # both the energy change and the gradient must be small
        if de < config.tolerance and gnorm2 < config.tolerance:
            converged = True
            break
        # let the step grow back after a successful move
        step = min(config.initial_step, step / config.backtrack)
    state = prepare_ucc_state(ref, t, config.delta, config.backend)
    return OptimizationResult(t, e, hf, state, trace, converged, stagnated)


# --------------------------------------------------------------------------- energy surfaces


@dataclass
class SurfacePoint:
    label: str
    energy: float | None = None
    total_energy: float | None = None
    e_nuc: float | None = None
    lines: list = field(default_factory=list)
    converged: bool = False
    error: str | None = None


def potential_energy_surface(paths, config: OptimizerConfig = OptimizerConfig(), t_grid=None,
                             omega_max: float | None = None) -> list[SurfacePoint]:
    """Optimize each geometry, then read its spectrum off a phase-estimation scan.

    Failures are recorded on the row and the sweep continues.
    """
    from .measure import extract_spectrum, phase_estimation_scan

    paths = list(paths)
    if not paths:
        raise DomainError("empty geometry sweep")
    t_grid = np.arange(1024) * 0.5 if t_grid is None else t_grid
    rows = []
    for path in paths:
        try:
            ints = load_integrals(path)
            label = ints.geometry or str(path)
        except (TrapChemError, OSError) as exc:
            rows.append(SurfacePoint(str(path), error=str(exc)))
            continue
        row = SurfacePoint(label, e_nuc=ints.e_nuc)
        try:
            h = build_electronic_hamiltonian(ints)
            res = quantum_assisted_optimize(ints, config, h)
            row.energy = res.energy
            row.total_energy = res.energy + ints.e_nuc
            row.converged = res.converged
            series = phase_estimation_scan(res.state, h, t_grid)
            row.lines = [(ln.omega + ints.e_nuc, ln.weight) for ln in extract_spectrum(series, omega_max)]
        except TrapChemError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def write_surface_csv(path, rows) -> None:
    width = max((len(r.lines) for r in rows), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["R_label", "E_opt", "E_opt_total", "e_nuc", "converged", "error"]
        for k in range(width):
            head += [f"pea_omega_{k}", f"pea_weight_{k}"]
        w.writerow(head)
        for r in rows:
            line = [r.label, _fmt(r.energy), _fmt(r.total_energy), _fmt(r.e_nuc), r.converged, r.error or ""]
            for om, wt in r.lines:
                line += [repr(float(om)), repr(float(wt))]
            line += [""] * (len(head) - len(line))
            w.writerow(line)


def _fmt(x):
    return "" if x is None else repr(float(x))
