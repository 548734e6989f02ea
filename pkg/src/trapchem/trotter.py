"""First-order Trotter evolution compiled to MS gates, error curves and resource estimates."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, LayoutError
from .fermion import term_census
from .hilbert import (
    HybridState,
    PauliTermSum,
    basis_state,
    expectation,
    pauli_rotation,
)
from .ionops import Circuit, exp_pauli_string, global_phase

# timings in microseconds
MS_GATE_TIME_US = 50.0
LOCAL_GATE_TIME_US = 1.0
DECOHERENCE_BUDGET_US = 30_000.0


@dataclass(frozen=True)
class TrotterPlan:
    """``n`` repetitions of the ordered product of term exponentials over total time ``t``.

    ``order`` is a permutation of the non-identity terms of the Hamiltonian
    (in the order :attr:`PauliTermSum.terms` lists them after removing the
    identity).
    """

    steps: int
    time: float
    order: tuple[int, ...]

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError("a Trotter plan needs at least one step")
        if sorted(self.order) != list(range(len(self.order))):
            raise DomainError("order must be a permutation")

    @classmethod
    def for_hamiltonian(cls, hamiltonian: PauliTermSum, time: float, steps: int) -> "TrotterPlan":
        """Default ordering: descending ``|coefficient|`` (stable)."""
        coeffs = hamiltonian.without_identity().coeffs
        order = sorted(range(len(coeffs)), key=lambda k: -abs(coeffs[k]))
        return cls(steps, float(time), tuple(order))

    def with_time(self, time: float) -> "TrotterPlan":
        return TrotterPlan(self.steps, float(time), self.order)


def trotter_evolve(state: HybridState, hamiltonian: PauliTermSum, plan: TrotterPlan,
                   backend: str = "ms", circuit: Circuit | None = None) -> tuple[HybridState, Circuit]:
    """Apply ``(prod_l exp(-i H_l t/n))**n``; identity terms become a tracked global phase.

    ``backend="ms"`` compiles every factor to the MS sandwich; ``"direct"``
    applies ``cos + i sin P`` in one step (same operator, no gate trace).
    """
    if hamiltonian.n_qubits != state.layout.qubit_count:
        raise LayoutError("Hamiltonian and state disagree on the qubit count")
    terms = hamiltonian.without_identity().terms
    if len(plan.order) != len(terms):
        raise LayoutError("plan order does not match the Hamiltonian's term count")
    if backend not in ("ms", "direct"):
        raise DomainError(f"unknown backend {backend!r}")
    circuit = Circuit() if circuit is None else circuit
    if plan.time == 0:
        return state.copy(), circuit
    dt = plan.time / plan.steps
    out = state
    for _ in range(plan.steps):
        for k in plan.order:
            g, s = terms[k]
            if backend == "ms":
                out = exp_pauli_string(out, -g * dt, s, circuit)
            else:
                out = pauli_rotation(out, -g * dt, s)
    g0 = hamiltonian.identity_coefficient
    if g0:
        out = global_phase(out, -g0 * plan.time, circuit)
    return out, circuit


class ExactPropagator:
    """``exp(-iHt)|psi0>`` for many ``t`` from one eigendecomposition."""

    def __init__(self, hamiltonian: PauliTermSum, state: HybridState):
        h = hamiltonian.to_matrix()
        self.energies, self.vectors = np.linalg.eigh(h)
        self.layout = state.layout
        self.initial = state.copy()
        # overlaps with eigenvectors, one column per mode index
        self.coeffs = self.vectors.conj().T @ state.matrix_view()

    def __call__(self, t: float) -> HybridState:
        if t == 0:
            return self.initial.copy()
        amps = self.vectors @ (np.exp(-1j * self.energies * t)[:, None] * self.coeffs)
        return HybridState(self.layout, amps.reshape(-1))


@dataclass
class ErrorCurves:
    """Digital error ``1 - F`` per Trotter step count (rows) and time (columns)."""

    t: np.ndarray
    steps: tuple[int, ...]
    errors: np.ndarray

    def curve(self, n: int) -> np.ndarray:
        return self.errors[self.steps.index(n)]


def digital_error_curve(hamiltonian: PauliTermSum, initial: HybridState, t_grid, n_list,
                        backend: str = "ms") -> ErrorCurves:
    """``1 - |<psi_trotter(t)|psi_exact(t)>|**2`` on a time grid for each step count."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or not np.all(np.isfinite(t)) or np.any(np.diff(t) < 0):
        raise DomainError("time grid must be finite and sorted")
    exact = ExactPropagator(hamiltonian, initial)
    base = TrotterPlan.for_hamiltonian(hamiltonian, 0.0, 1)
    errors = np.zeros((len(n_list), len(t)))
    for i, n in enumerate(n_list):
        plan = TrotterPlan(int(n), 0.0, base.order)
        for j, tj in enumerate(t):
            sim, _ = trotter_evolve(initial, hamiltonian, plan.with_time(tj), backend=backend)
            ref = exact(tj)
            f = abs(np.vdot(ref.amplitudes, sim.amplitudes)) ** 2
            errors[i, j] = min(1.0, max(0.0, 1.0 - f))
    return ErrorCurves(t, tuple(int(n) for n in n_list), errors)


@dataclass(frozen=True)
class ErrorModel:
    """Fidelity loss ``epsilon`` per Trotter step."""

    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError("epsilon must lie in [0, 1)")


def accumulated_gate_error(n: int, model: ErrorModel, gates_per_step: int | None = None) -> float:
    """``1 - (1 - epsilon)**k`` with ``k = n`` (per-step epsilon, the default) or ``n * gates_per_step``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    k = n if gates_per_step is None else n * gates_per_step
    return float(-np.expm1(k * np.log1p(-model.epsilon)))


def linearized_gate_error(n: int, model: ErrorModel, gates_per_step: int | None = None) -> float:
    """First-order version ``k * epsilon`` of :func:`accumulated_gate_error`."""
    k = n if gates_per_step is None else n * gates_per_step
    return k * model.epsilon


def crossing_time(t, curve, level: float) -> float | None:
    """First time the curve reaches ``level`` (linear interpolation), or ``None``."""
    t = np.asarray(t, dtype=float)
    curve = np.asarray(curve, dtype=float)
    above = np.nonzero(curve >= level)[0]
    if above.size == 0:
        return None
    j = int(above[0])
    if j == 0:
        return float(t[0])
    t0, t1, c0, c1 = t[j - 1], t[j], curve[j - 1], curve[j]
    return float(t0 + (level - c0) * (t1 - t0) / (c1 - c0))


@dataclass
class EnergyTrace:
    t: np.ndarray
    exact: np.ndarray
    digital: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.digital - self.exact)

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max())


def energy_trace(hamiltonian: PauliTermSum, initial: HybridState, t_grid, n: int,
                 backend: str = "ms") -> EnergyTrace:
    """``<H>(t)`` under exact and Trotterized evolution."""
    t = np.asarray(t_grid, dtype=float)
    exact = ExactPropagator(hamiltonian, initial)
    plan = TrotterPlan.for_hamiltonian(hamiltonian, 0.0, n)
    e_exact = np.array([expectation(exact(tj), hamiltonian) for tj in t])
    e_dig = np.array([
        expectation(trotter_evolve(initial, hamiltonian, plan.with_time(tj), backend=backend)[0], hamiltonian)
        for tj in t
    ])
    return EnergyTrace(t, e_exact, e_dig)


# --------------------------------------------------------------------------- resources


@dataclass
class ResourceEstimate:
    """Gate counts and wall time; times are kept in microseconds so products stay exact."""

    ms_gate_count: int
    local_rotation_count: int
    ms_gate_time_us: float = MS_GATE_TIME_US
    local_time_us: float = LOCAL_GATE_TIME_US
    decoherence_budget_us: float = DECOHERENCE_BUDGET_US
    total_wall_time_us: float = field(init=False)

    def __post_init__(self):
        self.total_wall_time_us = (self.ms_gate_count * self.ms_gate_time_us
                                   + self.local_rotation_count * self.local_time_us)

    @property
    def total_wall_time(self) -> float:
        """Seconds."""
        return self.total_wall_time_us * 1e-6

    @property
    def within_budget(self) -> bool:
        return self.total_wall_time_us <= self.decoherence_budget_us

    def to_dict(self) -> dict:
        out = asdict(self)
        out["within_budget"] = self.within_budget
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def estimate_resources(nonlocal_terms: int, steps: int, local_rotations: int = 0, *,
                       ms_gate_time_us: float = MS_GATE_TIME_US, local_time_us: float = LOCAL_GATE_TIME_US,
                       decoherence_budget_us: float = DECOHERENCE_BUDGET_US) -> ResourceEstimate:
    """Two MS gates per nonlocal term per Trotter step.

    ``local_rotations`` is the total local-rotation count of the run; the
    default of zero counts MS time only.
    """
    if steps < 1 or nonlocal_terms < 0 or local_rotations < 0:
        raise DomainError("counts must be non-negative and steps >= 1")
    return ResourceEstimate(2 * nonlocal_terms * steps, local_rotations, ms_gate_time_us, local_time_us,
                            decoherence_budget_us)


def estimate_hamiltonian_resources(hamiltonian: PauliTermSum, plan: TrotterPlan, **timing) -> ResourceEstimate:
    """Counts taken from the census and from compiling one Trotter step."""
    census = term_census(hamiltonian)
    from .hilbert import HilbertLayout

    probe = basis_state(HilbertLayout(hamiltonian.n_qubits), "0" * hamiltonian.n_qubits)
    _, circ = trotter_evolve(probe, hamiltonian, TrotterPlan(1, 1.0, plan.order))
    if circ.ms_count != 2 * census["nonlocal_count"]:
        raise AssertionError("compiled MS count disagrees with the term census")
    return estimate_resources(census["nonlocal_count"], plan.steps, circ.local_count * plan.steps, **timing)


# --------------------------------------------------------------------------- file output


def write_error_csv(path, curves: ErrorCurves, epsilons=(1e-3, 1e-4, 1e-5)) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n", "epsilon", "digital_error", "accumulated_error", "accumulated_error_linear"])
        for eps in epsilons:
            model = ErrorModel(eps)
            for n in curves.steps:
                acc = accumulated_gate_error(n, model)
                lin = linearized_gate_error(n, model)
                for tj, err in zip(curves.t, curves.curve(n)):
                    w.writerow([repr(float(tj)), n, repr(float(eps)), repr(float(err)), repr(acc), repr(lin)])


def write_energy_csv(path, traces) -> None:
    """One row per time: ``t, E_exact, E_n<steps>...`` for a ``{steps: EnergyTrace}`` mapping."""
    steps = sorted(traces)
    first = traces[steps[0]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E_exact"] + [f"E_n{n}" for n in steps])
        for j, tj in enumerate(first.t):
            w.writerow([repr(float(tj)), repr(float(first.exact[j]))]
                       + [repr(float(traces[n].digital[j])) for n in steps])
