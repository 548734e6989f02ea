import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from trapchem.errors import DomainError, LayoutError
from trapchem.fermion import term_census
from trapchem.hilbert import HilbertLayout, PauliTermSum, basis_state, random_state
from trapchem.trotter import (
    ErrorModel,
    TrotterPlan,
    accumulated_gate_error,
    crossing_time,
    digital_error_curve,
    energy_trace,
    estimate_hamiltonian_resources,
    estimate_resources,
    linearized_gate_error,
    trotter_evolve,
    write_energy_csv,
    write_error_csv,
)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def h2_scaled(h2):
    from trapchem.fermion import build_electronic_hamiltonian

    return build_electronic_hamiltonian(h2) * (1.0 / abs(h2.one_body[0, 0]))


@pytest.fixture(scope="module")
def golden_errors():
    out = {}
    with open(DATA / "h2_digital_error_golden.csv") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["n"]), []).append((float(row["t"]), float(row["digital_error"])))
    return out


def test_plan_ordering_and_validation(h2_scaled):
    plan = TrotterPlan.for_hamiltonian(h2_scaled, 1.0, 2)
    coeffs = np.abs(h2_scaled.without_identity().coeffs)
    assert np.all(np.diff(coeffs[list(plan.order)]) <= 0)
    with pytest.raises(DomainError):
        TrotterPlan(0, 1.0, plan.order)
    with pytest.raises(DomainError):
        TrotterPlan(1, 1.0, (0, 0))


def test_trotter_step_matches_product_of_exponentials(rng):
    h = PauliTermSum([(0.4, "XZ"), (-0.7, "YY"), (0.2, "ZI"), (0.3, "II")])
    psi = random_state(HilbertLayout(2), rng)
    plan = TrotterPlan.for_hamiltonian(h, 0.9, 3)
    terms = h.without_identity().terms
    step = np.eye(4, dtype=complex)
    for k in plan.order:
        g, s = terms[k]
        step = expm(-1j * g * PauliTermSum([(1.0, s)]).to_matrix() * 0.3) @ step
    ref = np.exp(-0.3j * 0.9) * np.linalg.matrix_power(step, 3) @ psi.amplitudes
    for backend in ("ms", "direct"):
        out, circ = trotter_evolve(psi, h, plan, backend=backend)
        assert np.allclose(out.amplitudes, ref, atol=1e-12)
    assert circ.ms_count == 0
    _, circ = trotter_evolve(psi, h, plan)
    assert circ.ms_count == 2 * 2 * 3


def test_commuting_terms_are_exact(rng):
    h = PauliTermSum([(0.4, "ZZ"), (-0.7, "ZI"), (0.2, "IZ")])
    psi = random_state(HilbertLayout(2), rng)
    out, _ = trotter_evolve(psi, h, TrotterPlan.for_hamiltonian(h, 2.3, 1))
    assert np.allclose(out.amplitudes, expm(-2.3j * h.to_matrix()) @ psi.amplitudes)


def test_layout_and_backend_errors(h2_scaled, h2_hf):
    plan = TrotterPlan.for_hamiltonian(h2_scaled, 1.0, 1)
    with pytest.raises(LayoutError):
        trotter_evolve(basis_state(HilbertLayout(3), "000"), h2_scaled, plan)
    with pytest.raises(DomainError):
        trotter_evolve(h2_hf, h2_scaled, plan, backend="analog")


def test_h2_curves_match_golden(h2_scaled, h2_hf, golden_errors):
    t = [tt for tt, _ in golden_errors[1]]
    curves = digital_error_curve(h2_scaled, h2_hf, t, sorted(golden_errors))
    for n, rows in golden_errors.items():
        assert np.allclose(curves.curve(n), [e for _, e in rows], rtol=1e-7, atol=1e-9)


def test_h2_curve_properties(h2_scaled, h2_hf):
    t = np.linspace(0.0, 5.0, 101)
    curves = digital_error_curve(h2_scaled, h2_hf, t, (1, 2, 3), backend="direct")
    assert np.all(curves.errors >= 0)
    assert np.all(curves.errors[:, 0] == 0)
    assert np.all(curves.curve(1) >= curves.curve(2))
    assert np.all(curves.curve(2) >= curves.curve(3))


def convergence_slope(h, psi, t, ns=(1, 2, 4, 8)):
    curves = digital_error_curve(h, psi, [t], ns, backend="direct")
    return np.polyfit(np.log(ns), np.log(curves.errors[:, 0]), 1)[0]


def test_h2_convergence_slope(h2_scaled, h2_hf):
    assert -2.3 <= convergence_slope(h2_scaled, h2_hf, 1.0) <= -1.7


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_hamiltonian_slope(seed):
    rng = np.random.default_rng(seed)
    strings = set()
    while len(strings) < 6:
        strings.add("".join(rng.choice(list("IXYZ"), size=4)))
    strings.discard("IIII")
    h = PauliTermSum([(rng.uniform(0.2, 1.0) * rng.choice([-1, 1]), s) for s in strings])
    if h.commutes_pairwise():
        return
    psi = random_state(HilbertLayout(4), rng)
    assert -2.3 <= convergence_slope(h, psi, 0.1) <= -1.7


def test_energy_traces(h2_scaled, h2_hf):
    golden = json.loads((DATA / "h2_energy_golden.json").read_text())
    t = np.asarray(golden["t"])
    traces = {n: energy_trace(h2_scaled, h2_hf, t, n) for n in (1, 3)}
    assert np.ptp(traces[1].exact) < 1e-10
    for n, trace in traces.items():
        ref = golden["by_steps"][str(n)]
        assert np.allclose(trace.deviation, ref["deviation"], atol=1e-9)
        assert trace.max_deviation == pytest.approx(ref["max_deviation"], abs=1e-9)
    assert np.all(traces[3].deviation[1:] < traces[1].deviation[1:])


def test_gate_error_model():
    m = ErrorModel(1e-4)
    assert accumulated_gate_error(3, m) == pytest.approx(1 - (1 - 1e-4) ** 3, rel=1e-12)
    assert accumulated_gate_error(2, m, gates_per_step=16) == pytest.approx(1 - (1 - 1e-4) ** 32, rel=1e-12)
    assert linearized_gate_error(3, m) == pytest.approx(3e-4)
    assert accumulated_gate_error(5, ErrorModel(0.0)) == 0.0
    with pytest.raises(DomainError):
        ErrorModel(1.0)
    with pytest.raises(DomainError):
        accumulated_gate_error(0, m)


def test_crossing_time():
    t = np.array([0.0, 1.0, 2.0])
    assert crossing_time(t, [0.0, 0.5, 1.0], 0.25) == pytest.approx(0.5)
    assert crossing_time(t, [0.0, 0.1, 0.2], 0.5) is None
    assert crossing_time(t, [1.0, 0.1, 0.2], 0.5) == 0.0


def test_resources_for_eight_nonlocal_terms():
    assert (estimate_resources(8, 1).ms_gate_count, estimate_resources(8, 1).total_wall_time_us) == (16, 800.0)
    r3 = estimate_resources(8, 3)
    assert r3.ms_gate_count == 48
    assert r3.total_wall_time_us == 2400.0
    assert r3.within_budget
    assert not estimate_resources(8, 40).within_budget
    assert json.loads(r3.to_json())["total_wall_time_us"] == 2400.0
    with pytest.raises(DomainError):
        estimate_resources(8, 0)


def test_compiled_resources_match_census(h2_scaled):
    plan = TrotterPlan.for_hamiltonian(h2_scaled, 1.0, 2)
    est = estimate_hamiltonian_resources(h2_scaled, plan)
    assert est.ms_gate_count == 2 * 2 * term_census(h2_scaled)["nonlocal_count"]
    assert est.local_rotation_count > 0


def test_csv_writers(tmp_path, h2_scaled, h2_hf):
    t = np.linspace(0, 1, 3)
    curves = digital_error_curve(h2_scaled, h2_hf, t, (1, 2))
    write_error_csv(tmp_path / "e.csv", curves)
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert len(rows) == 3 * 2 * 3
    assert {r["epsilon"] for r in rows} == {"0.001", "0.0001", "1e-05"}
    write_energy_csv(tmp_path / "E.csv", {n: energy_trace(h2_scaled, h2_hf, t, n) for n in (1, 2)})
    header = open(tmp_path / "E.csv").readline().strip()
    assert header == "t,E_exact,E_n1,E_n2"


def test_single_point_zero_time(h2_scaled, h2_hf):
    curves = digital_error_curve(h2_scaled, h2_hf, [0.0], (1, 2, 3))
    assert np.all(curves.errors == 0.0)
    assert math.isclose(energy_trace(h2_scaled, h2_hf, [0.0], 1).max_deviation, 0.0)
