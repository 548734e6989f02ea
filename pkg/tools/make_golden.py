"""Freeze dense-oracle reference values used by the test suite.

Digital errors and energy traces for the bundled H2 fixture (h11 units,
Hartree-Fock start) are computed with scipy.linalg.expm on explicit
Kronecker-product Pauli matrices, independent of the package's state kernels.

    PYTHONPATH=src python3 tools/make_golden.py
"""

import csv
import json
from functools import reduce

import numpy as np
from scipy.linalg import expm

from trapchem.fermion import build_electronic_hamiltonian, load_h2

PAULI = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]),
         "Z": np.diag([1, -1])}
T_GRID = np.linspace(0.0, 5.0, 21)
STEPS = (1, 2, 3, 4, 8)


def kron_string(s):
    return reduce(np.kron, [PAULI[c].astype(complex) for c in s])


def main():
    ints = load_h2("0.75")
    scale = 1.0 / abs(ints.one_body[0, 0])
    h = build_electronic_hamiltonian(ints) * scale
    terms = [(c, s) for c, s in h.terms if set(s) != {"I"}]
    terms.sort(key=lambda cs: -abs(cs[0]))  # descending |g|, stable
    g0 = h.identity_coefficient
    hm = sum(c * kron_string(s) for c, s in h.terms)
    psi0 = np.zeros(16, dtype=complex)
    psi0[int("1100", 2)] = 1.0
    rows = []
    energies = {}
    for n in STEPS:
        dev = []
        for t in T_GRID:
            exact = expm(-1j * hm * t) @ psi0
            step = reduce(lambda acc, cs: expm(-1j * cs[0] * kron_string(cs[1]) * t / n) @ acc,
                          terms, np.eye(16, dtype=complex))
            trot = np.exp(-1j * g0 * t) * (np.linalg.matrix_power(step, n) @ psi0)
            err = max(0.0, 1.0 - abs(np.vdot(exact, trot)) ** 2)
            rows.append((repr(float(t)), n, repr(float(err))))
            e_ex = np.vdot(exact, hm @ exact).real
            e_tr = np.vdot(trot, hm @ trot).real
            dev.append(abs(e_tr - e_ex))
        energies[str(n)] = {"max_deviation": float(max(dev)), "deviation": [float(x) for x in dev]}
    with open("tests/data/h2_digital_error_golden.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n", "digital_error"])
        w.writerows(rows)
    with open("tests/data/h2_energy_golden.json", "w") as fh:
        json.dump({"t": [float(t) for t in T_GRID], "energy_scale": scale, "by_steps": energies}, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
