"""Regenerate the bundled H2/STO-3G integral files.

Needs PySCF, which is not a package dependency:

    pip install pyscf
    python tools/make_h2_fixture.py
"""

from pathlib import Path

import numpy as np
from pyscf import __version__ as pyscf_version
from pyscf import ao2mo, gto, scf

from trapchem.fermion import MolecularIntegrals, save_integrals

OUT = Path(__file__).resolve().parents[1] / "src" / "trapchem" / "data"


def spin_orbital_integrals(bond: float) -> MolecularIntegrals:
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {bond}", basis="sto-3g", unit="Angstrom")
    mf = scf.RHF(mol).run(verbose=0)
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), c.shape[1])  # chemists' (ij|kl)
    m = 2 * h1.shape[0]
    h = np.zeros((m, m))
    g = np.zeros((m,) * 4)
    for p in range(m):
        for q in range(m):
            if p % 2 == q % 2:
                h[p, q] = h1[p // 2, q // 2]
    for p, q, r, s in np.ndindex(*g.shape):
        if p % 2 == s % 2 and q % 2 == r % 2:
            g[p, q, r, s] = eri[p // 2, s // 2, q // 2, r // 2]
    return MolecularIntegrals(m, 2, h, g, mol.energy_nuc(), f"{bond:.2f} Angstrom")


if __name__ == "__main__":
    for bond in (0.60, 0.75, 0.90, 1.00):
        ints = spin_orbital_integrals(bond)
        note = (f"H2 / STO-3G, bond length {bond:.2f} Angstrom, RHF molecular orbitals\n"
                f"generated with PySCF {pyscf_version}; energies in Hartree\n"
                "spin-orbitals interleaved (1a, 1b, 2a, 2b)")
        save_integrals(ints, OUT / f"h2_sto3g_{bond:.2f}.txt", comment=note, tol=1e-12)
