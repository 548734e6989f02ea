import numpy as np
import pytest

from trapchem.fermion import build_electronic_hamiltonian, hartree_fock_state, load_h2
from trapchem.hilbert import HilbertLayout


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def h2():
    return load_h2("0.75")


@pytest.fixture(scope="session")
def h2_hamiltonian(h2):
    return build_electronic_hamiltonian(h2)


@pytest.fixture(scope="session")
def h2_hf(h2):
    return hartree_fock_state(HilbertLayout(4), 2, 4)


@pytest.fixture(scope="session")
def h2_exact(h2_hamiltonian):
    """Dense eigenvalues and eigenvectors of the fixture Hamiltonian."""
    return np.linalg.eigh(h2_hamiltonian.to_matrix())
