"""Shared fixtures: small meshes and assembled systems, cached per session.

The heavyweight acceptance fixtures (the four production-size systems) live
in test_acceptance.py; everything here is sized for sub-second construction.
"""
from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from expmrect import fem
from expmrect.bounds import Pencil


@pytest.fixture(scope="session")
def square_mesh_8():
    return fem.mesh_square(8)


@pytest.fixture(scope="session")
def square_sys_8(square_mesh_8):
    return fem.assemble_p1(square_mesh_8, d=0.1)


@pytest.fixture(scope="session")
def square_pencil_8(square_sys_8):
    s = square_sys_8
    return Pencil(s.mesh.h_bar, s.M, s.K)


@pytest.fixture(scope="session")
def star_mesh_2():
    return fem.mesh_star(refine=2)


def random_spd_sparse(n: int, rng: np.random.Generator, density: float = 0.05):
    """Random sparse SPD matrix: tridiagonal core plus a shifted Gram part."""
    A = sp.random(n, n, density=density, random_state=rng, format="csr")
    G = (A @ A.T).tocsr()
    diag = sp.diags_array(rng.uniform(1.0, 2.0, size=n)).tocsr()
    M = (G + diag).tocsr()
    return sp.csr_array(0.5 * (M + M.T))


def random_nonsym_sparse(n: int, rng: np.random.Generator, shift: float = 2.0,
                         density: float = 0.08):
    """Random sparse K with W(K) pushed into the left half plane."""
    A = sp.random(n, n, density=density, random_state=rng, format="csr")
    K = (A - shift * sp.eye_array(n)).tocsr()
    return sp.csr_array(K)


@pytest.fixture(scope="session")
def random_pencil_60():
    rng = np.random.default_rng(7)
    M = random_spd_sparse(60, rng)
    K = random_nonsym_sparse(60, rng)
    return Pencil(0.5, M, K)
