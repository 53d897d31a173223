"""Pencil rectangles, generalized extreme eigenvalues, condition estimates.

Dense eigendecompositions computed directly in the tests serve as oracles
for the module's dense and Lanczos paths alike.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from expmrect import fem
from expmrect.bounds import (
    BoundingRectangle,
    CondEstimate,
    Pencil,
    bounding_rectangle,
    cond_estimate,
    extreme_eig_skew_pencil,
    extreme_eigs_sym_pencil,
    is_lhp_certified,
    raw_extremes,
    rectangle_from_extremes,
    split,
)
from expmrect.errors import DimensionMismatch, NotSPD, NotSymmetric

from conftest import random_nonsym_sparse, random_spd_sparse


# --------------------------------------------------------------------------
# symmetric/skew splitting
# --------------------------------------------------------------------------

@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_split_reassembles_exactly(n, seed):
    rng = np.random.default_rng(seed)
    K = sp.csr_array(rng.standard_normal((n, n)))
    parts = split(K)
    D, S = parts.D.toarray(), parts.S.toarray()
    assert np.array_equal(D, D.T)
    assert np.array_equal(S, -S.T)
    # D + S reproduces K up to one rounding of each entry's halving
    assert np.allclose(D + S, K.toarray(), rtol=0.0, atol=2 * np.finfo(float).eps)


# --------------------------------------------------------------------------
# generalized extreme eigenvalues
# --------------------------------------------------------------------------

def _dense_pencil_extremes(B, M):
    L = np.linalg.cholesky(M.toarray())
    T = np.linalg.solve(L, np.linalg.solve(L, B.toarray()).T).T
    w = np.linalg.eigvalsh(0.5 * (T + T.T))
    return float(w[0]), float(w[-1])


def test_sym_pencil_dense_matches_oracle(random_pencil_60):
    p = random_pencil_60
    D = split(p.K).D
    lo, hi = _dense_pencil_extremes(D, p.M)
    got_lo, r0 = extreme_eigs_sym_pencil(D, p.M, "min")
    got_hi, r1 = extreme_eigs_sym_pencil(D, p.M, "max")
    assert math.isclose(got_lo, lo, rel_tol=1e-12)
    assert math.isclose(got_hi, hi, rel_tol=1e-12)
    assert r0 < 1e-12 and r1 < 1e-12


@pytest.mark.parametrize("which,tol,agree", [("min", 1e-3, 1e-3), ("max", 1e-3, 1e-3),
                                             ("min", 1e-6, 1e-6), ("max", 1e-6, 1e-6)])
def test_sym_pencil_lanczos_agrees_with_dense(which, tol, agree):
    rng = np.random.default_rng(3)
    M = random_spd_sparse(150, rng)
    D = split(random_nonsym_sparse(150, rng)).D
    dense, _ = extreme_eigs_sym_pencil(D, M, which)
    lanczos, resid = extreme_eigs_sym_pencil(D, M, which, rel_resid_tol=tol, dense_cutoff=0)
    assert resid <= tol
    assert abs(lanczos - dense) <= agree * abs(dense)


def test_skew_pencil_dense_matches_oracle(random_pencil_60):
    p = random_pencil_60
    S = split(p.K).S
    L = np.linalg.cholesky(p.M.toarray())
    C = np.linalg.solve(L, np.linalg.solve(L, S.toarray()).T).T / 1j
    w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    want = float(w[-1])
    got, resid = extreme_eig_skew_pencil(S, p.M)
    assert math.isclose(got, want, rel_tol=1e-11)
    assert resid < 1e-10


def test_skew_pencil_lanczos_agrees_with_dense():
    rng = np.random.default_rng(11)
    M = random_spd_sparse(150, rng)
    S = split(random_nonsym_sparse(150, rng)).S
    dense, _ = extreme_eig_skew_pencil(S, M)
    lanczos, resid = extreme_eig_skew_pencil(S, M, rel_resid_tol=1e-3, dense_cutoff=0)
    assert resid <= 1e-3
    assert abs(lanczos - dense) <= 1e-3 * abs(dense)


def test_sym_pencil_validates_inputs(random_pencil_60):
    D = split(random_pencil_60.K).D
    with pytest.raises(ValueError):
        extreme_eigs_sym_pencil(D, random_pencil_60.M, "middle")
    small = sp.eye_array(3).tocsr()
    with pytest.raises(DimensionMismatch):
        extreme_eigs_sym_pencil(D, small)


# --------------------------------------------------------------------------
# rectangles
# --------------------------------------------------------------------------

def test_rectangle_validation_and_accessors():
    with pytest.raises(ValueError):
        BoundingRectangle(mu_min=0.0, mu_max=-1.0, nu_min=0.0, nu_max=0.0)
    r = BoundingRectangle(mu_min=-2.0, mu_max=-1.0, nu_min=-3.0, nu_max=3.0)
    assert r.width == 1.0 and r.height == 6.0
    assert r.contains(-1.5 + 2.9j)
    assert not r.contains(-0.99)
    assert r.contains(-0.99, margin=0.02)


def test_rectangle_tau_linearity_without_inflation(square_sys_8):
    s = square_sys_8
    ext = raw_extremes(s.M, s.K)
    r1 = rectangle_from_extremes(ext, 1.0, inflate=False)
    r3 = rectangle_from_extremes(ext, 3.0, inflate=False)
    assert r3.mu_min == 3.0 * r1.mu_min
    assert r3.mu_max == 3.0 * r1.mu_max
    assert r3.nu_max == 3.0 * r1.nu_max
    assert r1.nu_min == -r1.nu_max


def test_rectangle_inflation_widens_every_endpoint(square_pencil_8):
    tight = bounding_rectangle(square_pencil_8, inflate=False)
    wide = bounding_rectangle(square_pencil_8)
    assert wide.mu_min < tight.mu_min <= tight.mu_max < wide.mu_max
    assert wide.nu_max > tight.nu_max
    assert wide.inflation == 2e-3


def test_rectangle_contains_dense_spectrum(square_pencil_8):
    p = square_pencil_8
    rect = bounding_rectangle(p)
    A = p.tau * np.linalg.solve(p.M.toarray(), p.K.toarray())
    for lam in np.linalg.eigvals(A):
        assert rect.contains(complex(lam))


def test_rectangle_contains_transformed_rayleigh_quotients(square_pencil_8):
    p = square_pencil_8
    rect = bounding_rectangle(p)
    L = np.linalg.cholesky(p.M.toarray())
    A_hat = p.tau * np.linalg.solve(L, np.linalg.solve(L, p.K.toarray()).T).T
    rng = np.random.default_rng(0)
    n = A_hat.shape[0]
    Z = rng.standard_normal((n, 200)) + 1j * rng.standard_normal((n, 200))
    quot = np.einsum("ij,ij->j", Z.conj(), A_hat @ Z) / np.einsum("ij,ij->j", Z.conj(), Z)
    for q in quot:
        assert rect.contains(complex(q))


def test_advection_diffusion_rectangle_is_lhp(square_pencil_8):
    rect = bounding_rectangle(square_pencil_8)
    assert is_lhp_certified(rect)
    assert not is_lhp_certified(
        BoundingRectangle(mu_min=-1.0, mu_max=0.1, nu_min=0.0, nu_max=0.0)
    )


# --------------------------------------------------------------------------
# condition estimate
# --------------------------------------------------------------------------

def test_cond_estimate_dense_matches_eigvalsh(square_sys_8):
    M = square_sys_8.M
    w = np.linalg.eigvalsh(M.toarray())
    est = cond_estimate(M)
    assert math.isclose(est.kappa_tilde, w[-1] / w[0], rel_tol=1e-12)
    assert est.delta == 0.0
    assert est.kappa_safe == est.kappa_tilde


def test_cond_estimate_iterative_margin(square_sys_8):
    M = square_sys_8.M
    exact = cond_estimate(M).kappa_tilde
    est = cond_estimate(M, dense_cutoff=0)
    assert est.delta == 0.05
    assert est.kappa_safe == est.kappa_tilde / 0.95
    assert abs(est.kappa_tilde - exact) <= 1e-2 * exact


def test_cond_estimate_rejects_indefinite():
    bad = sp.csr_array(sp.diags_array([1.0, -1.0, 2.0]))
    with pytest.raises(NotSPD):
        cond_estimate(bad)


def test_cond_estimate_validation():
    with pytest.raises(ValueError):
        CondEstimate(kappa_tilde=0.5, delta=0.0, kappa_safe=0.5)
    with pytest.raises(ValueError):
        CondEstimate(kappa_tilde=2.0, delta=0.0, kappa_safe=1.5)


# --------------------------------------------------------------------------
# pencil container
# --------------------------------------------------------------------------

def test_pencil_validation(square_sys_8):
    M, K = square_sys_8.M, square_sys_8.K
    with pytest.raises(ValueError):
        Pencil(0.0, M, K)
    with pytest.raises(NotSymmetric):
        Pencil(1.0, sp.csr_array(K), K)  # K is not symmetric
    with pytest.raises(DimensionMismatch):
        Pencil(1.0, M, sp.eye_array(3).tocsr())


def test_pencil_records_size(square_pencil_8):
    assert square_pencil_8.n == square_pencil_8.M.shape[0] == 49
