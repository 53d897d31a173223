"""Greedy rational interpolation of exp on rectangle boundaries, plus the
extended-precision partial-fraction refit that turns its poles into a
certified approximant.

Pole placement uses the adaptive Antoulas-Anderson scheme (Nakatsukasa,
Sete and Trefethen, 2018): support points are chosen greedily at the worst
sample, barycentric weights come from the smallest singular vector of the
Loewner matrix, and the poles are the finite generalized eigenvalues of the
barycentric arrowhead pencil. The continuum problem on the rectangle
boundary is approached by refining the discrete sample set, doubling its
density until the selected degree stabilizes.

The barycentric coefficients themselves are discarded: the final weights are
re-fitted by least squares on the basis {1} + {1/(pole_k - z)}, with the
residual accumulated in double-double arithmetic so the ill-conditioning of
the basis does not silently eat the last digits. The refit is certified a
posteriori by boundary sampling, and an approximant that cannot be certified
below its target is rejected rather than returned optimistically.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import DegreeExhausted, PoleInsideRegion, RefitFailed
from .rational import (
    CertifiedApproximant,
    PartialFractionRational,
    RegionBoundary,
    boundary_samples,
    classify_conjugate_poles,
    sup_error_on_rectangle,
    _pole_in_rectangle,
    _sup_on_samples,
)

__all__ = ["aaa_poles", "refit_partial_fractions"]

FROISSART_RTOL = 1e-13


# --------------------------------------------------------------------------
# double-double helpers (error-free transformations)
# --------------------------------------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1, Dekker splitting constant for float64


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _two_prod(a, b):
    p = a * b
    ca = _SPLITTER * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLITTER * b
    bh = cb - (cb - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


class _DDAccumulator:
    """Vector of double-double sums: hi + lo holds the running value."""

    def __init__(self, init: np.ndarray):
        self.hi = np.array(init, dtype=float)
        self.lo = np.zeros_like(self.hi)

    def add_product(self, a: np.ndarray, b, sign: float = 1.0):
        p, pe = _two_prod(a, sign * b)
        s, e = _two_sum(self.hi, p)
        self.hi = s
        self.lo = self.lo + (e + pe)

    def value(self) -> np.ndarray:
        return self.hi + self.lo


def _dd_residual(A: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """rhs - A @ x with products and sums carried in double-double."""
    re = _DDAccumulator(rhs.real)
    im = _DDAccumulator(rhs.imag)
    for k in range(A.shape[1]):
        ar, ai = A[:, k].real, A[:, k].imag
        xr, xi = float(x[k].real), float(x[k].imag)
        # subtract (ar + i*ai) * (xr + i*xi)
        re.add_product(ar, xr, -1.0)
        re.add_product(ai, xi, +1.0)
        im.add_product(ar, xi, -1.0)
        im.add_product(ai, xr, -1.0)
    return re.value() + 1j * im.value()


def _dd_residual_real(A: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Real-arithmetic variant of :func:`_dd_residual`."""
    acc = _DDAccumulator(rhs)
    for k in range(A.shape[1]):
        acc.add_product(A[:, k], float(x[k]), -1.0)
    return acc.value()


# --------------------------------------------------------------------------
# greedy barycentric interpolation
# --------------------------------------------------------------------------

def _barycentric_poles(support: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Finite generalized eigenvalues of the arrowhead pencil built from the
    # support points and barycentric weights; the two infinite eigenvalues
    # are discarded.
    m = support.size
    E = np.zeros((m + 1, m + 1), dtype=complex)
    E[0, 1:] = w
    E[1:, 0] = 1.0
    E[1:, 1:] = np.diag(support)
    B = np.eye(m + 1)
    B[0, 0] = 0.0
    eigs = sla.eigvals(E, B)
    return eigs[np.isfinite(eigs)]


def _conjugate_permutation(points: np.ndarray) -> np.ndarray | None:
    """Index map sending each point to its exact conjugate, or None if some
    conjugate is missing from the set."""
    lookup = {complex(p): i for i, p in enumerate(points)}
    perm = np.empty(points.size, dtype=int)
    for i, p in enumerate(points):
        j = lookup.get(complex(np.conj(p)))
        if j is None:
            return None
        perm[i] = j
    return perm


def _project_conjugate_weights(support: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Nearest conjugate-symmetric weight vector, phase-normalized first.

    A singular vector carries an arbitrary global phase; stripping half the
    phase of sum(w_i * w_perm(i)) aligns it so the symmetrization does not
    cancel the vector instead of cleaning it.
    """
    perm = _conjugate_permutation(support)
    if perm is None:
        return w
    t = np.sum(w * w[perm])
    if abs(t) > 0.0:
        w = w * np.exp(-0.5j * np.angle(t))
    w_sym = 0.5 * (w + np.conj(w[perm]))
    nrm = float(np.linalg.norm(w_sym))
    if nrm < 0.1 * float(np.linalg.norm(w)):
        return w  # not actually near-symmetric; keep the raw vector
    return w_sym / nrm


def _aaa_on_samples(Z: np.ndarray, F: np.ndarray, tol: float, max_poles: int,
                    symmetric: bool = False):
    """Greedy fit on a fixed sample set.

    Returns (poles, support, fsupp, weights, max_err). The number of poles
    is one less than the number of support points. Raises ``DegreeExhausted``
    when the cap is hit with the sample error still above ``tol``.

    With ``symmetric`` (sample set exactly closed under conjugation), support
    points are taken in conjugate pairs and the weight vector is projected
    onto conjugate symmetry, so the computed poles pair up to eigensolver
    roundoff.
    """
    n = Z.size
    conj_index = None
    if symmetric:
        conj_index = _conjugate_permutation(Z)
        symmetric = conj_index is not None
    mask = np.ones(n, dtype=bool)  # candidate (non-support) samples
    R = np.full(n, np.mean(F), dtype=complex)
    support = np.empty(0, dtype=complex)
    fsupp = np.empty(0, dtype=complex)
    w = np.empty(0, dtype=complex)
    err = float(np.max(np.abs(F - R)))
    if err <= tol:
        return np.empty(0, dtype=complex), support, fsupp, w, err
    while True:
        if not mask.any():
            break
        j = int(np.argmax(np.where(mask, np.abs(F - R), -np.inf)))
        new = [j]
        if symmetric:
            j2 = int(conj_index[j])
            if j2 != j and mask[j2]:
                new.append(j2)
        for idx in new:
            mask[idx] = False
            support = np.append(support, Z[idx])
            fsupp = np.append(fsupp, F[idx])
        if not mask.any():
            break
        diff = Z[mask, None] - support[None, :]
        loewner = (F[mask, None] - fsupp[None, :]) / diff
        _, _, Vh = np.linalg.svd(loewner, full_matrices=False)
        w = Vh[-1].conj()
        if symmetric:
            w = _project_conjugate_weights(support, w)
        num = (w * fsupp / diff).sum(axis=1)
        den = (w / diff).sum(axis=1)
        R = F.astype(complex).copy()
        R[mask] = num / den
        err = float(np.max(np.abs(F[mask] - R[mask]), initial=0.0))
        if err <= tol:
            break
        if support.size > max_poles:
            break
    if err > tol:
        raise DegreeExhausted(
            f"greedy interpolation reached {max_poles} poles with sample error "
            f"{err:.3e} > {tol:.3e}",
            context={"max_poles": int(max_poles), "sample_error": err},
        )
    return _barycentric_poles(support, w), support, fsupp, w, err


def _filter_poles(poles, support, w, fsupp, rect, fscale):
    """Drop spurious poles: anything inside the rectangle, and Froissart
    doublets whose barycentric residue is negligible."""
    if poles.size == 0:
        return poles
    keep = np.ones(poles.size, dtype=bool)
    inside = (
        (poles.real >= rect.mu_min)
        & (poles.real <= rect.mu_max)
        & (poles.imag >= rect.nu_min)
        & (poles.imag <= rect.nu_max)
    )
    keep &= ~inside
    diff = poles[:, None] - support[None, :]
    num = (w * fsupp / diff).sum(axis=1)
    dden = -(w / diff**2).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        residues = np.abs(num / dden)
    keep &= ~(residues < FROISSART_RTOL * fscale)
    return poles[keep]


def _symmetrize_poles(poles: np.ndarray, rect) -> np.ndarray:
    """Project a near-conjugate-closed pole set onto an exactly closed one.

    Conjugate near-pairs are averaged into exact pairs first; leftover lone
    poles hugging the real axis (eigensolver roundoff of a genuinely real
    pole, observed up to ~1e-8 relative) are snapped onto it. Only
    meaningful when the rectangle (hence the sample data) is symmetric about
    the real axis; otherwise the poles are returned unchanged.
    """
    if rect.nu_min != -rect.nu_max:
        return poles
    scale = 1.0 + np.max(np.abs(poles), initial=0.0)
    out: list[complex] = []
    pending = sorted(poles, key=lambda p: (p.real, abs(p.imag), p.imag))
    while pending:
        p = pending.pop(0)
        if p.imag == 0.0:
            out.append(p)
            continue
        best, best_dist = None, np.inf
        for q in pending:
            d = abs(q - np.conj(p))
            if d < best_dist:
                best, best_dist = q, d
        if best is not None and best_dist <= 1e-3 * scale:
            pending.remove(best)
            c = 0.5 * (p + np.conj(best))
            if c.imag < 0:
                c = np.conj(c)
            if c.imag == 0.0:
                out.extend([c, c])
            else:
                out.extend([c, np.conj(c)])
        elif abs(p.imag) <= 1e-6 * scale:
            out.append(complex(p.real, 0.0))
        else:
            out.append(p)
    arr = np.array(out, dtype=complex)
    return arr[np.lexsort((arr.imag, arr.real))]


def aaa_poles(
    boundary: RegionBoundary,
    target: float,
    m_max: int = 128,
    max_refinements: int = 4,
) -> np.ndarray:
    """Pole set for a rational approximant of exp on the boundary's rectangle.

    Runs the greedy barycentric fit with stopping tolerance ``target / 2``
    (the headroom is spent later by the refit), refining the boundary
    sampling by doubling until the selected denominator degree stabilizes
    between consecutive densities. Spurious poles are filtered before the
    set is returned; for rectangles symmetric about the real axis the
    result is exactly closed under conjugation.
    """
    if target <= 0.0:
        raise ValueError("target must be positive")
    rect = boundary.rectangle
    symmetric = rect.nu_min == -rect.nu_max
    tol = 0.5 * target
    prev_degree = None
    poles = np.empty(0, dtype=complex)
    n = boundary.n_per_side
    for _ in range(max_refinements + 1):
        b = boundary_samples(rect, n)
        Z = b.samples
        F = np.exp(Z)
        raw, support, fsupp, w, _ = _aaa_on_samples(Z, F, tol, m_max, symmetric=symmetric)
        fscale = float(np.max(np.abs(F)))
        poles = _filter_poles(raw, support, w, fsupp, rect, fscale)
        poles = _symmetrize_poles(poles, rect)
        if prev_degree is not None and poles.size == prev_degree:
            break
        prev_degree = poles.size
        n *= 2
    return poles


# --------------------------------------------------------------------------
# least-squares refit with extended-precision residual
# --------------------------------------------------------------------------

def _ls_basis(poles: np.ndarray, z: np.ndarray) -> np.ndarray:
    cols = [np.ones(z.size, dtype=complex)]
    for p in poles:
        cols.append(1.0 / (p - z))
    return np.column_stack(cols)


def _solve_refined(A: np.ndarray, rhs: np.ndarray, max_refinements: int) -> np.ndarray:
    """Minimum-norm least squares through a column-equilibrated SVD, then
    iterative refinement with the residual carried in double-double; the
    iterate with the smallest max-abs residual wins."""
    col_scale = np.linalg.norm(A, axis=0)
    col_scale[col_scale == 0.0] = 1.0
    As = A / col_scale
    U, sv, Vh = np.linalg.svd(As, full_matrices=False)
    rank_cut = sv > sv[0] * max(A.shape) * np.finfo(float).eps
    Uk = U[:, rank_cut]
    svk = sv[rank_cut]
    Vk = Vh[rank_cut].conj().T
    dd = _dd_residual if np.iscomplexobj(A) else _dd_residual_real

    def ls_apply(r):
        return (Vk @ ((Uk.conj().T @ r) / svk)) / col_scale

    x = ls_apply(rhs)
    best_x = x
    best_err = float(np.max(np.abs(A @ x - rhs)))
    for _ in range(max_refinements):
        r = dd(A, x, rhs)
        x = x + ls_apply(r)
        err = float(np.max(np.abs(A @ x - rhs)))
        if err < best_err:
            best_err, best_x = err, x
        else:
            break
    return best_x


def _symmetric_ls_columns(poles: np.ndarray, real_idx, pairs, z: np.ndarray):
    """Complex columns whose span over REAL coefficients is exactly the
    conjugate-symmetric partial fractions: constant, one column per real
    pole, and per conjugate pair the symmetric and antisymmetric combinations
    (so the pair weight u + iv is recovered from two real unknowns)."""
    cols = [np.ones(z.size, dtype=complex)]
    for i in real_idx:
        cols.append(1.0 / (poles[i] - z))
    for i, j in pairs:
        a = 1.0 / (poles[i] - z)
        b = 1.0 / (poles[j] - z)
        cols.append(a + b)
        cols.append(1j * (a - b))
    return np.column_stack(cols)


def _weights_from_real_solution(t: np.ndarray, n_poles: int, real_idx, pairs):
    gamma = complex(float(t[0]), 0.0)
    weights = np.zeros(n_poles, dtype=complex)
    for pos, i in enumerate(real_idx):
        weights[i] = complex(float(t[1 + pos]), 0.0)
    off = 1 + len(real_idx)
    for pidx, (i, j) in enumerate(pairs):
        u = float(t[off + 2 * pidx])
        v = float(t[off + 2 * pidx + 1])
        weights[i] = complex(u, v)
        weights[j] = complex(u, -v)
    return gamma, weights


def refit_partial_fractions(
    poles: np.ndarray,
    boundary: RegionBoundary,
    target: float,
    max_refinements: int = 4,
) -> CertifiedApproximant:
    """Least-squares weights for fixed poles, certified on the rectangle.

    Fits gamma + sum_k w_k / (poles[k] - z) to exp(z) over the boundary
    samples. The normal-equation-free solve goes through an SVD with column
    equilibration; iterative refinement with the residual accumulated in
    double-double arithmetic recovers the digits the ill-conditioned basis
    loses. The result is certified by re-sampling the boundary at twice the
    density; if the certified sup error exceeds ``target`` the fit is
    rejected with ``RefitFailed``.
    """
    poles = np.asarray(poles, dtype=complex)
    rect = boundary.rectangle
    if _pole_in_rectangle(poles, rect):
        raise PoleInsideRegion("a candidate pole lies inside or on the rectangle")
    z = boundary.samples
    if z.size < 2 * (poles.size + 1):
        raise ValueError(
            f"{z.size} samples cannot determine {poles.size + 1} coefficients safely"
        )
    rhs = np.exp(z)
    classified = classify_conjugate_poles(poles) if rect.nu_min == -rect.nu_max else None
    if classified is not None:
        # Real parametrization: conjugate closure of the weights is built into
        # the basis, so no lossy post-hoc averaging is needed.
        real_idx, pairs = classified
        C = _symmetric_ls_columns(poles, real_idx, pairs, z)
        t = _solve_refined(
            np.vstack([C.real, C.imag]),
            np.concatenate([rhs.real, rhs.imag]),
            max_refinements,
        )
        gamma, weights = _weights_from_real_solution(t, poles.size, real_idx, pairs)
    else:
        x = _solve_refined(_ls_basis(poles, z), rhs, max_refinements)
        gamma, weights = x[0], x[1:]
    pf = PartialFractionRational(gamma=gamma, poles=poles, weights=weights)
    achieved = sup_error_on_rectangle(pf, rect, n_per_side=2 * boundary.n_per_side)
    if achieved > target:
        raise RefitFailed(
            f"certified sup error {achieved:.3e} exceeds target {target:.3e}",
            context={"achieved": achieved, "target": float(target), "degree": int(poles.size)},
        )
    return CertifiedApproximant(
        form=pf,
        sup_error_estimate=achieved,
        target=float(target),
        method="rat-interp",
    )
