"""Scalar rational approximation of exp on axis-aligned rectangles.

Two approximant families are built here. The first is the subdiagonal (4,5)
Pade approximant of exp in the scaled form (r(z/s))**s, whose closed-form
coefficients make it cheap to certify. The second, fitted by greedy
interpolation and refitting (see :mod:`expmrect.aaa`), shares the partial
fraction representation

    r(z) = gamma + sum_k weights[k] / (poles[k] - z),

which is the form the matrix driver can apply through shifted linear solves.

Accuracy claims are certified by sampling |r(z) - exp(z)| on the boundary of
the rectangle: the error function is analytic inside whenever no pole lies in
the rectangle, so by the maximum principle the boundary sup bounds the
interior sup. Sampling is Chebyshev-clustered toward the corners and the
observed maximum is inflated by a safety factor to account for the finite
sample density.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    PoleEvaluation,
    PoleInsideRegion,
    RepeatedRoots,
    ScalingExhausted,
)

__all__ = [
    "PadeRational",
    "PartialFractionRational",
    "RegionBoundary",
    "CertifiedApproximant",
    "pade45",
    "pade_to_partial_fractions",
    "boundary_samples",
    "sup_error_on_rectangle",
    "select_scaling",
    "eval_rational",
]

DEFAULT_SAMPLES_PER_SIDE = 500
SAMPLING_SAFETY = 1.1


# --------------------------------------------------------------------------
# subdiagonal (4, 5) Pade approximant of exp
# --------------------------------------------------------------------------

def _pade45_coefficients() -> tuple[np.ndarray, np.ndarray]:
    # Closed form for the (4,5) Pade approximant of exp: numerator degree 4,
    # denominator degree 5, coefficients in ascending order.
    p = [
        factorial(9 - j) * factorial(4) / (factorial(9) * factorial(j) * factorial(4 - j))
        for j in range(5)
    ]
    q = [
        (-1) ** j
        * factorial(9 - j)
        * factorial(5)
        / (factorial(9) * factorial(j) * factorial(5 - j))
        for j in range(6)
    ]
    return np.array(p), np.array(q)


@dataclass(frozen=True)
class PadeRational:
    """The (4,5) Pade approximant of exp, optionally scaled-and-powered.

    Represents r(z) = (p(z/s)/q(z/s))**s with ``scaling`` = s >= 1. The
    coefficient arrays are ascending-order polynomial coefficients with
    p(0) = q(0) = 1.
    """

    num: np.ndarray
    den: np.ndarray
    scaling: int = 1

    def __post_init__(self):
        if self.scaling < 1:
            raise ValueError("scaling must be a positive integer")
        if not (self.num[0] == 1.0 and self.den[0] == 1.0):
            raise ValueError("Pade coefficients must be normalized with p(0)=q(0)=1")


def pade45(scaling: int = 1) -> PadeRational:
    """Construct the (4,5) Pade approximant of exp with the given scaling."""
    p, q = _pade45_coefficients()
    return PadeRational(num=p, den=q, scaling=int(scaling))


# --------------------------------------------------------------------------
# partial fraction form
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialFractionRational:
    """gamma + sum_k weights[k] / (poles[k] - z), the solver-ready form."""

    gamma: complex
    poles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        poles = np.atleast_1d(np.asarray(self.poles, dtype=complex))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=complex))
        if poles.shape != weights.shape:
            raise ValueError("poles and weights must have matching shapes")
        if poles.size and not np.all(np.isfinite(poles) & np.isfinite(weights)):
            raise ValueError("poles and weights must be finite")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "weights", weights)

    @property
    def degree(self) -> int:
        return int(self.poles.size)

    def is_conjugate_closed(self, rtol: float = 1e-8) -> bool:
        """True when the pole/weight set is closed under conjugation."""
        scale = 1.0 + np.max(np.abs(self.poles), initial=0.0)
        remaining = list(range(self.degree))
        while remaining:
            i = remaining.pop()
            p, w = self.poles[i], self.weights[i]
            if abs(p.imag) <= rtol * scale:
                continue
            match = None
            for j in remaining:
                if abs(self.poles[j] - np.conj(p)) <= rtol * scale and abs(
                    self.weights[j] - np.conj(w)
                ) <= rtol * (1.0 + abs(w)):
                    match = j
                    break
            if match is None:
                return False
            remaining.remove(match)
        return True


def classify_conjugate_poles(poles: np.ndarray):
    """Split an exactly conjugate-closed pole set into real poles and
    (upper, lower) index pairs.

    Returns (real_indices, pairs) or None when some pole has no exact
    partner. Exactness is deliberate: downstream consumers (the symmetric
    least-squares basis, the one-solve-per-pair application) rely on the
    pairing being a structural fact, not a numerical coincidence.
    """
    real_idx = [i for i, p in enumerate(poles) if p.imag == 0.0]
    unpaired = {i: complex(p) for i, p in enumerate(poles) if p.imag != 0.0}
    pairs: list[tuple[int, int]] = []
    while unpaired:
        i, p = next(iter(unpaired.items()))
        del unpaired[i]
        match = None
        for j, q in unpaired.items():
            if q == np.conj(p):
                match = j
                break
        if match is None:
            return None
        del unpaired[match]
        pairs.append((i, match) if p.imag > 0.0 else (match, i))
    return real_idx, pairs


def pade_to_partial_fractions(pade: PadeRational) -> PartialFractionRational:
    """Partial fraction form of the unscaled (4,5) core rational p/q.

    The denominator roots of the subdiagonal approximant are simple (one
    real, two conjugate pairs, all with positive real part); the caller is
    responsible for applying any outer scaling-and-powering. Raises
    ``RepeatedRoots`` if two roots coincide to within 1e-8.
    """
    roots = np.roots(pade.den[::-1])
    if roots.size > 1:
        dists = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(dists, np.inf)
        if dists.min() < 1e-8:
            raise RepeatedRoots("denominator roots closer than 1e-8")
    dq = npoly.polyder(pade.den)
    weights = -npoly.polyval(roots, pade.num) / npoly.polyval(roots, dq)
    order = np.lexsort((roots.imag, roots.real))
    return PartialFractionRational(gamma=0.0, poles=roots[order], weights=weights[order])


# --------------------------------------------------------------------------
# rectangle boundary sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionBoundary:
    """Boundary samples of a rectangle, corner-clustered, conjugate-symmetric
    whenever the rectangle is symmetric about the real axis."""

    rectangle: "object"  # BoundingRectangle (kept loose to avoid an import cycle)
    samples: np.ndarray
    n_per_side: int


def _lobatto(a: float, b: float, n: int) -> np.ndarray:
    # Chebyshev-Lobatto points on [a, b], endpoints included, clustered at
    # both ends. Returned in increasing order.
    if n <= 1 or a == b:
        return np.array([0.5 * (a + b)])
    theta = np.pi * np.arange(n) / (n - 1)
    return 0.5 * (a + b) + 0.5 * (b - a) * np.cos(theta)[::-1]


def boundary_samples(rect, n_per_side: int = DEFAULT_SAMPLES_PER_SIDE) -> RegionBoundary:
    """Sample the boundary of a rectangle for sup-norm estimation.

    Degenerate rectangles are handled: a horizontal or vertical segment is
    sampled along its length, a point yields a single sample. Corners appear
    exactly once.
    """
    mu0, mu1 = rect.mu_min, rect.mu_max
    nu0, nu1 = rect.nu_min, rect.nu_max
    flat_h = mu1 <= mu0
    flat_v = nu1 <= nu0
    if flat_h and flat_v:
        pts = np.array([complex(mu0, nu0)])
    elif flat_v:
        pts = _lobatto(mu0, mu1, 2 * n_per_side) + 1j * nu0
    elif flat_h:
        pts = mu0 + 1j * _lobatto(nu0, nu1, 2 * n_per_side)
    else:
        xs = _lobatto(mu0, mu1, n_per_side)
        ys = _lobatto(nu0, nu1, n_per_side)
        if nu0 == -nu1:
            # make the vertical samples exactly antisymmetric so the whole
            # sample set is exactly closed under conjugation
            ys = 0.5 * (ys - ys[::-1])
        bottom = xs + 1j * nu0
        top = xs + 1j * nu1
        left = mu0 + 1j * ys[1:-1]
        right = mu1 + 1j * ys[1:-1]
        pts = np.concatenate([bottom, top, left, right])
    return RegionBoundary(rectangle=rect, samples=pts, n_per_side=int(n_per_side))


# --------------------------------------------------------------------------
# evaluation and certification
# --------------------------------------------------------------------------

def _effective_poles(r) -> np.ndarray:
    if isinstance(r, PadeRational):
        base = np.roots(r.den[::-1])
        return r.scaling * base
    if isinstance(r, PartialFractionRational):
        return r.poles
    if isinstance(r, CertifiedApproximant):
        return r.scaling * r.form.poles
    raise TypeError(f"not a rational form: {type(r)!r}")


def _eval_pf(pf: PartialFractionRational, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if pf.poles.size:
        diff = pf.poles[None, ...] - z[..., None]
        small = np.abs(diff) < 1e-15 * (1.0 + np.abs(pf.poles)[None, ...])
        if np.any(small):
            raise PoleEvaluation("evaluation point coincides with a pole")
        vals = pf.gamma + (pf.weights[None, ...] / diff).sum(axis=-1)
    else:
        vals = np.full(z.shape, pf.gamma, dtype=complex)
    return vals


def eval_rational(r, z):
    """Evaluate a rational form at scalar or array argument z.

    ``PadeRational`` with scaling s is evaluated as (p(z/s)/q(z/s))**s via
    the stable polynomial ratio; ``PartialFractionRational`` by direct pole
    summation; ``CertifiedApproximant`` through its stored form and scaling.
    """
    scalar = np.isscalar(z) or np.asarray(z).ndim == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if isinstance(r, PadeRational):
        w = zz / r.scaling
        den = npoly.polyval(w, r.den)
        if np.any(np.abs(den) == 0.0):
            raise PoleEvaluation("evaluation point coincides with a pole")
        vals = (npoly.polyval(w, r.num) / den) ** r.scaling
    elif isinstance(r, PartialFractionRational):
        vals = _eval_pf(r, zz)
    elif isinstance(r, CertifiedApproximant):
        vals = _eval_pf(r.form, zz / r.scaling) ** r.scaling
    else:
        raise TypeError(f"not a rational form: {type(r)!r}")
    return vals[0] if scalar else vals


def _pole_in_rectangle(poles: np.ndarray, rect) -> bool:
    if poles.size == 0:
        return False
    inside = (
        (poles.real >= rect.mu_min)
        & (poles.real <= rect.mu_max)
        & (poles.imag >= rect.nu_min)
        & (poles.imag <= rect.nu_max)
    )
    return bool(np.any(inside))


def sup_error_on_rectangle(
    r,
    rect,
    n_per_side: int = DEFAULT_SAMPLES_PER_SIDE,
    safety: float = SAMPLING_SAFETY,
) -> float:
    """Estimate sup over the rectangle of |r(z) - exp(z)| from the boundary.

    Requires that no pole of ``r`` lies inside or on the rectangle, so the
    maximum principle applies and boundary sampling is sound; otherwise
    ``PoleInsideRegion`` is raised. The sampled maximum is multiplied by the
    ``safety`` factor to cover the gaps between samples.
    """
    if _pole_in_rectangle(_effective_poles(r), rect):
        raise PoleInsideRegion("a pole lies inside or on the rectangle")
    boundary = boundary_samples(rect, n_per_side)
    return _sup_on_samples(r, boundary.samples, safety)


def _sup_on_samples(r, samples: np.ndarray, safety: float = SAMPLING_SAFETY) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        err = np.abs(eval_rational(r, samples) - np.exp(samples))
    worst = float(np.max(err))
    return safety * worst


def select_scaling(
    rect,
    target: float,
    s_max: int = 64,
    n_per_side: int = DEFAULT_SAMPLES_PER_SIDE,
) -> int:
    """Smallest scaling s <= s_max with certified Pade error below target.

    Scans s = 1, 2, ... and returns the first s whose boundary-certified
    sup-error of (r45(z/s))**s on the rectangle is at most ``target``.
    Scalings whose scaled poles would enter the rectangle are skipped (the
    approximant is unusable there). Raises ``ScalingExhausted`` when no
    admissible s exists up to the cap.
    """
    if target <= 0.0:
        raise ValueError("target must be positive")
    boundary = boundary_samples(rect, n_per_side)
    for s in range(1, int(s_max) + 1):
        cand = pade45(scaling=s)
        if _pole_in_rectangle(_effective_poles(cand), rect):
            continue
        if _sup_on_samples(cand, boundary.samples) <= target:
            return s
    raise ScalingExhausted(
        f"no scaling up to {s_max} meets target {target:.3e} on {rect}",
        context={"s_max": int(s_max), "target": float(target)},
    )


# --------------------------------------------------------------------------
# certified approximant
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CertifiedApproximant:
    """A partial fraction rational with a boundary-certified sup error.

    For the scaled Pade method the represented function is
    (form(z/scaling))**scaling and ``form`` holds the degree-5 core; for the
    interpolation method ``scaling`` is 1 and ``form`` is the fitted
    rational itself. ``sup_error_estimate`` is the certified bound on
    |r - exp| over the rectangle the approximant was built for, and never
    exceeds ``target``.
    """

    form: PartialFractionRational
    sup_error_estimate: float
    target: float
    method: str
    scaling: int = 1

    def __post_init__(self):
        if self.sup_error_estimate > self.target:
            raise ValueError("certified sup error exceeds the stated target")
        if self.scaling < 1:
            raise ValueError("scaling must be a positive integer")
        if self.method not in ("sub-pade", "rat-interp"):
            raise ValueError(f"unknown method tag {self.method!r}")

    @property
    def degree(self) -> int:
        return self.scaling * self.form.degree

    def to_json(self) -> str:
        payload = {
            "schema": "expmrect/approximant-v1",
            "method": self.method,
            "scaling": self.scaling,
            "sup_error_estimate": self.sup_error_estimate,
            "target": self.target,
            "gamma": [self.form.gamma.real, self.form.gamma.imag],
            "poles": [[p.real, p.imag] for p in self.form.poles],
            "weights": [[w.real, w.imag] for w in self.form.weights],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CertifiedApproximant":
        d = json.loads(text)
        if d.get("schema") != "expmrect/approximant-v1":
            raise ValueError(f"unknown schema {d.get('schema')!r}")
        form = PartialFractionRational(
            gamma=complex(*d["gamma"]),
            poles=np.array([complex(*p) for p in d["poles"]], dtype=complex),
            weights=np.array([complex(*w) for w in d["weights"]], dtype=complex),
        )
        return cls(
            form=form,
            sup_error_estimate=float(d["sup_error_estimate"]),
            target=float(d["target"]),
            method=str(d["method"]),
            scaling=int(d["scaling"]),
        )
