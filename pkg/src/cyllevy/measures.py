"""Jump-measure representations and stable-law constants.

Source-side representations (living on the ``d_G`` truncation) parameterize the
jump part of cylindrical characteristics:

* :class:`AtomicJumps` — finitely many atoms with positive rates,
* :class:`DiagonalStableJumps` — independent symmetric stable coordinates,
* :class:`CanonicalStableJumps` — the rotation-invariant stable family with
  exponent ``exp(-t * norm(g)**alpha)``,
* :class:`NoJumps`.

Target-side representations describe the jump measure of a genuine process
obtained by mapping through a Hilbert–Schmidt map: atomic measures map exactly,
stable measures stay in closed form (:class:`PushedStable`,
:class:`PushedDiagonalStable`), and :class:`SampledJumps` holds an
importance-weighted point cloud for tail integrals when no closed form applies.

All stable integrals reduce to the constant

    K(alpha) = integral_0^inf (1 - cos u) / u^(1+alpha) du
             = Gamma(2-alpha) * cos(pi*alpha/2) / (alpha*(1-alpha)),

with the limiting value pi/2 at alpha = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as _integrate
from scipy.special import gamma as _gamma

__all__ = [
    "AtomicJumps",
    "DiagonalStableJumps",
    "CanonicalStableJumps",
    "NoJumps",
    "PushedStable",
    "PushedDiagonalStable",
    "SampledJumps",
    "UnsupportedMeasureError",
    "cosine_tail_constant",
    "energy_coefficient",
    "tail_coefficient",
    "gaussian_abs_moment",
    "gaussian_quadratic_moment",
]


class UnsupportedMeasureError(TypeError):
    """An operation was asked of a representation that cannot provide it."""


def _check_alpha(alpha: float) -> float:
    a = float(alpha)
    if not (0.0 < a < 2.0):
        raise ValueError(f"stability index must lie in (0, 2), got {a}")
    return a


@lru_cache(maxsize=None)
def cosine_tail_constant(alpha: float) -> float:
    """K(alpha) = int_0^inf (1-cos u) u^(-1-alpha) du."""
    a = _check_alpha(alpha)
    if abs(a - 1.0) < 1e-12:
        return float(np.pi / 2.0)
    return float(_gamma(2.0 - a) * np.cos(np.pi * a / 2.0) / (a * (1.0 - a)))


def energy_coefficient(alpha: float) -> float:
    """Clipped second moment of the unit-scale 1-d measure: (1/(2-a) + 1/a) / K(a)."""
    a = _check_alpha(alpha)
    return (1.0 / (2.0 - a) + 1.0 / a) / cosine_tail_constant(a)


def tail_coefficient(alpha: float) -> float:
    """Mass beyond the unit ball of the unit-scale 1-d measure: 1 / (a * K(a))."""
    a = _check_alpha(alpha)
    return 1.0 / (a * cosine_tail_constant(a))


def gaussian_abs_moment(alpha: float) -> float:
    """E|Z|**alpha for standard normal Z."""
    a = float(alpha)
    return float(2.0 ** (a / 2.0) * _gamma((1.0 + a) / 2.0) / np.sqrt(np.pi))


def gaussian_quadratic_moment(eigenvalues: np.ndarray, alpha: float) -> float:
    """E[(Z^T M Z)^(alpha/2)] for Z standard normal and PSD M with the given spectrum.

    Uses the fractional-moment identity
    ``E[Y^b] = b/Gamma(1-b) * int_0^inf s^(-1-b) (1 - E[e^(-sY)]) ds`` with the
    exact Laplace transform of the Gaussian quadratic form, evaluated on a log
    grid so the integrand is an exponentially decaying bump.
    """
    a = _check_alpha(alpha)
    mu = np.asarray(eigenvalues, dtype=float)
    mu = mu[mu > 1e-300]
    if mu.size == 0:
        return 0.0
    b = a / 2.0
    # normalising by the top eigenvalue keeps the integrand O(1)-scaled and
    # makes the overall scale factor exact rather than resolved by quadrature
    scale = float(np.max(mu))
    mu_n = mu / scale
    mu_sum = float(np.sum(mu_n))
    y_lo, y_hi = -60.0, 60.0

    def integrand(y):
        s = np.exp(y)
        # 1 - prod (1+2 s mu)^(-1/2), computed cancellation-free
        one_minus_lap = -np.expm1(-0.5 * np.sum(np.log1p(2.0 * s * mu_n)))
        return np.exp(-b * y) * one_minus_lap

    # each eigenvalue contributes a shoulder near 2 s mu_i ~ 1; telling the
    # quadrature where they sit keeps the wide log-window accurate
    pts = sorted({float(np.clip(-np.log(2.0 * m), y_lo + 1.0, y_hi - 1.0)) for m in mu_n})
    val, _err = _integrate.quad(
        integrand, y_lo, y_hi, points=pts, limit=800, epsabs=1e-13, epsrel=1e-12
    )
    # analytic tails of the log-grid integral: below y_lo the integrand is
    # s * sum(mu) * e^(-b y) to leading order, above y_hi it is e^(-b y)
    tail_lo = mu_sum * np.exp((1.0 - b) * y_lo) / (1.0 - b)
    tail_hi = np.exp(-b * y_hi) / b
    return float(scale**b * b / _gamma(1.0 - b) * (val + tail_lo + tail_hi))


def _stable_direction_ratio(phi_matrix: np.ndarray, alpha: float) -> float:
    """E[norm(Phi U)^alpha] / E[|U_1|^alpha] over the uniform sphere.

    Computed through Gaussian moments: both numerator and denominator pick up
    the same radial factor, so the ratio equals
    ``E[norm(Phi Z)^alpha] / E[|Z_1|^alpha]``.
    """
    m = np.asarray(phi_matrix, dtype=float)
    sing_sq = np.linalg.svd(m, compute_uv=False) ** 2
    return gaussian_quadratic_moment(sing_sq, alpha) / gaussian_abs_moment(alpha)


# ---------------------------------------------------------------------------
# source-side representations


@dataclass(frozen=True)
class AtomicJumps:
    """Finitely many atoms ``h_j`` with rates ``r_j > 0``.

    Doubles as the target-side representation of a mapped atomic measure (the
    atoms are simply the mapped atoms).
    """

    atoms: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if atoms.shape[0] != rates.shape[0]:
            raise ValueError("need one rate per atom")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(rates)):
            raise ValueError("non-finite atom or rate")
        if np.any(rates <= 0):
            raise ValueError("rates must be positive")
        atoms = atoms.copy()
        atoms.setflags(write=False)
        rates = rates.copy()
        rates.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "rates", rates)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def total_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def is_symmetric(self) -> bool:
        """True when the atom multiset is closed under negation with equal rates."""
        items = sorted(
            (tuple(np.round(a, 12)), float(r)) for a, r in zip(self.atoms, self.rates)
        )
        negated = sorted(
            (tuple(np.round(-a, 12)), float(r)) for a, r in zip(self.atoms, self.rates)
        )
        return items == negated

    def mapped(self, matrix: np.ndarray) -> "AtomicJumps":
        return AtomicJumps(self.atoms @ np.asarray(matrix, dtype=float).T, self.rates)

    def clipped_second_moment(self) -> float:
        sq = np.sum(self.atoms**2, axis=1)
        return float(np.sum(self.rates * np.minimum(sq, 1.0)))

    def tail_mass(self) -> float:
        norms = np.linalg.norm(self.atoms, axis=1)
        return float(np.sum(self.rates[norms > 1.0]))

    def tail_integral(self, f) -> tuple[np.ndarray, float]:
        """Exact ``sum_j r_j f(h_j)`` over atoms beyond the unit ball; stderr 0."""
        norms = np.linalg.norm(self.atoms, axis=1)
        outside = norms > 1.0
        if not np.any(outside):
            return np.zeros(self.dim), 0.0
        vals = np.array([f(h) for h in self.atoms[outside]])
        return np.sum(self.rates[outside, None] * vals, axis=0), 0.0

    def second_moment_inside(self) -> np.ndarray:
        norms = np.linalg.norm(self.atoms, axis=1)
        inside = norms <= 1.0
        if not np.any(inside):
            return np.zeros((self.dim, self.dim))
        a = self.atoms[inside]
        return (a * self.rates[inside, None]).T @ a

    def payload(self) -> dict:
        return {"atoms": self.atoms.tolist(), "rates": self.rates.tolist()}


@dataclass(frozen=True)
class DiagonalStableJumps:
    """Independent symmetric stable coordinates: index ``alphas[k]``, scale ``scales[k]``.

    Coordinate ``k`` contributes ``-(scales[k] * |g_k|) ** alphas[k]`` to the symbol.
    """

    alphas: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        scales = np.atleast_1d(np.asarray(self.scales, dtype=float))
        if alphas.shape != scales.shape:
            raise ValueError("alphas and scales must have matching shapes")
        for a in alphas:
            _check_alpha(a)
        if np.any(scales < 0):
            raise ValueError("scales must be nonnegative")
        alphas = alphas.copy()
        alphas.setflags(write=False)
        scales = scales.copy()
        scales.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "scales", scales)

    @property
    def dim(self) -> int:
        return self.alphas.shape[0]

    is_symmetric = True

    def payload(self) -> dict:
        return {"alphas": self.alphas.tolist(), "scales": self.scales.tolist()}


@dataclass(frozen=True)
class CanonicalStableJumps:
    """The rotation-invariant stable jump family with symbol ``-norm(g)**alpha``."""

    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    is_symmetric = True

    def payload(self) -> dict:
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class NoJumps:
    """Empty jump measure."""

    is_symmetric = True

    def payload(self) -> dict:
        return {}


# ---------------------------------------------------------------------------
# target-side representations of mapped stable measures


@dataclass(frozen=True)
class PushedStable:
    """Image of the canonical stable measure under a Hilbert–Schmidt matrix."""

    matrix: np.ndarray
    alpha: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    is_symmetric = True

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def clipped_second_moment(self) -> float:
        ratio = _stable_direction_ratio(self.matrix, self.alpha)
        return ratio * energy_coefficient(self.alpha)

    def tail_mass(self) -> float:
        ratio = _stable_direction_ratio(self.matrix, self.alpha)
        return ratio * tail_coefficient(self.alpha)

    def second_moment_inside(self, n_directions: int = 1 << 14, seed: int = 20260822) -> np.ndarray:
        """The matrix ``int_{norm<=1} u u^T dmeasure``.

        Radial part exact; spherical average by a fixed-seed normalized-Gaussian
        cloud (diagnostic accuracy, deterministic).
        """
        a = self.alpha
        rng = np.random.Generator(np.random.Philox(seed))
        d_in = self.matrix.shape[1]
        z = rng.standard_normal((n_directions, d_in))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        pu = z @ self.matrix.T
        norms = np.linalg.norm(pu, axis=1)
        keep = norms > 1e-300
        pu, norms = pu[keep], norms[keep]
        # per-direction integral: (Phi w)(Phi w)^T * norm(Phi w)^(a-2) / (2-a)
        weights = norms ** (a - 2.0) / (2.0 - a)
        mat = (pu * weights[:, None]).T @ pu / n_directions
        denom = cosine_tail_constant(a) * _sphere_abs_moment(d_in, a)
        return mat / denom

    def sampled(self, n: int, rng: np.random.Generator, cut: float = 1.0) -> "SampledJumps":
        """Importance-weighted point cloud of the measure beyond ``norm > cut``."""
        a = self.alpha
        d_in = self.matrix.shape[1]
        z = rng.standard_normal((n, d_in))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        pu = z @ self.matrix.T
        norms = np.linalg.norm(pu, axis=1)
        keep = norms > 1e-300
        pu, norms = pu[keep], norms[keep]
        # direction-conditional tail mass beyond radius cut/norm(Phi w)
        c_total = 1.0 / (cosine_tail_constant(a) * _sphere_abs_moment(d_in, a))
        mass = c_total * (norms / cut) ** a / a
        radii = (cut / norms) * rng.uniform(0.0, 1.0, size=norms.shape[0]) ** (-1.0 / a)
        points = pu * (radii / norms)[:, None]
        weights = mass / n
        return SampledJumps(points, weights)

    def payload(self) -> dict:
        return {"matrix": self.matrix.tolist(), "alpha": self.alpha}


@lru_cache(maxsize=None)
def _sphere_abs_moment(d: int, alpha: float) -> float:
    """E[|U_1|^alpha] for U uniform on the (d-1)-sphere."""
    return float(
        _gamma((1.0 + alpha) / 2.0)
        * _gamma(d / 2.0)
        / (_gamma(0.5) * _gamma((d + alpha) / 2.0))
    )


@dataclass(frozen=True)
class PushedDiagonalStable:
    """Image of independent stable coordinates under a Hilbert–Schmidt matrix."""

    matrix: np.ndarray
    alphas: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).copy()
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float)).copy()
        scales = np.atleast_1d(np.asarray(self.scales, dtype=float)).copy()
        if m.shape[1] != alphas.shape[0]:
            raise ValueError("one stability index per source coordinate")
        for a in alphas:
            _check_alpha(a)
        for arr in (m, alphas, scales):
            arr.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "scales", scales)

    is_symmetric = True

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _column_scales(self) -> np.ndarray:
        return self.scales * np.linalg.norm(self.matrix, axis=0)

    def clipped_second_moment(self) -> float:
        eff = self._column_scales()
        out = 0.0
        for a, s in zip(self.alphas, eff):
            if s > 0:
                out += s**a * energy_coefficient(a)
        return float(out)

    def tail_mass(self) -> float:
        eff = self._column_scales()
        out = 0.0
        for a, s in zip(self.alphas, eff):
            if s > 0:
                out += s**a * tail_coefficient(a)
        return float(out)

    def second_moment_inside(self) -> np.ndarray:
        # jumps sit on the column rays; per column the radial integral is exact
        out = np.zeros((self.dim, self.dim))
        for k, (a, sig) in enumerate(zip(self.alphas, self.scales)):
            col = self.matrix[:, k]
            cn = float(np.linalg.norm(col))
            if sig <= 0 or cn <= 1e-300:
                continue
            s_eff = sig * cn
            radial = s_eff**a / (cosine_tail_constant(a) * (2.0 - a))
            out += radial * np.outer(col, col) / cn**2
        return out

    def payload(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "alphas": self.alphas.tolist(),
            "scales": self.scales.tolist(),
        }


@dataclass(frozen=True)
class SampledJumps:
    """Weighted point cloud standing in for a jump measure's tail.

    ``weights[i]`` is the measure mass carried by ``points[i]``; integrals are
    plain weighted sums.  Only trustworthy for integrands supported beyond the
    unit ball when built with ``cut <= 1``.
    """

    points: np.ndarray
    weights: np.ndarray
    min_tail_points: int = 100

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float)).copy()
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if pts.shape[0] != w.shape[0]:
            raise ValueError("need one weight per point")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_symmetric(self) -> bool:
        return False

    def tail_mass(self) -> float:
        norms = np.linalg.norm(self.points, axis=1)
        return float(np.sum(self.weights[norms > 1.0]))

    def n_tail_points(self) -> int:
        return int(np.sum(np.linalg.norm(self.points, axis=1) > 1.0))

    def tail_integral(self, f) -> tuple[np.ndarray, float]:
        """Weighted sum of ``f`` over points beyond the unit ball, with a spread
        estimate of the sampling error."""
        norms = np.linalg.norm(self.points, axis=1)
        outside = norms > 1.0
        if not np.any(outside):
            return np.zeros(self.dim), 0.0
        pts = self.points[outside]
        w = self.weights[outside]
        vals = np.array([f(h) for h in pts])
        contrib = w[:, None] * vals
        total = np.sum(contrib, axis=0)
        n = pts.shape[0]
        spread = float(np.sqrt(np.sum(np.var(contrib, axis=0)) * n)) / max(np.sqrt(n), 1.0)
        return total, spread

    def payload(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}
