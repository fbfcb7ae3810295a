"""Characteristic triplets: the cylindrical symbol, mapped (genuine) triplets,
contraction composition, S-operators, and partition-limit estimators.

Conventions
-----------
A :class:`CylCharacteristics` declares the process on the source truncation:
drift vector ``a``, Gaussian covariance ``Q``, and a jump representation.  For
atomic jumps the declared drift is understood with the real-line unit-interval
centering applied per basis projection, so the realized process is

    Y(t) = t * (a - sum_j r_j * tau(h_j)) + W_Q(t) + CompoundPoisson(t),

where ``tau`` zeroes every coordinate larger than one in absolute value.  With
all atom coordinates inside the unit interval this is the familiar compensated
compound Poisson; with an atom far outside, the compensation vanishes and the
declared drift is the genuine one.  All downstream formulas (symbol, mapped
triplet, composition identity) describe this realized process, so sampled laws,
closed-form characteristic functions, and partition-limit estimates are
mutually consistent at every argument.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import Contraction, HSMap, clip_norm
from .measures import (
    AtomicJumps,
    CanonicalStableJumps,
    DiagonalStableJumps,
    NoJumps,
    PushedDiagonalStable,
    PushedStable,
    SampledJumps,
    UnsupportedMeasureError,
)

__all__ = [
    "CylCharacteristics",
    "GenuineTriplet",
    "SOperator",
    "MCEstimate",
    "coordinate_truncation",
    "symbol_eval",
    "log_symbol",
    "pushforward",
    "compose_contraction",
    "s_operator",
    "partition_drift_estimate",
    "partition_energy_estimate",
    "chars_to_payload",
    "chars_from_payload",
    "triplet_to_payload",
]


def coordinate_truncation(h: np.ndarray) -> np.ndarray:
    """Zero out coordinates with absolute value above one (the per-projection
    real-line centering)."""
    h = np.asarray(h, dtype=float)
    return np.where(np.abs(h) <= 1.0, h, 0.0)


@dataclass(frozen=True)
class CylCharacteristics:
    """Declared characteristics (drift, covariance, jump representation)."""

    drift: np.ndarray
    cov: np.ndarray
    jumps: object = field(default_factory=NoJumps)

    def __post_init__(self):
        a = np.asarray(self.drift, dtype=float).copy()
        q = np.asarray(self.cov, dtype=float).copy()
        if a.ndim != 1:
            raise ValueError("drift must be a vector")
        if q.shape != (a.shape[0], a.shape[0]):
            raise ValueError(f"covariance shape {q.shape} does not match drift length {a.shape[0]}")
        if not np.allclose(q, q.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh((q + q.T) / 2.0)
        if eigs.size and eigs.min() < -1e-10 * max(1.0, eigs.max()):
            raise ValueError("covariance must be positive semidefinite")
        if isinstance(self.jumps, (AtomicJumps, DiagonalStableJumps)) and self.jumps.dim != a.shape[0]:
            raise ValueError("jump representation dimension does not match drift")
        a.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "drift", a)
        object.__setattr__(self, "cov", q)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def effective_drift(self) -> np.ndarray:
        """The genuine drift vector of the realized process (declared drift minus
        the per-projection compensation of atomic jumps)."""
        if isinstance(self.jumps, AtomicJumps):
            comp = np.sum(self.jumps.rates[:, None] * coordinate_truncation(self.jumps.atoms), axis=0)
            return self.drift - comp
        return self.drift

    @property
    def is_symmetric(self) -> bool:
        if np.any(self.effective_drift != 0.0):
            return False
        return bool(getattr(self.jumps, "is_symmetric", False)) or isinstance(self.jumps, NoJumps)

    @classmethod
    def zero(cls, d: int) -> "CylCharacteristics":
        return cls(np.zeros(d), np.zeros((d, d)), NoJumps())


def log_symbol(chars: CylCharacteristics, g: np.ndarray) -> complex:
    """The symbol S(g): drift, Gaussian, and jump parts of the log characteristic
    function per unit time."""
    g = np.asarray(g, dtype=float)
    if g.shape != (chars.dim,):
        raise ValueError(f"argument length {g.shape} does not match dimension {chars.dim}")
    a_eff = chars.effective_drift
    out = 1j * float(a_eff @ g) - 0.5 * float(g @ chars.cov @ g)
    j = chars.jumps
    if isinstance(j, NoJumps):
        pass
    elif isinstance(j, AtomicJumps):
        phases = j.atoms @ g
        out += complex(np.sum(j.rates * (np.exp(1j * phases) - 1.0)))
    elif isinstance(j, CanonicalStableJumps):
        out += -float(np.linalg.norm(g)) ** j.alpha
    elif isinstance(j, DiagonalStableJumps):
        out += -float(np.sum((j.scales * np.abs(g)) ** j.alphas))
    else:
        raise UnsupportedMeasureError(
            f"symbol evaluation is not defined for jump representation {type(j).__name__}"
        )
    return out


def symbol_eval(chars: CylCharacteristics, g: np.ndarray, t: float = 1.0) -> complex:
    """exp(t * S(g)); the characteristic function of the projection onto g.

    Always has modulus at most one.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    return complex(np.exp(t * log_symbol(chars, g)))


@dataclass(frozen=True)
class GenuineTriplet:
    """Characteristics of the mapped (target-space valued) process.

    ``drift`` is the first characteristic relative to the unit-ball radial
    truncation; ``cov`` the Gaussian covariance; ``jumps`` a target-side
    representation of the jump measure.
    """

    drift: np.ndarray
    cov: np.ndarray
    jumps: object = field(default_factory=NoJumps)

    def __post_init__(self):
        b = np.asarray(self.drift, dtype=float).copy()
        q = np.asarray(self.cov, dtype=float).copy()
        if b.ndim != 1 or q.shape != (b.shape[0], b.shape[0]):
            raise ValueError("triplet drift/cov shapes are inconsistent")
        b.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "drift", b)
        object.__setattr__(self, "cov", q)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    def log_char(self, u: np.ndarray) -> complex:
        """Log characteristic function per unit time, in closed form."""
        u = np.asarray(u, dtype=float)
        out = 1j * float(self.drift @ u) - 0.5 * float(u @ self.cov @ u)
        j = self.jumps
        if isinstance(j, NoJumps):
            return out
        if isinstance(j, AtomicJumps):
            phases = j.atoms @ u
            centered = clip_norm(j.atoms) @ u
            out += complex(np.sum(j.rates * (np.exp(1j * phases) - 1.0 - 1j * centered)))
            return out
        if isinstance(j, PushedStable):
            back = j.matrix.T @ u
            out += -float(np.linalg.norm(back)) ** j.alpha
            return out
        if isinstance(j, PushedDiagonalStable):
            back = j.matrix.T @ u
            out += -float(np.sum((j.scales * np.abs(back)) ** j.alphas))
            return out
        raise UnsupportedMeasureError(
            f"no closed-form characteristic function for {type(j).__name__}"
        )

    def char_function(self, u: np.ndarray, t: float = 1.0) -> complex:
        return complex(np.exp(t * self.log_char(u)))


def pushforward(chars: CylCharacteristics, phi: HSMap) -> GenuineTriplet:
    """Characteristics of the genuine process obtained by mapping through ``phi``.

    Jump measures map forward exactly (atoms) or stay in closed form (stable).
    The drift is the true unit-ball-truncated first characteristic of the
    realized process; for atoms this is ``phi a_eff + sum_j r_j clip(phi h_j)``.
    """
    if phi.d_in != chars.dim:
        raise ValueError(f"map expects source dimension {phi.d_in}, characteristics have {chars.dim}")
    cov_h = phi.matrix @ chars.cov @ phi.matrix.T
    j = chars.jumps
    base = phi(chars.effective_drift)
    if isinstance(j, NoJumps):
        return GenuineTriplet(base, cov_h, NoJumps())
    if isinstance(j, AtomicJumps):
        mapped = j.mapped(phi.matrix)
        drift = base + np.sum(mapped.rates[:, None] * clip_norm(mapped.atoms), axis=0)
        return GenuineTriplet(drift, cov_h, mapped)
    if isinstance(j, CanonicalStableJumps):
        return GenuineTriplet(base, cov_h, PushedStable(phi.matrix, j.alpha))
    if isinstance(j, DiagonalStableJumps):
        return GenuineTriplet(base, cov_h, PushedDiagonalStable(phi.matrix, j.alphas, j.scales))
    raise UnsupportedMeasureError(f"cannot map jump representation {type(j).__name__}")


_MIN_TAIL_POINTS = 100


def compose_contraction(triplet: GenuineTriplet, contraction: Contraction) -> np.ndarray:
    """Truncated first characteristic of the contraction-mapped process.

    Implements ``O b + int (clip(O h) - O clip(h)) d(jump measure)``; the
    integrand vanishes on the closed unit ball, so only jumps beyond it
    contribute.  Symmetric jump measures contribute exactly zero (the integrand
    is odd).  Sampled representations yield a weighted estimate and emit a
    warning when too few cloud points lie beyond the unit ball.
    """
    if contraction.matrix.shape != (triplet.dim, triplet.dim):
        raise ValueError("contraction dimension does not match triplet")
    o = contraction.matrix
    out = o @ triplet.drift
    j = triplet.jumps
    if isinstance(j, NoJumps):
        return out
    if getattr(j, "is_symmetric", False):
        # odd integrand against a symmetric measure
        return out

    def integrand(h):
        return clip_norm(o @ h) - o @ clip_norm(h)

    if isinstance(j, SampledJumps):
        n_tail = j.n_tail_points()
        if n_tail < j.min_tail_points:
            warnings.warn(
                f"flagged estimate: sampled jump cloud has only {n_tail} points beyond "
                f"the unit ball (want >= {j.min_tail_points})",
                RuntimeWarning,
                stacklevel=2,
            )
        value, _spread = j.tail_integral(integrand)
        return out + value
    if isinstance(j, AtomicJumps):
        value, _ = j.tail_integral(integrand)
        return out + value
    raise UnsupportedMeasureError(
        f"contraction composition is not defined for {type(j).__name__}"
    )


@dataclass(frozen=True)
class SOperator:
    """The covariance-like operator ``<T h1, h2> = <Q h1, h2> + int_{|u|<=1} <h1,u><h2,u> d(jumps)``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if not np.allclose(m, m.T, atol=1e-9):
            raise ValueError("S-operator must be symmetric")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, h1: np.ndarray, h2: np.ndarray) -> float:
        return float(np.asarray(h1) @ self.matrix @ np.asarray(h2))


def s_operator(triplet: GenuineTriplet) -> SOperator:
    j = triplet.jumps
    if isinstance(j, NoJumps):
        inside = np.zeros((triplet.dim, triplet.dim))
    elif hasattr(j, "second_moment_inside"):
        inside = j.second_moment_inside()
    else:
        raise UnsupportedMeasureError(f"S-operator not available for {type(j).__name__}")
    return SOperator(triplet.cov + inside)


# ---------------------------------------------------------------------------
# partition-limit estimators


@dataclass(frozen=True)
class MCEstimate:
    """A Monte-Carlo estimate with its standard error.

    For vector values the stderr combines coordinates as
    ``sqrt(sum_k var_k / n)``.
    """

    value: np.ndarray | float
    stderr: float
    n_samples: int
    mesh: int | None = None

    def distance_to(self, target) -> float:
        return float(np.linalg.norm(np.asarray(self.value, dtype=float) - np.asarray(target, dtype=float)))


def _resolve_drift_strategy(driver, strategy: str) -> str:
    if strategy != "auto":
        return strategy
    if driver.is_symmetric:
        return "antithetic"
    if driver.mean_rate() is not None:
        return "mean-cv"
    return "plain"


def _resolve_energy_strategy(driver, strategy: str) -> str:
    if strategy != "auto":
        return strategy
    if driver.covariance_rate() is not None:
        return "mean-cv"
    return "plain"


def _iter_path_chunks(driver, phi, dt_fine, n_fine, mc_samples, rng, chunk):
    done = 0
    mat = phi.matrix
    while done < mc_samples:
        c = min(chunk, mc_samples - done)
        g_inc = driver.sample_g_increments(dt_fine, (c, n_fine), rng)
        yield g_inc @ mat.T
        done += c


def _aggregate(fine_h: np.ndarray, exponent: int) -> np.ndarray:
    c, n_fine, d = fine_h.shape
    n = 1 << exponent
    return fine_h.reshape(c, n, n_fine // n, d).sum(axis=2)


def partition_drift_estimate(
    driver,
    phi: HSMap,
    span: tuple[float, float] = (0.0, 1.0),
    mesh_exponents=range(2, 11),
    mc_samples: int = 2000,
    rng: np.random.Generator | None = None,
    strategy: str = "auto",
    chunk: int = 256,
) -> list[MCEstimate]:
    """Monte-Carlo estimates of ``sum_i E[clip(increment_i)]`` on nested dyadic meshes.

    One set of finest-mesh paths is simulated and aggregated for the coarser
    meshes, so the estimates share randomness and the mesh-to-mesh error is
    dominated by the genuine partition bias.

    Strategies: ``plain``; ``mean-cv`` subtracts the per-path linear part and
    adds the exact increment mean (drivers with a finite mean); ``antithetic``
    mirrors each path, exact for symmetric drivers; ``auto`` picks per driver.
    """
    if rng is None:
        raise ValueError("an explicit generator is required")
    if mc_samples < 1000:
        raise ValueError("use at least 1000 Monte-Carlo samples")
    exps = sorted(mesh_exponents)
    s, t = span
    if not t > s:
        raise ValueError("empty time span")
    n_fine = 1 << exps[-1]
    dt_fine = (t - s) / n_fine
    strat = _resolve_drift_strategy(driver, strategy)
    if strat == "antithetic" and not driver.is_symmetric:
        raise ValueError("antithetic strategy requires a symmetric driver")
    if strat == "mean-cv" and driver.mean_rate() is None:
        raise ValueError("mean-cv strategy requires a driver with a finite increment mean")

    d_h = phi.d_out
    sums = {j: np.zeros(d_h) for j in exps}
    sqsums = {j: np.zeros(d_h) for j in exps}
    count = 0
    for fine_h in _iter_path_chunks(driver, phi, dt_fine, n_fine, mc_samples, rng, chunk):
        c = fine_h.shape[0]
        for j in exps:
            inc = _aggregate(fine_h, j)
            if strat == "plain":
                stat = clip_norm(inc).sum(axis=1)
            elif strat == "mean-cv":
                stat = (clip_norm(inc) - inc).sum(axis=1)
            else:  # antithetic
                stat = 0.5 * (clip_norm(inc).sum(axis=1) + clip_norm(-inc).sum(axis=1))
            sums[j] += stat.sum(axis=0)
            sqsums[j] += (stat**2).sum(axis=0)
        count += c

    offset = np.zeros(d_h)
    if strat == "mean-cv":
        offset = (t - s) * phi(driver.mean_rate())
    out = []
    for j in exps:
        mean = sums[j] / count + offset
        var = np.maximum(sqsums[j] / count - (sums[j] / count) ** 2, 0.0)
        stderr = float(np.sqrt(var.sum() / count))
        out.append(MCEstimate(mean, stderr, count, mesh=1 << j))
    return out


def partition_energy_estimate(
    driver,
    phi: HSMap,
    span: tuple[float, float] = (0.0, 1.0),
    mesh_exponents=range(2, 11),
    mc_samples: int = 2000,
    rng: np.random.Generator | None = None,
    strategy: str = "auto",
    chunk: int = 256,
) -> list[MCEstimate]:
    """Monte-Carlo estimates of ``sum_i E[norm(increment_i)^2 ∧ 1]`` on nested meshes.

    Same path sharing as the drift estimator.  ``mean-cv`` subtracts the exact
    second moment per interval (drivers with finite second moments).
    """
    if rng is None:
        raise ValueError("an explicit generator is required")
    if mc_samples < 1000:
        raise ValueError("use at least 1000 Monte-Carlo samples")
    exps = sorted(mesh_exponents)
    s, t = span
    n_fine = 1 << exps[-1]
    dt_fine = (t - s) / n_fine
    strat = _resolve_energy_strategy(driver, strategy)
    if strat == "antithetic":
        raise ValueError("antithetic mirroring does not reduce an even statistic; use plain")
    cov_rate = driver.covariance_rate()
    mean_rate = driver.mean_rate()
    if strat == "mean-cv" and (cov_rate is None or mean_rate is None):
        raise ValueError("mean-cv strategy requires finite increment moments")

    sums = {j: 0.0 for j in exps}
    sqsums = {j: 0.0 for j in exps}
    count = 0
    for fine_h in _iter_path_chunks(driver, phi, dt_fine, n_fine, mc_samples, rng, chunk):
        c = fine_h.shape[0]
        for j in exps:
            inc = _aggregate(fine_h, j)
            sq = np.sum(inc**2, axis=2)
            if strat == "plain":
                stat = np.minimum(sq, 1.0).sum(axis=1)
            else:
                stat = (np.minimum(sq, 1.0) - sq).sum(axis=1)
            sums[j] += stat.sum()
            sqsums[j] += float((stat**2).sum())
        count += c

    out = []
    for j in exps:
        n_int = 1 << j
        dt = (t - s) / n_int
        offset = 0.0
        if strat == "mean-cv":
            trace = float(np.trace(phi.matrix @ cov_rate @ phi.matrix.T))
            mean_h = phi(mean_rate)
            offset = n_int * (dt * trace + dt**2 * float(mean_h @ mean_h))
        mean = sums[j] / count + offset
        var = max(sqsums[j] / count - (sums[j] / count) ** 2, 0.0)
        stderr = float(np.sqrt(var / count))
        out.append(MCEstimate(float(mean), stderr, count, mesh=n_int))
    return out


# ---------------------------------------------------------------------------
# serialization


def _jump_payload(jumps) -> dict:
    if isinstance(jumps, NoJumps):
        return {"variant": "zero", "payload": {}}
    if isinstance(jumps, AtomicJumps):
        return {"variant": "atomic", "payload": jumps.payload()}
    if isinstance(jumps, DiagonalStableJumps):
        return {"variant": "diagonal-stable", "payload": jumps.payload()}
    if isinstance(jumps, CanonicalStableJumps):
        return {"variant": "canonical-stable", "payload": jumps.payload()}
    if isinstance(jumps, PushedStable):
        return {"variant": "mapped-stable", "payload": jumps.payload()}
    if isinstance(jumps, PushedDiagonalStable):
        return {"variant": "mapped-diagonal-stable", "payload": jumps.payload()}
    if isinstance(jumps, SampledJumps):
        return {"variant": "sampled", "payload": jumps.payload()}
    raise UnsupportedMeasureError(f"cannot serialize {type(jumps).__name__}")


def jumps_from_payload(obj: dict):
    extra = set(obj) - {"variant", "payload"}
    if extra:
        raise ValueError(f"unknown fields in jump representation: {sorted(extra)}")
    variant = obj["variant"]
    payload = obj.get("payload", {})
    makers = {
        "zero": lambda p: NoJumps(),
        "atomic": lambda p: AtomicJumps(np.array(p["atoms"], dtype=float), np.array(p["rates"], dtype=float)),
        "diagonal-stable": lambda p: DiagonalStableJumps(
            np.array(p["alphas"], dtype=float), np.array(p["scales"], dtype=float)
        ),
        "canonical-stable": lambda p: CanonicalStableJumps(float(p["alpha"])),
        "mapped-stable": lambda p: PushedStable(np.array(p["matrix"], dtype=float), float(p["alpha"])),
        "mapped-diagonal-stable": lambda p: PushedDiagonalStable(
            np.array(p["matrix"], dtype=float),
            np.array(p["alphas"], dtype=float),
            np.array(p["scales"], dtype=float),
        ),
        "sampled": lambda p: SampledJumps(np.array(p["points"], dtype=float), np.array(p["weights"], dtype=float)),
    }
    if variant not in makers:
        raise ValueError(f"unknown jump variant {variant!r}")
    return makers[variant](payload)


def chars_to_payload(chars: CylCharacteristics) -> dict:
    return {
        "drift": chars.drift.tolist(),
        "cov": chars.cov.tolist(),
        "jumps": _jump_payload(chars.jumps),
    }


def chars_from_payload(obj: dict) -> CylCharacteristics:
    extra = set(obj) - {"drift", "cov", "jumps"}
    if extra:
        raise ValueError(f"unknown fields in characteristics: {sorted(extra)}")
    return CylCharacteristics(
        np.array(obj["drift"], dtype=float),
        np.array(obj["cov"], dtype=float),
        jumps_from_payload(obj.get("jumps", {"variant": "zero", "payload": {}})),
    )


def triplet_to_payload(triplet: GenuineTriplet) -> dict:
    return {
        "drift": triplet.drift.tolist(),
        "cov": triplet.cov.tolist(),
        "jumps": _jump_payload(triplet.jumps),
    }
