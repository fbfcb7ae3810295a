"""Step functions and the modular functionals that govern integrability.

For a step function ``psi`` with coefficient ``F_i`` on the interval
``(t_i, t_{i+1}]`` the modular splits into

* an energy-plus-drift part: ``sum_i dt_i * (energy(F_i) + drift_sup(F_i))``
  where ``energy`` is the clipped second moment of the mapped jump measure plus
  the Gaussian trace and ``drift_sup`` the supremum over contractions of the
  truncated drift norm, and
* a clipped-strength part: ``sum_i dt_i * min(hs_norm(F_i)^2, 1)``.

The point mass at zero in a step function's representation never contributes
(it sits on a Lebesgue-null set).

``metrize`` turns the quasi-metric induced by the modular into a genuine metric
on a finite set by chaining: with growth constant 4 the exponent
``p = ln 2 / ln 8 = 1/3`` yields the two-sided comparison
``chain <= modular^p <= 2 * chain``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .characteristics import (
    CylCharacteristics,
    GenuineTriplet,
    compose_contraction,
    pushforward,
)
from .linalg import (
    Contraction,
    HSMap,
    Partition,
    clip_norm,
    random_hs_map,
    sample_contraction,
)
from .measures import NoJumps, SampledJumps, UnsupportedMeasureError

__all__ = [
    "StepFunction",
    "ModularValue",
    "MetrizationParams",
    "MetrizationResult",
    "DriftBound",
    "StepApproximationError",
    "dyadic_stage",
    "energy_of",
    "drift_sup",
    "modular_of",
    "quasi_metric",
    "metrize",
    "step_approximate",
    "random_step_function",
]


@dataclass(frozen=True)
class StepFunction:
    """A deterministic step function: value ``values[0]`` at {0} and
    ``values[i+1]`` on the half-open interval ``(t_i, t_{i+1}]``."""

    partition: Partition
    values: tuple

    def __post_init__(self):
        vals = tuple(self.values)
        if len(vals) != self.partition.n_intervals + 1:
            raise ValueError(
                f"need {self.partition.n_intervals + 1} values "
                f"(one at zero plus one per interval), got {len(vals)}"
            )
        shapes = {v.matrix.shape for v in vals}
        if len(shapes) != 1:
            raise ValueError("all step values must share one shape")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_intervals(cls, partition: Partition, interval_values) -> "StepFunction":
        """Build with a zero value at the time origin."""
        interval_values = list(interval_values)
        shape = interval_values[0].matrix.shape
        return cls(partition, (HSMap(np.zeros(shape)), *interval_values))

    @classmethod
    def constant(cls, value: HSMap, span=(0.0, 1.0)) -> "StepFunction":
        return cls.from_intervals(Partition(np.array(span)), [value])

    @property
    def interval_values(self) -> tuple:
        return self.values[1:]

    @property
    def d_out(self) -> int:
        return self.values[0].matrix.shape[0]

    @property
    def d_in(self) -> int:
        return self.values[0].matrix.shape[1]

    def value_at(self, t: float) -> HSMap:
        pts = self.partition.points
        if t == pts[0]:
            return self.values[0]
        if not (pts[0] < t <= pts[-1]):
            raise ValueError(f"time {t} outside the span {self.partition.span}")
        i = int(np.searchsorted(pts, t, side="left")) - 1
        return self.values[i + 1]

    def on_refinement(self, finer: Partition) -> "StepFunction":
        """The same function expressed on a nested finer partition."""
        if not self.partition.is_nested_in(finer):
            raise ValueError("refinement must contain the original points")
        vals = [self.value_at(t) for t in finer.points[1:]]
        return StepFunction(finer, (self.values[0], *vals))

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        common = self.partition.refine_with(other.partition)
        a = self.on_refinement(common)
        b = other.on_refinement(common)
        return StepFunction(common, tuple(x - y for x, y in zip(a.values, b.values)))

    def __add__(self, other: "StepFunction") -> "StepFunction":
        common = self.partition.refine_with(other.partition)
        a = self.on_refinement(common)
        b = other.on_refinement(common)
        return StepFunction(common, tuple(x + y for x, y in zip(a.values, b.values)))

    def scaled(self, c: float) -> "StepFunction":
        return StepFunction(self.partition, tuple(v * c for v in self.values))

    def hs_norms(self) -> np.ndarray:
        return np.array([v.hs_norm for v in self.interval_values])

    def to_payload(self) -> dict:
        return {
            "points": self.partition.points.tolist(),
            "at_zero": self.values[0].matrix.tolist(),
            "values": [v.matrix.tolist() for v in self.interval_values],
        }

    @classmethod
    def from_payload(cls, obj: dict) -> "StepFunction":
        extra = set(obj) - {"points", "at_zero", "values"}
        if extra:
            raise ValueError(f"unknown fields in step function: {sorted(extra)}")
        part = Partition(np.array(obj["points"], dtype=float))
        vals = [HSMap(np.array(m, dtype=float)) for m in obj["values"]]
        zero = HSMap(np.array(obj["at_zero"], dtype=float))
        return cls(part, (zero, *vals))


def _component_chars(model) -> list[CylCharacteristics]:
    if isinstance(model, CylCharacteristics):
        return [model]
    if hasattr(model, "kind") and model.kind == "sum":
        out = []
        for c in model.components:
            out.extend(_component_chars(c))
        return out
    if hasattr(model, "chars"):
        return [model.chars]
    raise TypeError(f"expected characteristics or a driver, got {type(model).__name__}")


def energy_of(model, phi: HSMap) -> float:
    """Clipped second moment of the mapped jump measure plus the Gaussian trace.

    Exact closed forms for every supported representation; grows monotonically
    under scaling of the map and never decreases under composition with a
    contraction inverse (contraction composition can only shrink it).
    """
    total = 0.0
    for chars in _component_chars(model):
        trip = pushforward(chars, phi)
        total += float(np.trace(trip.cov))
        j = trip.jumps
        if isinstance(j, NoJumps):
            continue
        if isinstance(j, SampledJumps):
            raise UnsupportedMeasureError(
                "energy is not defined for a sampled jump cloud (tail-only support)"
            )
        if not hasattr(j, "clipped_second_moment"):
            raise UnsupportedMeasureError(
                f"energy is not defined for jump representation {type(j).__name__}"
            )
        total += float(j.clipped_second_moment())
    return total


@dataclass(frozen=True)
class DriftBound:
    """Certified bracket for the contraction supremum of the truncated drift."""

    lower: float
    upper: float
    stderr: float = 0.0
    best: Contraction | None = None


def _drift_value(triplets: list[GenuineTriplet], o: Contraction) -> tuple[float, float]:
    vec = np.zeros(triplets[0].dim)
    err = 0.0
    for trip in triplets:
        vec = vec + compose_contraction(trip, o)
        j = trip.jumps
        if isinstance(j, SampledJumps):

            def integrand(h, m=o.matrix):
                return clip_norm(m @ h) - m @ clip_norm(h)

            _, spread = j.tail_integral(integrand)
            err += spread
    return float(np.linalg.norm(vec)), err


def _perturbed(o: Contraction, scale: float, rng: np.random.Generator) -> Contraction:
    u, s, vt = np.linalg.svd(o.matrix)
    d = s.shape[0]

    def small_rotation():
        g = rng.standard_normal((d, d)) * scale
        skew = (g - g.T) / 2.0
        q, _ = np.linalg.qr(np.eye(d) + skew)
        return q

    s_new = np.clip(s + scale * rng.standard_normal(d), 0.0, 1.0)
    m = (small_rotation() @ u) * s_new @ (vt @ small_rotation())
    norm = np.linalg.svd(m, compute_uv=False)[0]
    if norm > 1.0:
        m = m / norm
    return Contraction(m)


def drift_sup(
    model,
    phi: HSMap,
    budget: int = 60,
    rng: np.random.Generator | None = None,
    extra_starts: tuple = (),
) -> DriftBound:
    """Bracket ``sup over contractions O of norm(truncated drift of (O phi)-mapped process)``.

    The lower bound comes from multistart search (identity, caller-provided
    starts, random contractions) followed by greedy perturbation ascent on the
    incumbent; the upper bound is ``norm(drift) + 2 * tail mass``.  Symmetric
    models short-circuit to the exact (0, 0).
    """
    comps = _component_chars(model)
    if all(c.is_symmetric for c in comps):
        return DriftBound(0.0, 0.0, 0.0, None)
    if rng is None:
        raise ValueError("an explicit generator is required for the search")
    triplets = [pushforward(c, phi) for c in comps]
    drift_total = np.sum([t.drift for t in triplets], axis=0)
    tail = 0.0
    for t in triplets:
        j = t.jumps
        tail += float(j.tail_mass()) if hasattr(j, "tail_mass") else 0.0
    upper = float(np.linalg.norm(drift_total)) + 2.0 * tail

    d = triplets[0].dim
    candidates = [Contraction.identity(d), *extra_starts]
    modes = ("scaled-svd", "orthogonal", "rank-one")
    n_random = max(budget // 2 - len(candidates), 0)
    for i in range(n_random):
        candidates.append(sample_contraction(rng, d, mode=modes[i % 3]))

    best_val, best_err, best_o = -1.0, 0.0, None
    evals = 0
    for o in candidates:
        val, err = _drift_value(triplets, o)
        evals += 1
        if val > best_val:
            best_val, best_err, best_o = val, err, o

    scale = 0.3
    stall = 0
    while evals < budget:
        cand = _perturbed(best_o, scale, rng)
        val, err = _drift_value(triplets, cand)
        evals += 1
        if val > best_val:
            best_val, best_err, best_o = val, err, cand
            stall = 0
        else:
            stall += 1
            if stall >= 4:
                scale = max(scale / 2.0, 1e-3)
                stall = 0

    lower = min(best_val, upper)
    return DriftBound(lower, upper, best_err, best_o)


@dataclass(frozen=True)
class ModularValue:
    """Value of the modular on a step function, split into its two parts."""

    energy_part: float
    clip_part: float
    total: float
    stderr: float = 0.0

    def __post_init__(self):
        if abs(self.total - (self.energy_part + self.clip_part)) > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError("total must equal energy_part + clip_part")

    @classmethod
    def of_parts(cls, energy_part: float, clip_part: float, stderr: float = 0.0) -> "ModularValue":
        return cls(energy_part, clip_part, energy_part + clip_part, stderr)


def modular_of(
    model,
    psi: StepFunction,
    budget: int = 60,
    rng: np.random.Generator | None = None,
    drift_starts: tuple = (),
) -> ModularValue:
    """Modular of a deterministic step function against the model's law.

    Uses the certified lower end of each interval's drift bracket; the stderr
    aggregates the statistical error of any sampled-representation evaluations
    (zero for closed-form representations).
    """
    comps = _component_chars(model)
    symmetric = all(c.is_symmetric for c in comps)
    energy_part = 0.0
    clip_part = 0.0
    var = 0.0
    for dt, value in zip(psi.partition.widths, psi.interval_values):
        dt = float(dt)
        e = energy_of(model, value)
        if symmetric:
            drift_lower, drift_err = 0.0, 0.0
        else:
            bound = drift_sup(model, value, budget=budget, rng=rng, extra_starts=drift_starts)
            drift_lower, drift_err = bound.lower, bound.stderr
        energy_part += dt * (e + drift_lower)
        clip_part += dt * min(value.hs_norm**2, 1.0)
        var += (dt * drift_err) ** 2
    return ModularValue.of_parts(energy_part, clip_part, math.sqrt(var))


def quasi_metric(
    model,
    psi1: StepFunction,
    psi2: StepFunction,
    budget: int = 60,
    rng: np.random.Generator | None = None,
) -> float:
    """Modular of the difference on the common refinement."""
    return modular_of(model, psi1 - psi2, budget=budget, rng=rng).total


@dataclass(frozen=True)
class MetrizationParams:
    """Chaining exponent and the growth constant it is tuned to."""

    exponent: float = math.log(2.0) / math.log(8.0)
    quasi_constant: float = 4.0

    def __post_init__(self):
        if not (0.0 < self.exponent < 1.0):
            raise ValueError("exponent must lie in (0, 1)")
        if self.quasi_constant < 1.0:
            raise ValueError("growth constant must be at least 1")


@dataclass(frozen=True)
class MetrizationResult:
    """Pairwise modulars, their powers, and the chain-infimum metric."""

    modular_matrix: np.ndarray
    power_matrix: np.ndarray
    chain_matrix: np.ndarray
    params: MetrizationParams

    def quasi_triangle_holds(self, slack: float = 1e-9) -> bool:
        m = self.modular_matrix
        k = self.params.quasi_constant
        n = m.shape[0]
        for i in range(n):
            for jj in range(n):
                for l in range(n):
                    if m[i, jj] > k * (m[i, l] + m[l, jj]) + slack:
                        return False
        return True

    def sandwich_holds(self, slack: float = 1e-9) -> bool:
        d, q = self.chain_matrix, self.power_matrix
        return bool(np.all(d <= q + slack) and np.all(q <= 2.0 * d + slack))


def metrize(
    model,
    elements,
    params: MetrizationParams | None = None,
    budget: int = 60,
    rng: np.random.Generator | None = None,
) -> MetrizationResult:
    """Chain-infimum metric on a finite set of step functions.

    Computes the pairwise modular matrix, raises it to the chaining exponent,
    and closes it under shortest chains (Floyd–Warshall).
    """
    params = params or MetrizationParams()
    elements = list(elements)
    n = len(elements)
    m = np.zeros((n, n))
    for i in range(n):
        for jj in range(i + 1, n):
            diff = elements[i] - elements[jj]
            m[i, jj] = m[jj, i] = modular_of(model, diff, budget=budget, rng=rng).total
    q = m**params.exponent
    np.fill_diagonal(q, 0.0)
    d = q.copy()
    for l in range(n):
        d = np.minimum(d, d[:, l][:, None] + d[l, :][None, :])
    return MetrizationResult(m, q, d, params)


class StepApproximationError(RuntimeError):
    """Raised when dyadic refinement cannot reach the requested tolerance."""


def dyadic_stage(
    sampler,
    exponent: int,
    span: tuple[float, float] = (0.0, 1.0),
    truncation_level: float | None = None,
) -> StepFunction:
    """Midpoint discretization of ``t -> sampler(t)`` on ``2**exponent`` dyadic
    intervals, zeroing values whose Hilbert–Schmidt norm exceeds the level
    (default: ``2**exponent``).  Sampling at midpoints means a step function
    that is itself dyadic at this or a coarser resolution is reproduced
    exactly."""
    s, t = span
    part = Partition.dyadic(exponent, s, t)
    level = truncation_level if truncation_level is not None else float(2**exponent)
    mids = (part.points[:-1] + part.points[1:]) / 2.0
    vals = []
    for tm in mids:
        f = sampler(float(tm))
        vals.append(f if f.hs_norm <= level else HSMap(np.zeros_like(f.matrix)))
    return StepFunction.from_intervals(part, vals)


def step_approximate(
    sampler,
    model,
    tolerance: float,
    span: tuple[float, float] = (0.0, 1.0),
    budget: int = 60,
    rng: np.random.Generator | None = None,
    start_exponent: int = 2,
    max_exponent: int = 16,
    truncation_level: float | None = None,
):
    """Approximate ``t -> sampler(t)`` by a dyadic step function.

    Samples at interval midpoints, truncates values with Hilbert–Schmidt norm
    above the level (default: grows as ``2**exponent``), and doubles the
    resolution until the modular increment between consecutive stages falls
    below ``tolerance``.  Raises :class:`StepApproximationError` when the
    finest allowed resolution (``2**max_exponent`` intervals) is reached first.

    Returns ``(step_function, history)`` with one modular increment per stage.
    """
    def stage(j: int) -> StepFunction:
        return dyadic_stage(sampler, j, span, truncation_level)

    prev = stage(start_exponent)
    history: list[float] = []
    for j in range(start_exponent + 1, max_exponent + 1):
        cur = stage(j)
        inc = quasi_metric(model, cur, prev, budget=budget, rng=rng)
        history.append(inc)
        if inc < tolerance:
            return cur, history
        prev = cur
    raise StepApproximationError(
        f"modular increment still {history[-1]:.3g} >= {tolerance:.3g} "
        f"at 2**{max_exponent} intervals"
    )


def random_step_function(
    rng: np.random.Generator,
    partition: Partition,
    d_out: int,
    d_in: int,
    scale: float = 1.0,
) -> StepFunction:
    """A step function with independent random coefficients of the given scale."""
    vals = [random_hs_map(rng, d_out, d_in, scale=scale * rng.uniform(0.3, 1.0)) for _ in range(partition.n_intervals)]
    return StepFunction.from_intervals(partition, vals)
