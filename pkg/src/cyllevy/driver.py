"""Driver processes on the source truncation, and path sampling.

A :class:`Driver` couples declared characteristics with a sampling law on the
``d_G``-dimensional truncation; mapped increments are produced by applying a
Hilbert–Schmidt map to source increments, so one realization can be pushed
through several maps consistently (the predictable-integral machinery depends
on that).

Stable increments use the subordinated-Gaussian representation
``dt**(1/alpha) * sqrt(2 S) * Z`` with ``S`` one-sided ``alpha/2``-stable from
Kanter's sampler, which reproduces ``exp(-dt * norm(g)**alpha)`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .characteristics import (
    CylCharacteristics,
    chars_from_payload,
    chars_to_payload,
    log_symbol,
)
from .linalg import DEFAULT_DIM, HSMap, Partition
from .measures import (
    AtomicJumps,
    CanonicalStableJumps,
    DiagonalStableJumps,
    NoJumps,
    UnsupportedMeasureError,
)

__all__ = [
    "Driver",
    "PathTable",
    "decoupled_driver",
    "positive_stable",
    "cms_symmetric_stable",
]

_KINDS = ("gaussian", "compound-poisson", "canonical-stable", "diagonal-stable", "sum")


def positive_stable(a: float, shape, rng: np.random.Generator) -> np.ndarray:
    """One-sided ``a``-stable variates with Laplace transform ``exp(-s**a)``.

    Kanter's representation for 0 < a < 1:
    ``sin(aU) * sin((1-a)U)**((1-a)/a) / (sin(U)**(1/a) * W**((1-a)/a))``
    with U uniform on (0, pi) and W unit exponential.
    """
    if not (0.0 < a < 1.0):
        raise ValueError(f"index must lie in (0, 1), got {a}")
    u = rng.uniform(0.0, np.pi, size=shape)
    w = rng.exponential(1.0, size=shape)
    num = np.sin(a * u) * np.sin((1.0 - a) * u) ** ((1.0 - a) / a)
    den = np.sin(u) ** (1.0 / a) * w ** ((1.0 - a) / a)
    return num / den


def cms_symmetric_stable(alpha: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Symmetric ``alpha``-stable variates with characteristic function ``exp(-|t|**alpha)``.

    The direct trigonometric sampler; used as an independent oracle against the
    subordinated-Gaussian route.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"index must lie in (0, 2), got {alpha}")
    v = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=shape)
    w = rng.exponential(1.0, size=shape)
    if abs(alpha - 1.0) < 1e-12:
        return np.tan(v)
    return (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


@dataclass(frozen=True)
class Driver:
    """A source-truncation process with declared characteristics and a sampler.

    ``kind`` must match the jump representation.  ``stream`` optionally holds a
    dedicated generator (used when a sampling call passes no generator);
    decoupled copies carry an independent stream.
    """

    chars: CylCharacteristics | None
    kind: str
    components: tuple = ()
    stream: np.random.Generator | None = None
    _cov_sqrt: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if self.kind == "sum":
            if self.chars is not None or not self.components:
                raise ValueError("sum drivers hold components and no merged characteristics")
            return
        if self.chars is None:
            raise ValueError("non-sum drivers need characteristics")
        j = self.chars.jumps
        ok = {
            "gaussian": isinstance(j, NoJumps),
            "compound-poisson": isinstance(j, AtomicJumps),
            "canonical-stable": isinstance(j, CanonicalStableJumps),
            "diagonal-stable": isinstance(j, DiagonalStableJumps),
        }[self.kind]
        if not ok:
            raise ValueError(f"kind {self.kind!r} does not match jump representation {type(j).__name__}")
        if np.any(self.chars.cov):
            eigval, eigvec = np.linalg.eigh(self.chars.cov)
            root = eigvec @ np.diag(np.sqrt(np.maximum(eigval, 0.0))) @ eigvec.T
            object.__setattr__(self, "_cov_sqrt", root)

    # ------------------------------------------------------------------ setup

    @classmethod
    def gaussian(cls, drift, cov, stream=None) -> "Driver":
        drift = np.asarray(drift, dtype=float)
        return cls(CylCharacteristics(drift, np.asarray(cov, dtype=float), NoJumps()), "gaussian", stream=stream)

    @classmethod
    def compound_poisson(cls, atoms, rates, drift=None, cov=None, stream=None) -> "Driver":
        jumps = AtomicJumps(np.asarray(atoms, dtype=float), np.asarray(rates, dtype=float))
        d = jumps.dim
        a = np.zeros(d) if drift is None else np.asarray(drift, dtype=float)
        q = np.zeros((d, d)) if cov is None else np.asarray(cov, dtype=float)
        return cls(CylCharacteristics(a, q, jumps), "compound-poisson", stream=stream)

    @classmethod
    def canonical_stable(cls, alpha: float, d: int = DEFAULT_DIM, stream=None) -> "Driver":
        return cls(
            CylCharacteristics(np.zeros(d), np.zeros((d, d)), CanonicalStableJumps(alpha)),
            "canonical-stable",
            stream=stream,
        )

    @classmethod
    def diagonal_stable(cls, alphas, scales, stream=None) -> "Driver":
        jumps = DiagonalStableJumps(np.asarray(alphas, dtype=float), np.asarray(scales, dtype=float))
        d = jumps.dim
        return cls(CylCharacteristics(np.zeros(d), np.zeros((d, d)), jumps), "diagonal-stable", stream=stream)

    @classmethod
    def sum_of(cls, *components: "Driver", stream=None) -> "Driver":
        if len(components) < 2:
            raise ValueError("a sum driver needs at least two components")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError("sum components must share the source dimension")
        return cls(None, "sum", components=tuple(components), stream=stream)

    # ------------------------------------------------------------- properties

    @property
    def dim(self) -> int:
        if self.kind == "sum":
            return self.components[0].dim
        return self.chars.dim

    @property
    def is_symmetric(self) -> bool:
        if self.kind == "sum":
            return all(c.is_symmetric for c in self.components)
        return self.chars.is_symmetric

    def mean_rate(self) -> np.ndarray | None:
        """E[increment over dt] / dt, when the mean exists."""
        if self.kind == "sum":
            parts = [c.mean_rate() for c in self.components]
            if any(p is None for p in parts):
                return None
            return np.sum(parts, axis=0)
        if self.kind == "gaussian":
            return self.chars.drift.copy()
        if self.kind == "compound-poisson":
            j = self.chars.jumps
            return self.chars.effective_drift + np.sum(j.rates[:, None] * j.atoms, axis=0)
        return None

    def covariance_rate(self) -> np.ndarray | None:
        """Cov[increment over dt] / dt, when second moments exist."""
        if self.kind == "sum":
            parts = [c.covariance_rate() for c in self.components]
            if any(p is None for p in parts):
                return None
            return np.sum(parts, axis=0)
        if self.kind == "gaussian":
            return self.chars.cov.copy()
        if self.kind == "compound-poisson":
            j = self.chars.jumps
            return self.chars.cov + (j.atoms * j.rates[:, None]).T @ j.atoms
        return None

    def log_symbol(self, g: np.ndarray) -> complex:
        if self.kind == "sum":
            return sum(c.log_symbol(g) for c in self.components)
        return log_symbol(self.chars, g)

    def symbol(self, g: np.ndarray, t: float = 1.0) -> complex:
        return complex(np.exp(t * self.log_symbol(g)))

    # --------------------------------------------------------------- sampling

    def _rng(self, rng: np.random.Generator | None) -> np.random.Generator:
        gen = rng if rng is not None else self.stream
        if gen is None:
            raise ValueError("no generator: pass rng or construct the driver with a stream")
        return gen

    def sample_g_increments(
        self,
        dt: float,
        shape,
        rng: np.random.Generator | None = None,
        with_counts: bool = False,
    ):
        """Independent increments of the source process over time step ``dt``.

        Returns an array of shape ``shape + (d,)``; with ``with_counts`` also
        the per-increment jump counts (zero for kinds without atoms).
        """
        gen = self._rng(rng)
        if dt <= 0:
            raise ValueError("dt must be positive")
        shape = tuple(np.atleast_1d(shape).astype(int)) if not isinstance(shape, tuple) else shape
        d = self.dim

        if self.kind == "sum":
            total = np.zeros(shape + (d,))
            counts = np.zeros(shape, dtype=int)
            for c in self.components:
                inc, cnt = c.sample_g_increments(dt, shape, gen, with_counts=True)
                total += inc
                counts += cnt
            return (total, counts) if with_counts else total

        counts = np.zeros(shape, dtype=int)
        out = np.zeros(shape + (d,))
        a_eff = self.chars.effective_drift
        if np.any(a_eff):
            out += dt * a_eff
        if self._cov_sqrt is not None:
            z = gen.standard_normal(shape + (d,))
            out += np.sqrt(dt) * (z @ self._cov_sqrt.T)

        if self.kind == "compound-poisson":
            j = self.chars.jumps
            k = gen.poisson(lam=j.rates * dt, size=shape + (j.rates.shape[0],))
            out += k @ j.atoms
            counts = k.sum(axis=-1)
        elif self.kind == "canonical-stable":
            alpha = self.chars.jumps.alpha
            s = positive_stable(alpha / 2.0, shape, gen)
            z = gen.standard_normal(shape + (d,))
            out += dt ** (1.0 / alpha) * np.sqrt(2.0 * s)[..., None] * z
        elif self.kind == "diagonal-stable":
            jr = self.chars.jumps
            for kcoord in range(d):
                sig = jr.scales[kcoord]
                if sig == 0.0:
                    continue
                alpha = jr.alphas[kcoord]
                s = positive_stable(alpha / 2.0, shape, gen)
                z = gen.standard_normal(shape)
                out[..., kcoord] += sig * dt ** (1.0 / alpha) * np.sqrt(2.0 * s) * z

        return (out, counts) if with_counts else out

    def sample_increment(self, phi: HSMap, dt: float, rng: np.random.Generator | None = None) -> np.ndarray:
        """One mapped increment over ``dt``: the map applied to a source increment."""
        inc = self.sample_g_increments(dt, (1,), rng)[0]
        return phi(inc)

    def sample_h_increments(self, phi: HSMap, dt: float, shape, rng=None) -> np.ndarray:
        return self.sample_g_increments(dt, shape, rng) @ phi.matrix.T


def _same_state(a, b) -> bool:
    # generator state dicts hold numpy arrays, so plain == does not reduce
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same_state(a[k], b[k]) for k in a)
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    return bool(a == b)


def decoupled_driver(driver: Driver, stream: np.random.Generator) -> Driver:
    """A copy of ``driver`` with identical characteristics and an independent stream.

    Rejects a stream that coincides with the driver's own (same object or same
    generator state — e.g. both derived from the same seed and key).
    """
    if stream is None:
        raise ValueError("a decoupled driver needs its own generator")
    if driver.stream is not None:
        if stream is driver.stream:
            raise ValueError("decoupled stream must not be the driver's own generator")
        if _same_state(stream.bit_generator.state, driver.stream.bit_generator.state):
            raise ValueError("decoupled stream has the same state as the driver's (same seed?)")
    return Driver(driver.chars, driver.kind, components=driver.components, stream=stream)


@dataclass(frozen=True)
class PathTable:
    """Increments of one mapped path over a partition, with seed provenance."""

    partition: Partition
    increments: np.ndarray
    seed: int
    counts: np.ndarray | None = None

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float).copy()
        if inc.shape[0] != self.partition.n_intervals:
            raise ValueError("one increment row per partition interval")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        if self.counts is not None:
            cnt = np.asarray(self.counts, dtype=int).copy()
            if cnt.shape[0] != inc.shape[0]:
                raise ValueError("one count per interval")
            cnt.setflags(write=False)
            object.__setattr__(self, "counts", cnt)

    @property
    def values(self) -> np.ndarray:
        """Cumulative path values at the partition points (zero at the start)."""
        out = np.zeros((self.partition.points.shape[0], self.increments.shape[1]))
        out[1:] = np.cumsum(self.increments, axis=0)
        return out

    @classmethod
    def sample(
        cls,
        driver: Driver,
        phi: HSMap,
        partition: Partition,
        seed: int,
    ) -> "PathTable":
        """Sample one path; deterministic in (driver parameters, seed)."""
        from .rng import derive

        gen = derive(seed, "path")
        widths = partition.widths
        rows = np.zeros((partition.n_intervals, phi.d_out))
        counts = np.zeros(partition.n_intervals, dtype=int)
        for i, dt in enumerate(widths):
            inc, cnt = driver.sample_g_increments(float(dt), (1,), gen, with_counts=True)
            rows[i] = phi(inc[0])
            counts[i] = cnt[0]
        return cls(partition, rows, seed=int(seed), counts=counts)

    @classmethod
    def aggregate(cls, fine: "PathTable", coarse: Partition) -> "PathTable":
        """Re-express a fine path on a nested coarser partition (increments sum)."""
        if not coarse.is_nested_in(fine.partition):
            raise ValueError("coarse partition is not nested in the fine one")
        idx = np.searchsorted(fine.partition.points, coarse.points)
        rows = np.add.reduceat(fine.increments, idx[:-1])
        counts = None
        if fine.counts is not None:
            counts = np.add.reduceat(fine.counts, idx[:-1])
        return cls(coarse, rows, seed=fine.seed, counts=counts)

    def to_csv(self, path) -> None:
        """Write rows ``t_end, x_1, ..., x_d`` (one per interval)."""
        with open(path, "w") as fh:
            d = self.increments.shape[1]
            fh.write("t," + ",".join(f"x{i+1}" for i in range(d)) + "\n")
            for t, row in zip(self.partition.points[1:], self.increments):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def driver_to_payload(driver: Driver) -> dict:
    if driver.kind == "sum":
        return {"kind": "sum", "components": [driver_to_payload(c) for c in driver.components]}
    out = {"kind": driver.kind}
    out.update(chars_to_payload(driver.chars))
    return out


def driver_from_payload(obj: dict) -> Driver:
    kind = obj.get("kind")
    if kind == "sum":
        extra = set(obj) - {"kind", "components"}
        if extra:
            raise ValueError(f"unknown fields in sum driver: {sorted(extra)}")
        return Driver.sum_of(*[driver_from_payload(c) for c in obj["components"]])
    extra = set(obj) - {"kind", "drift", "cov", "jumps"}
    if extra:
        raise ValueError(f"unknown fields in driver: {sorted(extra)}")
    chars = chars_from_payload({k: obj[k] for k in ("drift", "cov", "jumps") if k in obj})
    if kind not in _KINDS or kind == "sum":
        raise ValueError(f"unknown driver kind {kind!r}")
    return Driver(chars, kind)


Driver.to_payload = driver_to_payload
Driver.from_payload = staticmethod(driver_from_payload)
