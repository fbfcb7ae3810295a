"""Vectors, Hilbert–Schmidt maps, contractions, and time partitions.

Everything lives on finite truncations of the two separable Hilbert spaces: the
source space is modelled as ``R^{d_G}`` and the target as ``R^{d_H}`` (both
default to dimension 8 at the constructors that create objects from scratch).
Vectors are plain float ndarrays; maps carry their matrices with the shape
``(d_H, d_G)`` so ``map @ g`` lands in the target space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_DIM",
    "HSMap",
    "Contraction",
    "Partition",
    "as_vector",
    "clip_norm",
    "spectral_norm",
    "project_basis",
    "rotation_align",
    "sample_contraction",
    "random_hs_map",
]

DEFAULT_DIM = 8

_SPECTRAL_TOL = 1e-9


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-d float vector, optionally of length ``dim``."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def clip_norm(h: np.ndarray) -> np.ndarray:
    """Radial retraction onto the closed unit ball.

    Returns ``h`` unchanged when ``norm(h) <= 1`` and ``h / norm(h)`` otherwise.
    Accepts a single vector or an ``(n, d)`` array of row vectors.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        n = float(np.linalg.norm(h))
        return h if n <= 1.0 else h / n
    norms = np.linalg.norm(h, axis=-1, keepdims=True)
    scale = np.where(norms > 1.0, norms, 1.0)
    return h / scale


def spectral_norm(matrix: np.ndarray) -> float:
    """Largest singular value of a 2-d real matrix."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if a.size == 0 or not np.any(a):
        return 0.0
    return float(np.linalg.norm(a, 2))


@dataclass(frozen=True)
class HSMap:
    """A Hilbert–Schmidt map between the truncation spaces.

    Attributes
    ----------
    matrix : ndarray, shape (d_out, d_in)
        Immutable after construction.
    hs_norm : float
        Frobenius norm, cached at construction; always consistent with the
        matrix to relative 1e-12.
    """

    matrix: np.ndarray
    hs_norm: float = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"expected a matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "hs_norm", float(np.linalg.norm(m)))

    @property
    def d_out(self) -> int:
        return self.matrix.shape[0]

    @property
    def d_in(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, g: np.ndarray) -> np.ndarray:
        """Apply to a vector (or rows of an ``(n, d_in)`` array)."""
        g = np.asarray(g, dtype=float)
        if g.ndim == 1:
            return self.matrix @ g
        return g @ self.matrix.T

    def adjoint_apply(self, u: np.ndarray) -> np.ndarray:
        """Apply the adjoint map to a target-space vector."""
        return self.matrix.T @ np.asarray(u, dtype=float)

    def __add__(self, other: "HSMap") -> "HSMap":
        return HSMap(self.matrix + other.matrix)

    def __sub__(self, other: "HSMap") -> "HSMap":
        return HSMap(self.matrix - other.matrix)

    def __neg__(self) -> "HSMap":
        return HSMap(-self.matrix)

    def __mul__(self, scalar: float) -> "HSMap":
        return HSMap(self.matrix * float(scalar))

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, d_out: int = DEFAULT_DIM, d_in: int = DEFAULT_DIM) -> "HSMap":
        return cls(np.zeros((d_out, d_in)))

    @classmethod
    def identity(cls, d: int = DEFAULT_DIM) -> "HSMap":
        return cls(np.eye(d))


@dataclass(frozen=True)
class Contraction:
    """A linear map with operator norm at most one.

    Construction validates the spectral norm (power iteration) against the
    tolerance ``1 + 1e-9`` and rejects anything larger.
    """

    matrix: np.ndarray
    operator_norm: float = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"expected a matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        norm = spectral_norm(m)
        if norm > 1.0 + _SPECTRAL_TOL:
            raise ValueError(f"not a contraction: operator norm {norm:.12g} exceeds 1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "operator_norm", norm)

    def __call__(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if h.ndim == 1:
            return self.matrix @ h
        return h @ self.matrix.T

    def compose(self, phi: HSMap) -> HSMap:
        """The map ``self ∘ phi`` (first ``phi``, then this contraction)."""
        return HSMap(self.matrix @ phi.matrix)

    @classmethod
    def identity(cls, d: int = DEFAULT_DIM) -> "Contraction":
        return cls(np.eye(d))


@dataclass(frozen=True)
class Partition:
    """A finite partition ``s = t_0 < t_1 < ... < t_N = t`` of a time interval."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.shape[0] < 2:
            raise ValueError("a partition needs at least two points")
        if not np.all(np.isfinite(p)):
            raise ValueError("partition has non-finite points")
        if not np.all(np.diff(p) > 0):
            raise ValueError("partition points must be strictly increasing")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def n_intervals(self) -> int:
        return self.points.shape[0] - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def mesh(self) -> float:
        return float(np.max(self.widths))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    @classmethod
    def dyadic(cls, exponent: int, start: float = 0.0, end: float = 1.0) -> "Partition":
        """The partition of ``[start, end]`` into ``2**exponent`` equal intervals."""
        if exponent < 0:
            raise ValueError("exponent must be nonnegative")
        return cls(np.linspace(start, end, 2**exponent + 1))

    @classmethod
    def regular(cls, n: int, start: float = 0.0, end: float = 1.0) -> "Partition":
        if n < 1:
            raise ValueError("need at least one interval")
        return cls(np.linspace(start, end, n + 1))

    def refine_with(self, other: "Partition") -> "Partition":
        """Common refinement (union of points); spans must agree."""
        if self.span != other.span:
            raise ValueError(f"cannot refine partitions with different spans {self.span} vs {other.span}")
        pts = np.union1d(self.points, other.points)
        return Partition(pts)

    def is_nested_in(self, finer: "Partition") -> bool:
        """True when every point of this partition appears in ``finer``."""
        return bool(np.all(np.isin(self.points, finer.points)))


def project_basis(phi: HSMap, n: int) -> HSMap:
    """Compose ``phi`` with the projection onto the first ``n`` source basis vectors.

    Columns beyond ``n`` are zeroed.  ``n`` at least the source dimension
    returns the map unchanged.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n >= phi.d_in:
        return phi
    m = phi.matrix.copy()
    m[:, n:] = 0.0
    return HSMap(m)


def rotation_align(h: np.ndarray, e: np.ndarray) -> Contraction:
    """The isometry rotating ``h`` onto the direction ``e``.

    Maps ``h`` to ``norm(h) * e``, acts as the identity on the orthogonal
    complement of ``span{e, h}``, and degenerates to ``sign * identity`` when
    ``h`` is parallel to ``e`` (the sign of the multiplier; ``+1`` for ``h = 0``).

    Parameters
    ----------
    h : ndarray
        Any vector.
    e : ndarray
        A unit vector (rejected otherwise).
    """
    h = as_vector(h)
    e = as_vector(e, dim=h.shape[0])
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise ValueError(f"e must be a unit vector, got norm {np.linalg.norm(e):.12g}")
    d = h.shape[0]
    nh = float(np.linalg.norm(h))
    if nh == 0.0:
        return Contraction(np.eye(d))
    w = h - (h @ e) * e
    nw = float(np.linalg.norm(w))
    if nw <= 1e-14 * nh:
        # h parallel to e: sign times the identity, sign(0) := +1.
        sign = -1.0 if (h @ e) < 0 else 1.0
        return Contraction(sign * np.eye(d))
    u2 = w / nw
    c = (h @ e) / nh
    s = nw / nh
    plane = np.column_stack([e, u2])
    rot = np.array([[c, s], [-s, c]])
    m = np.eye(d) - plane @ plane.T + plane @ rot @ plane.T
    return Contraction(m)


def _haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def sample_contraction(
    rng: np.random.Generator,
    d: int = DEFAULT_DIM,
    mode: str = "scaled-svd",
) -> Contraction:
    """Draw a random contraction of the target space.

    Modes
    -----
    ``orthogonal``
        Haar-distributed orthogonal matrix (norm exactly one).
    ``scaled-svd``
        ``U diag(s) V^T`` with Haar ``U, V`` and uniform singular values in [0, 1].
    ``rank-one``
        ``s * u v^T`` with unit ``u, v`` and uniform ``s`` in [0, 1].
    """
    if mode == "orthogonal":
        return Contraction(_haar_orthogonal(rng, d))
    if mode == "scaled-svd":
        u = _haar_orthogonal(rng, d)
        v = _haar_orthogonal(rng, d)
        s = rng.uniform(0.0, 1.0, size=d)
        return Contraction((u * s) @ v.T)
    if mode == "rank-one":
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        s = rng.uniform(0.0, 1.0)
        return Contraction(s * np.outer(u, v))
    raise ValueError(f"unknown contraction mode {mode!r}")


def random_hs_map(
    rng: np.random.Generator,
    d_out: int = DEFAULT_DIM,
    d_in: int = DEFAULT_DIM,
    scale: float = 1.0,
) -> HSMap:
    """A random map with i.i.d. normal entries scaled to hs_norm ~ ``scale``."""
    m = rng.standard_normal((d_out, d_in))
    m *= scale / np.linalg.norm(m)
    return HSMap(m)
