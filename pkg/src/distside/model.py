"""Discrete source / side-information model and information primitives.

All information quantities are in nats. A :class:`DiscreteInstance` holds the
source law ``p_x``, the side-information law ``p_q`` and the distortion tensor
``dist[x, xhat, q]``; source and side information are independent, so the
joint law is always ``p_x (x) p_q``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

MAX_ALPHABET = 256
PROB_ATOL = 1e-12
TINY = 1e-15


class ModelError(ValueError):
    """Raised when an instance, channel or distortion table is malformed."""


def _as_prob(p, name: str, atol: float = PROB_ATOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ModelError(f"{name} must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ModelError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > atol:
        raise ModelError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteInstance:
    """Finite source coding problem with distortion side information.

    Parameters
    ----------
    p_x : array (|X|,)
        Source law.
    p_q : array (|Q|,)
        Side-information law, independent of the source.
    dist : array (|X|, |Xhat|, |Q|)
        Nonnegative distortion ``d(x, xhat, q)``.
    """

    p_x: np.ndarray
    p_q: np.ndarray
    dist: np.ndarray

    def __post_init__(self):
        p_x = _as_prob(self.p_x, "p_x")
        p_q = _as_prob(self.p_q, "p_q")
        dist = np.asarray(self.dist, dtype=float)
        if dist.ndim != 3:
            raise ModelError("dist must have shape (|X|, |Xhat|, |Q|)")
        if dist.shape[0] != p_x.size or dist.shape[2] != p_q.size:
            raise ModelError(
                f"dist shape {dist.shape} does not match |X|={p_x.size}, |Q|={p_q.size}"
            )
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise ModelError("dist must be finite and nonnegative")
        if max(dist.shape) > MAX_ALPHABET:
            raise ModelError(f"alphabet sizes are capped at {MAX_ALPHABET}")
        object.__setattr__(self, "p_x", _frozen(p_x))
        object.__setattr__(self, "p_q", _frozen(p_q))
        object.__setattr__(self, "dist", _frozen(dist))

    @property
    def n_source(self) -> int:
        return self.dist.shape[0]

    @property
    def n_recon(self) -> int:
        return self.dist.shape[1]

    @property
    def n_side(self) -> int:
        return self.dist.shape[2]

    def averaged_distortion(self) -> np.ndarray:
        """``sum_q p(q) d(x, xhat, q)``, the measure seen by a q-blind system."""
        return self.dist @ self.p_q

    def min_distortion(self) -> float:
        """Smallest achievable expected distortion with q known where it matters."""
        return float(self.p_x @ self.dist.min(axis=1) @ self.p_q)

    def max_distortion(self) -> float:
        """Distortion of the best constant reconstruction (the zero-rate point)."""
        return float((self.p_x @ self.averaged_distortion()).min())

    def with_constant_side_info(self, q: int = 0) -> "DiscreteInstance":
        """Same source and distortion restricted to a single side value."""
        return DiscreteInstance(self.p_x, np.ones(1), self.dist[:, :, q : q + 1])

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_size": self.n_source,
            "recon_size": self.n_recon,
            "side_size": self.n_side,
            "p_x": self.p_x.tolist(),
            "p_q": self.p_q.tolist(),
            "dist": self.dist.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "DiscreteInstance":
        try:
            inst = cls(doc["p_x"], doc["p_q"], doc["dist"])
        except KeyError as exc:
            raise ModelError(f"instance document missing key {exc}") from None
        sizes = (doc.get("source_size"), doc.get("recon_size"), doc.get("side_size"))
        for declared, actual in zip(sizes, inst.dist.shape):
            if declared is not None and declared != actual:
                raise ModelError(
                    f"declared alphabet sizes {sizes} disagree with dist shape {inst.dist.shape}"
                )
        return inst

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "DiscreteInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ConditionalChannel:
    """Row-stochastic kernel.

    ``kernel[x, xhat]`` conditions on x alone; ``kernel[x, q, xhat]`` conditions
    on the pair (x, q). The last axis is always the output symbol.
    """

    kernel: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim not in (2, 3):
            raise ModelError("channel kernel must be 2-D (x) or 3-D (x, q)")
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise ModelError("channel kernel has negative or non-finite entries")
        if np.max(np.abs(k.sum(axis=-1) - 1.0)) > PROB_ATOL:
            raise ModelError("channel rows must sum to 1")
        object.__setattr__(self, "kernel", _frozen(k))

    @property
    def conditioning(self) -> str:
        return "x" if self.kernel.ndim == 2 else "xq"


def mutual_information(joint) -> float:
    """Mutual information (nats) of a two-dimensional joint pmf.

    Entries below ``1e-15`` are treated as exact zeros (``0 ln 0 = 0``).
    """
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise ModelError("joint must be a matrix")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ModelError("joint has negative or non-finite entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ModelError(f"joint mass is {p.sum()!r}, not 1")
    p = np.where(p < TINY, 0.0, p)
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    mask = p > 0
    ratio = p[mask] / (pa @ pb)[mask]
    return max(float(np.sum(p[mask] * np.log(ratio))), 0.0)


def entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p >= TINY]
    return float(-np.sum(p * np.log(p)))


def expected_distortion(
    instance: DiscreteInstance, channel: ConditionalChannel, conditioning: str | None = None
) -> float:
    """E[d(x, xhat, q)] under ``p_x (x) p_q`` and the given channel."""
    conditioning = conditioning or channel.conditioning
    k = channel.kernel
    if conditioning != channel.conditioning:
        raise ModelError(
            f"channel conditions on {channel.conditioning!r}, requested {conditioning!r}"
        )
    if conditioning == "x":
        if k.shape != (instance.n_source, instance.n_recon):
            raise ModelError(f"channel shape {k.shape} does not match instance")
        return float(np.einsum("x,xy,xyq,q->", instance.p_x, k, instance.dist, instance.p_q))
    if conditioning == "xq":
        if k.shape != (instance.n_source, instance.n_side, instance.n_recon):
            raise ModelError(f"channel shape {k.shape} does not match instance")
        return float(np.einsum("x,xqy,xyq,q->", instance.p_x, k, instance.dist, instance.p_q))
    raise ModelError(f"unknown conditioning {conditioning!r}")


def make_scaled_distortion(d0, d1) -> np.ndarray:
    """Separable measure ``dist[x, xhat, q] = d0[q] * d1[x, xhat]``."""
    d0 = np.asarray(d0, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    if d0.ndim != 1 or d1.ndim != 2:
        raise ModelError("d0 must be a vector over Q and d1 a matrix over X x Xhat")
    if np.any(d0 < 0) or np.any(d1 < 0):
        raise ModelError("scaled distortion factors must be nonnegative")
    return d1[:, :, None] * d0[None, None, :]


def check_group_table(table) -> np.ndarray:
    """Validate a Cayley table and return it as an int array.

    Exhaustively checks closure, associativity, a two-sided identity and
    inverses.
    """
    t = np.asarray(table)
    if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
        raise ModelError("group table must be square")
    if not np.issubdtype(t.dtype, np.integer):
        if not np.all(t == np.round(t)):
            raise ModelError("group table entries must be element indices")
        t = t.astype(int)
    g = t.shape[0]
    if t.min() < 0 or t.max() >= g:
        raise ModelError("group table is not closed")
    # (a*b)*c == a*(b*c) for all triples
    if not np.array_equal(t[t], t[np.arange(g)[:, None, None], t[None, :, :]]):
        raise ModelError("group table is not associative")
    ids = [e for e in range(g) if np.array_equal(t[e], np.arange(g)) and np.array_equal(t[:, e], np.arange(g))]
    if not ids:
        raise ModelError("group table has no identity")
    e = ids[0]
    for a in range(g):
        if not np.any((t[a] == e) & (t[:, a] == e)):
            raise ModelError(f"element {a} has no inverse")
    return t


def group_inverse(table: np.ndarray) -> np.ndarray:
    g = table.shape[0]
    e = next(i for i in range(g) if np.array_equal(table[i], np.arange(g)))
    return np.array([int(np.flatnonzero(table[a] == e)[0]) for a in range(g)])


def group_difference(table: np.ndarray) -> np.ndarray:
    """``diff[x, xhat] = xhat^-1 * x``, invariant under left translation."""
    inv = group_inverse(table)
    return table[inv[None, :], np.arange(table.shape[0])[:, None]]


def make_group_difference_distortion(table, profile) -> np.ndarray:
    """``dist[x, xhat, q] = profile[x (-) xhat, q]`` over a finite group."""
    t = check_group_table(table)
    profile = np.asarray(profile, dtype=float)
    if profile.ndim != 2 or profile.shape[0] != t.shape[0]:
        raise ModelError("profile must be a (|G|, |Q|) matrix")
    if np.any(profile < 0):
        raise ModelError("profile must be nonnegative")
    return profile[group_difference(t)]


def cyclic_group(order: int) -> np.ndarray:
    a = np.arange(order)
    return (a[:, None] + a[None, :]) % order


def hamming(size: int) -> np.ndarray:
    return 1.0 - np.eye(size)


def cyclic_squared(size: int) -> np.ndarray:
    a = np.arange(size)
    diff = np.abs(a[:, None] - a[None, :])
    return np.minimum(diff, size - diff).astype(float) ** 2


def uniform(size: int) -> np.ndarray:
    return np.full(size, 1.0 / size)


def group_instance(table, profile, p_q) -> DiscreteInstance:
    """Uniform source over a group with a group-difference distortion."""
    t = check_group_table(table)
    return DiscreteInstance(uniform(t.shape[0]), p_q, make_group_difference_distortion(t, profile))


def scaled_instance(p_x, d0, d1, p_q) -> DiscreteInstance:
    return DiscreteInstance(p_x, p_q, make_scaled_distortion(d0, d1))


def erasure_instance(alphabet: int, relevant_prob: float) -> DiscreteInstance:
    """Uniform source, Hamming distortion switched off when q = 0."""
    return scaled_instance(
        uniform(alphabet), [0.0, 1.0], hamming(alphabet), [1 - relevant_prob, relevant_prob]
    )
