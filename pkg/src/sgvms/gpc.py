"""Generalized polynomial chaos basis for independent uniform(0,1) inputs.

Provides total-degree multi-index enumeration, evaluation of the orthonormal
shifted-Legendre tensor basis, tensor-product Gauss quadrature realizing the
expectation operator, and weighted Gram matrices E[Phi_m w(xi) Phi_n].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

# Above this many basis functions the coupled systems stop being practical;
# treat it as a misconfiguration rather than letting memory blow up later.
MAX_BASIS_SIZE = 5_000_000


def enumerate_indices(q: int, p: int) -> list[tuple[int, ...]]:
    """All multi-indices of length q with total degree <= p, graded-lex order.

    Sorted by total degree first, then lexicographically on the tuple, so the
    zero index (constant mode) always comes first.  The count is the binomial
    coefficient (q+p)!/(q!p!).
    """
    if q < 1:
        raise ConfigurationError(f"stochastic dimension must be >= 1, got {q}")
    if p < 0:
        raise ConfigurationError(f"total degree must be >= 0, got {p}")
    count = comb(q + p, q)
    if count > MAX_BASIS_SIZE:
        raise ConfigurationError(
            f"basis size (q+p)!/(q!p!) = {count} exceeds limit {MAX_BASIS_SIZE}"
        )

    indices: list[tuple[int, ...]] = []

    def extend(prefix: tuple[int, ...], remaining: int) -> None:
        if len(prefix) == q - 1:
            for d in range(remaining + 1):
                indices.append(prefix + (d,))
            return
        for d in range(remaining + 1):
            extend(prefix + (d,), remaining - d)

    extend((), p)
    indices.sort(key=lambda m: (sum(m), m))
    assert len(indices) == count
    return indices


def legendre_01(max_degree: int, x) -> np.ndarray:
    """Orthonormal shifted Legendre values phi_0..phi_max at points x in [0,1].

    Built from the three-term recurrence of the classical Legendre family on
    the mapped variable t = 2x - 1, then scaled by sqrt(2k+1) so that
    int_0^1 phi_j phi_k dx = delta_jk.  Returns shape x.shape + (max_degree+1,).
    """
    x = np.asarray(x, dtype=float)
    t = 2.0 * x - 1.0
    vals = np.empty(x.shape + (max_degree + 1,))
    vals[..., 0] = 1.0
    if max_degree >= 1:
        vals[..., 1] = t
    for k in range(1, max_degree):
        vals[..., k + 1] = ((2 * k + 1) * t * vals[..., k] - k * vals[..., k - 1]) / (k + 1)
    scale = np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)
    return vals * scale


@dataclass(frozen=True)
class GpcBasis:
    """Total-degree-<= p orthonormal polynomial basis in q uniform(0,1) variables."""

    q: int
    p: int
    indices: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(enumerate_indices(self.q, self.p)))
        object.__setattr__(
            self, "_rank", {m: r for r, m in enumerate(self.indices)}
        )

    @property
    def size(self) -> int:
        return len(self.indices)

    def rank(self, m: Sequence[int]) -> int:
        """Position of multi-index m in the canonical (graded-lex) ordering."""
        key = tuple(m)
        try:
            return self._rank[key]
        except KeyError:
            raise ValueError(f"multi-index {key} not in basis (q={self.q}, p={self.p})")

    def total_orders(self) -> np.ndarray:
        return np.array([sum(m) for m in self.indices])

    def eval_index(self, m: Sequence[int], xi) -> np.ndarray | float:
        """Phi_m(xi) = prod_i phi_{m_i}(xi_i) for xi of shape (..., q)."""
        self.rank(m)  # membership check
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        uni = legendre_01(self.p, xi)  # (npts, q, p+1)
        out = np.ones(xi.shape[0])
        for i, deg in enumerate(m):
            out = out * uni[:, i, deg]
        return out if out.size > 1 else float(out[0])

    def eval_all(self, xi) -> np.ndarray:
        """All basis values at points xi of shape (npts, q); returns (npts, size)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.q:
            raise ValueError(f"points must have {self.q} coordinates, got {xi.shape[1]}")
        uni = legendre_01(self.p, xi)  # (npts, q, p+1)
        out = np.ones((xi.shape[0], self.size))
        for r, m in enumerate(self.indices):
            for i, deg in enumerate(m):
                if deg:
                    out[:, r] *= uni[:, i, deg]
        return out


def gauss_rule_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on (0,1) with weights summing to 1."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def default_node_count(p: int, weight_degree: int = 0) -> int:
    """Nodes per coordinate integrating Phi_m * w * Phi_n exactly, plus margin."""
    return (2 * p + weight_degree + 1 + 1) // 2 + 2


@dataclass(frozen=True)
class StochasticQuadrature:
    """Quadrature on (0,1)^q realizing the expectation against the uniform density.

    nodes: (n, q) points; weights: (n,) positive, summing to 1; degree: largest
    total polynomial degree integrated exactly per coordinate.
    """

    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    @classmethod
    def tensor_gauss(cls, q: int, n_per_coord: int) -> "StochasticQuadrature":
        x1, w1 = gauss_rule_01(n_per_coord)
        grids = np.meshgrid(*([x1] * q), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1)
        weights = np.ones(nodes.shape[0])
        wgrids = np.meshgrid(*([w1] * q), indexing="ij")
        for g in wgrids:
            weights *= g.ravel()
        return cls(nodes=nodes, weights=weights, degree=2 * n_per_coord - 1)

    def expectation(self, integrand: Callable[[np.ndarray], np.ndarray]) -> float | np.ndarray:
        """sum_j w_j * integrand(xi_j); integrand maps (n, q) -> (n,) or (n, ...)."""
        vals = np.asarray(integrand(self.nodes))
        return np.tensordot(self.weights, vals, axes=(0, 0))


def weighted_gram(
    basis: GpcBasis,
    weight: Callable[[np.ndarray], np.ndarray],
    quad: StochasticQuadrature,
) -> np.ndarray:
    """Matrix with entries E[Phi_m * weight(xi) * Phi_n], symmetric by construction."""
    w_vals = np.asarray(weight(quad.nodes), dtype=float)
    bad = ~np.isfinite(w_vals)
    if bad.any():
        j = int(np.argmax(bad))
        raise FloatingPointError(
            f"weight is not finite at quadrature node {j}: xi={quad.nodes[j]}"
        )
    phi = basis.eval_all(quad.nodes)  # (n, size)
    return phi.T @ (phi * (quad.weights * w_vals)[:, None])


def univariate_weighted_matrix(
    weight: Callable[[np.ndarray], np.ndarray], p: int, n_nodes: int
) -> np.ndarray:
    """(p+1)x(p+1) matrix int_0^1 w(t) phi_a(t) phi_b(t) dt by Gauss quadrature."""
    t, w = gauss_rule_01(n_nodes)
    wv = np.asarray(weight(t), dtype=float)
    if not np.all(np.isfinite(wv)):
        j = int(np.argmax(~np.isfinite(wv)))
        raise FloatingPointError(f"weight is not finite at quadrature node t={t[j]}")
    phi = legendre_01(p, t)  # (n, p+1)
    return phi.T @ (phi * (w * wv)[:, None])


def univariate_weighted_vector(
    weight: Callable[[np.ndarray], np.ndarray], p: int, n_nodes: int
) -> np.ndarray:
    """(p+1,) vector int_0^1 w(t) phi_a(t) dt by Gauss quadrature."""
    t, w = gauss_rule_01(n_nodes)
    wv = np.asarray(weight(t), dtype=float)
    phi = legendre_01(p, t)
    return phi.T @ (w * wv)


def active_coordinate_pairs(basis: GpcBasis, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Index bookkeeping for blocks E[Phi_m w(xi_k) Phi_n].

    Independence factorizes the expectation: the entry vanishes unless m and n
    agree on every coordinate except k (0-based), where a univariate integral
    of degree pair (m_k, n_k) remains.  Returns flat arrays (rows, cols,
    deg_row, deg_col) covering exactly the structurally nonzero entries.
    """
    groups: dict[tuple[int, ...], list[int]] = {}
    for r, m in enumerate(basis.indices):
        key = m[:k] + m[k + 1 :]
        groups.setdefault(key, []).append(r)
    rows, cols, da, db = [], [], [], []
    for members in groups.values():
        for a in members:
            for b in members:
                rows.append(a)
                cols.append(b)
                da.append(basis.indices[a][k])
                db.append(basis.indices[b][k])
    return (np.array(rows), np.array(cols), np.array(da), np.array(db))
