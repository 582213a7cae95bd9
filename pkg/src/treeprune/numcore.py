"""Numeric core: objective evaluation, subgradients, cuts, recycling.

For a support S of columns M_S, with ridge level gamma, the selection
objective is

    q(S; v) = 0.5 * v' (I_n + gamma * M_S M_S')^{-1} v
            = 0.5 * (v'v - u' A^{-1} u),   A = I/gamma + M_S' M_S,  u = M_S' v,

evaluated through the small |S| x |S| system rather than the n x n one. The
optimal weights are w* = A^{-1} u, and the fitted residual is
res = v - M_S w*. A subgradient of the set function in its convexified form
has components

    g_i = -(gamma / 2) * (M_i' res)^2        for every column i,

plus lambda * a_i in the penalized block form. Cuts built at a support stay
usable after the residual or penalty changes: only triangular solves against
the cached Cholesky factor of A are needed.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .rulespace import AttributeScheme, RuleSpace, attribute_values

_RHS_CACHE_CAP = 8


@dataclass
class Cut:
    """Affine underestimator value(z) = constant + gradient . z.

    `origin` is the support the cut was generated at; evaluating the cut at
    the origin's indicator vector returns `value_at_origin`, the objective
    there (constant + gradient . z0 == q(z0)).
    """

    constant: float
    gradient: np.ndarray
    origin: tuple[int, ...]
    value_at_origin: float

    def value(self, z: np.ndarray) -> float:
        return self.constant + float(self.gradient @ z)


class SupportFactorization:
    """Cholesky factor of A = I/gamma + M_S' M_S for one support.

    Holds everything needed to price a new residual against this support with
    back-substitutions only. Solved right-hand sides are memoized on the
    residual's byte fingerprint (small LRU, repeated objective/cut calls for
    the same residual cost one solve).
    """

    def __init__(self, rs: RuleSpace, gamma: float, support, tree: int | None = None):
        self.rs = rs
        self.gamma = float(gamma)
        self.support = tuple(int(c) for c in support)
        self.tree = tree
        if len(set(self.support)) != len(self.support):
            raise ValueError("support has duplicate columns")
        if tree is not None:
            cols = rs.tree_cols(tree)
            if any(c not in cols for c in self.support):
                raise ValueError(f"support not within tree {tree}")
        k = len(self.support)
        if k:
            M = rs.dense_columns(self.support)
            A = M.T @ M
            A[np.diag_indices(k)] += 1.0 / self.gamma
            self.gram = A
            self._cho = cho_factor(A, lower=True)
        else:
            self.gram = np.zeros((0, 0))
            self._cho = None
        self._rhs_cache: OrderedDict = OrderedDict()

    def solve(self, u: np.ndarray) -> np.ndarray:
        if self._cho is None:
            return np.zeros(0)
        return cho_solve(self._cho, u)

    def project(self, v: np.ndarray):
        """Return (u, w) = (M_S' v, A^{-1} M_S' v), memoized per residual."""
        key = (v.shape[0], hash(v.tobytes()))
        hit = self._rhs_cache.get(key)
        if hit is not None:
            self._rhs_cache.move_to_end(key)
            return hit
        if self.support:
            u = self.rs.mu[list(self.support)] * np.array(
                [v[self.rs.rows(c)].sum() for c in self.support])
            w = self.solve(u)
        else:
            u = np.zeros(0)
            w = np.zeros(0)
        self._rhs_cache[key] = (u, w)
        if len(self._rhs_cache) > _RHS_CACHE_CAP:
            self._rhs_cache.popitem(last=False)
        return u, w

    def objective(self, v: np.ndarray) -> float:
        u, w = self.project(v)
        return 0.5 * (float(v @ v) - float(u @ w))

    def weights(self, v: np.ndarray) -> np.ndarray:
        return self.project(v)[1].copy()

    def residual(self, v: np.ndarray) -> np.ndarray:
        _, w = self.project(v)
        res = v.astype(np.float64, copy=True)
        self.rs.scatter_add(res, self.support, -w)
        return res


class FactorCache:
    """LRU cache of SupportFactorizations keyed by (tree, support)."""

    def __init__(self, rs: RuleSpace, gamma: float, cap: int = 4096):
        self.rs = rs
        self.gamma = gamma
        self.cap = cap
        self._store: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, support, tree: int | None = None) -> SupportFactorization:
        key = (tree, tuple(int(c) for c in support))
        fact = self._store.get(key)
        if fact is not None:
            self._store.move_to_end(key)
            self.hits += 1
            return fact
        fact = SupportFactorization(self.rs, self.gamma, support, tree)
        self._store[key] = fact
        self.misses += 1
        if len(self._store) > self.cap:
            self._store.popitem(last=False)
        return fact


# --- module-level operations ------------------------------------------------

def objective_q(rs: RuleSpace, gamma: float, support, v: np.ndarray) -> float:
    """0.5 * v'(I + gamma M_S M_S')^{-1} v via the |S|-sized system."""
    return SupportFactorization(rs, gamma, support).objective(v)


def fit_weights(rs: RuleSpace, gamma: float, support, v: np.ndarray) -> np.ndarray:
    """Ridge-optimal weights on the support: (I/gamma + M_S'M_S)^{-1} M_S'v."""
    return SupportFactorization(rs, gamma, support).weights(v)


def residual_q(rs: RuleSpace, gamma: float, support, v: np.ndarray) -> np.ndarray:
    return SupportFactorization(rs, gamma, support).residual(v)


def subgradient_q(rs: RuleSpace, gamma: float, support, v: np.ndarray) -> np.ndarray:
    """Length-m subgradient: -(gamma/2) * (M_i' res)^2 for every column."""
    res = residual_q(rs, gamma, support, v)
    dots = rs.column_sums(res)
    return -(gamma / 2.0) * dots ** 2


def block_objective_qr(rs: RuleSpace, tree: int, gamma: float, lam: float,
                       scheme: AttributeScheme, support, r: np.ndarray) -> float:
    """Single-tree objective against residual r plus lambda * attribute sum."""
    fact = SupportFactorization(rs, gamma, support, tree)
    return fact.objective(r) + lam * _attr_sum(rs, scheme, support)


def block_subgradient_qr(rs: RuleSpace, tree: int, gamma: float, lam: float,
                         scheme: AttributeScheme, support, r: np.ndarray) -> np.ndarray:
    fact = SupportFactorization(rs, gamma, support, tree)
    res = fact.residual(r)
    dots = rs.tree_column_sums(tree, res)
    a = _block_attrs(rs, scheme, tree)
    return -(gamma / 2.0) * dots ** 2 + lam * a


def cut_at(fact: SupportFactorization, v: np.ndarray, lam: float = 0.0,
           scheme: AttributeScheme | None = None) -> Cut:
    """Tangent cut at the factorization's support, priced for residual v.

    Block factorizations produce gradients over the tree's columns and fold
    the lambda * attribute term into constant and gradient; global
    factorizations (tree=None) span all m columns with no penalty term.
    """
    rs = fact.rs
    u, w = fact.project(v)
    q_fit = 0.5 * (float(v @ v) - float(u @ w))
    res = v.astype(np.float64, copy=True)
    rs.scatter_add(res, fact.support, -w)

    if fact.tree is None:
        dots = rs.column_sums(res)
        grad = -(fact.gamma / 2.0) * dots ** 2
        offset = 0
        value = q_fit
    else:
        dots = rs.tree_column_sums(fact.tree, res)
        grad = -(fact.gamma / 2.0) * dots ** 2
        if lam != 0.0:
            if scheme is None:
                raise ValueError("penalized cut needs an attribute scheme")
            grad = grad + lam * _block_attrs(rs, scheme, fact.tree)
        offset = rs.trees[fact.tree].offset
        value = q_fit + lam * _attr_sum(rs, scheme, fact.support) if lam != 0.0 else q_fit

    grad_at_origin = sum(grad[c - offset] for c in fact.support)
    return Cut(constant=value - grad_at_origin, gradient=grad,
               origin=fact.support, value_at_origin=value)


def recycle_cut(fact: SupportFactorization, r_new: np.ndarray, lam: float = 0.0,
                scheme: AttributeScheme | None = None) -> Cut:
    """Re-price a pooled cut for a new residual / penalty without refactorizing."""
    return cut_at(fact, r_new, lam, scheme)


def _attr_sum(rs, scheme, support) -> float:
    if not support:
        return 0.0
    if scheme is None:
        raise ValueError("attribute scheme required")
    a = attribute_values(rs, scheme)
    return float(a[list(support)].sum())


def _block_attrs(rs, scheme, tree) -> np.ndarray:
    meta = rs.trees[tree]
    return attribute_values(rs, scheme)[meta.offset:meta.offset + meta.num_cols].astype(np.float64)


# --- fractional (relaxed) evaluation ------------------------------------------

def relaxed_objective_and_residual(rs: RuleSpace, gamma: float, z: np.ndarray,
                                   v: np.ndarray):
    """q at fractional z in [0,1]^m, plus res = (I + gamma M diag(z) M')^{-1} v.

    Scaling columns by sqrt(z_i) turns M diag(z) M' into an ordinary support
    product, so the same small-system identity applies.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (rs.m,):
        raise ValueError("z must have one entry per column")
    if z.min() < -1e-12 or z.max() > 1.0 + 1e-12:
        raise ValueError("z must lie in [0, 1]")
    support = np.flatnonzero(z > 0.0)
    if support.size == 0:
        return 0.5 * float(v @ v), v.astype(np.float64, copy=True)
    M = rs.dense_columns(support) * np.sqrt(z[support])
    A = M.T @ M
    A[np.diag_indices(support.size)] += 1.0 / gamma
    cho = cho_factor(A, lower=True)
    u = M.T @ v
    w = cho_solve(cho, u)
    value = 0.5 * (float(v @ v) - float(u @ w))
    res = v - M @ w
    return value, res


def relaxed_cut(rs: RuleSpace, gamma: float, z: np.ndarray, v: np.ndarray,
                lam: float = 0.0,
                scheme: AttributeScheme | None = None) -> Cut:
    """Global tangent cut at fractional z (gradients use unscaled columns)."""
    value, res = relaxed_objective_and_residual(rs, gamma, z, v)
    dots = rs.column_sums(res)
    grad = -(gamma / 2.0) * dots ** 2
    if lam != 0.0:
        if scheme is None:
            raise ValueError("penalized cut needs an attribute scheme")
        grad = grad + lam * attribute_values(rs, scheme).astype(np.float64)
        value = value + lam * float(attribute_values(rs, scheme) @ z)
    origin = tuple(int(c) for c in np.flatnonzero(z > 0.0))
    return Cut(constant=value - float(grad @ z), gradient=grad,
               origin=origin, value_at_origin=value)
