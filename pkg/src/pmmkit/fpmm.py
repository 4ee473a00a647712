"""Fully private matrix multiplication (FPMM) and the precomputed-products baseline.

In FPMM both operands live in coded storage and both indices are private.
Each server mixes its library-A shards with ``R*L`` query scalars and its
library-B shards with ``V*M`` scalars, then multiplies the two results.

The baseline needs ``L = M = 1``.  Each server precomputes every pairwise
product of its A and B shards, so a single ``R*V`` query selects one product.
The query's ``x^{-K}`` selector is applied as a shift: the master multiplies
each response by ``alpha_i^K`` before interpolating.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch
from .matrix import linear_combination, mat_mul, scale, zeros
from .psmm import (
    decode as psmm_decode,
    draw_query_noise,
    encode_stored,
    extract_product,
    interpolate_product,
    selector_scalars,
)
from .strategy import Kind, StrategyPlan


@dataclass
class FpmmRequest:
    theta_A: int
    theta_B: int
    T_A: int
    T_B: int
    plan: StrategyPlan
    noise_seed: int | None = None
    noiseless: bool = False

    def __post_init__(self):
        plan = self.plan
        if not 1 <= self.theta_A <= plan.R:
            raise ValueError(f"theta_A={self.theta_A} outside [1, {plan.R}]")
        if not 1 <= self.theta_B <= plan.V:
            raise ValueError(f"theta_B={self.theta_B} outside [1, {plan.V}]")
        if self.T_A < 1 or self.T_B < 1:
            raise ValueError("T_A and T_B must be >= 1")
        if plan.kind not in (Kind.FPMM, Kind.BASELINE) or (plan.T_A, plan.T_B) != (self.T_A, self.T_B):
            raise ValueError("plan was not built for this (T_A, T_B)")
        if plan.P > plan.N:
            raise ValueError("plan threshold exceeds N")

    def streams(self) -> tuple:
        a_ss, b_ss = np.random.SeedSequence(self.noise_seed).spawn(2)
        return np.random.default_rng(a_ss), np.random.default_rng(b_ss)


@dataclass
class FpmmQueries:
    values_A: list  # per server: R x L
    values_B: list  # per server: V x M
    noise_A: np.ndarray  # z~[r-1, l-1, t-1]
    noise_B: np.ndarray  # z[v-1, m-1, t-1]


def fpmm_query_values(theta_A, theta_B, plan: StrategyPlan, alpha, z_A, z_B, p: int) -> tuple:
    b, d = plan.degrees.b, plan.degrees.d
    qa = [selector_scalars(theta_A, plan.R, plan.L, b, b[plan.L], z_A, a, p) for a in alpha]
    qb = [selector_scalars(theta_B, plan.V, plan.M, d, d[plan.M], z_B, a, p) for a in alpha]
    return qa, qb


def fpmm_make_queries(req: FpmmRequest, alpha, p: int) -> FpmmQueries:
    plan = req.plan
    if req.noiseless:
        z_A = np.zeros((plan.R, plan.L, req.T_A), dtype=object)
        z_B = np.zeros((plan.V, plan.M, req.T_B), dtype=object)
    else:
        rng_a, rng_b = req.streams()
        z_A = draw_query_noise(plan.R, plan.L, req.T_A, rng_a, p)
        z_B = draw_query_noise(plan.V, plan.M, req.T_B, rng_b, p)
    qa, qb = fpmm_query_values(req.theta_A, req.theta_B, plan, alpha, z_A, z_B, p)
    return FpmmQueries(qa, qb, z_A, z_B)


def fpmm_server_encode(shard_A: dict, shard_B: dict, query_A, query_B, p: int) -> tuple:
    """Return ``(A~_i, B~_i)``; both are plain linear mixes of stored blocks."""
    return encode_stored(shard_A, query_A, p), encode_stored(shard_B, query_B, p)


def fpmm_server_respond(shard_A: dict, shard_B: dict, query_A, query_B, p: int) -> np.ndarray:
    a_tilde, b_tilde = fpmm_server_encode(shard_A, shard_B, query_A, query_B, p)
    try:
        return mat_mul(a_tilde, b_tilde, p)
    except DimensionMismatch as exc:
        raise ShapeMismatch(str(exc)) from None


def fpmm_decode(responses, plan: StrategyPlan, p: int) -> np.ndarray:
    return psmm_decode(responses, plan, p)


# -- baseline ---------------------------------------------------------------------

@dataclass
class BaselineStore:
    modulus: int
    alpha: tuple
    K: int
    R: int
    V: int
    products: list  # per server: {(r, v): block}

    def storage_elements(self, server: int = 0) -> int:
        return sum(blk.size for blk in self.products[server].values())


def baseline_setup(store) -> BaselineStore:
    if store.L != 1 or store.M != 1:
        raise ValueError("the baseline needs storage encoded with L = M = 1")
    if store.shards_A is None:
        raise ValueError("the baseline needs library A in storage")
    p = store.modulus
    products = []
    for sa, sb in zip(store.shards_A, store.shards_B):
        products.append({
            (r, v): mat_mul(sa[(r, 1)], sb[(v, 1)], p)
            for r in range(1, store.R + 1)
            for v in range(1, store.V + 1)
        })
    return BaselineStore(p, tuple(store.alpha), store.K, store.R, store.V, products)


def baseline_query_values(theta_A, theta_B, plan: StrategyPlan, alpha, z, p: int) -> list:
    """Per server an R x V array of ``sum_t z x^{t-1} + [selected] x^{-K}``."""
    R, V = plan.R, plan.V
    Tp = z.shape[2]
    out = []
    for a in alpha:
        powers = [pow(a, t, p) for t in range(Tp)]
        sel = pow(pow(a, plan.K, p), -1, p)
        q = zeros(R, V)
        for r in range(R):
            for v in range(V):
                acc = sum(int(z[r, v, t]) * powers[t] for t in range(Tp))
                if (r + 1, v + 1) == (theta_A, theta_B):
                    acc += sel
                q[r, v] = acc % p
        out.append(q)
    return out


def baseline_make_queries(req: FpmmRequest, alpha, p: int) -> tuple:
    """Return ``(queries, noise)``; noise has shape (R, V, T')."""
    plan = req.plan
    Tp = max(req.T_A, req.T_B)
    if req.noiseless:
        z = np.zeros((plan.R, plan.V, Tp), dtype=object)
    else:
        z = draw_query_noise(plan.R, plan.V, Tp, req.streams()[0], p)
    return baseline_query_values(req.theta_A, req.theta_B, plan, alpha, z, p), z


def baseline_respond(products: dict, query: np.ndarray, p: int) -> np.ndarray:
    R, V = query.shape
    try:
        terms = [(query[r - 1, v - 1], products[(r, v)]) for r in range(1, R + 1) for v in range(1, V + 1)]
    except KeyError as exc:
        raise ShapeMismatch(f"no stored product {exc.args[0]}") from None
    return linear_combination(terms, terms[0][1].shape, p)


def baseline_decode(responses, plan: StrategyPlan, p: int) -> np.ndarray:
    shifted = [(a, scale(y, pow(int(a), plan.K, p), p)) for a, y in responses]
    coeffs = interpolate_product(shifted, plan.P, p)
    return extract_product(coeffs, plan.exponent_map, 1, 1)


def baseline_query_respond_decode(bstore: BaselineStore, req: FpmmRequest, servers=None) -> np.ndarray:
    """Run the whole baseline round against ``servers`` (default: all)."""
    p = bstore.modulus
    servers = range(len(bstore.alpha)) if servers is None else list(servers)
    alpha = [bstore.alpha[i] for i in servers]
    queries, _ = baseline_make_queries(req, alpha, p)
    responses = [(a, baseline_respond(bstore.products[i], q, p)) for i, a, q in zip(servers, alpha, queries)]
    return baseline_decode(responses, req.plan, p)
