"""Private and secure matrix multiplication (PSMM).

The master holds ``A`` and wants ``A @ B^(theta)`` from a library ``B^(1..V)``
stored in coded form across ``N`` servers.  It sends each server a share of
``A`` (masked by ``S`` noise matrices) and ``V*M`` query scalars (hiding
``theta`` with ``T`` noise terms).  Each server answers with one block
product; any ``P`` answers determine the result.

Every function that consumes randomness takes the noise explicitly, so the
audit module can enumerate noise through the same code path the protocol
uses.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InconsistentResponses,
    InsufficientResponses,
    ShapeMismatch,
    UncorrectableErrors,
)
from .ff import PrimeField, horner, interpolate_with_errors
from .matrix import (
    assemble,
    eval_block_poly,
    interpolate_blocks,
    linear_combination,
    mat_mul,
    partition,
    random_matrix,
    zeros,
)
from .strategy import Kind, StrategyPlan


@dataclass
class PsmmRequest:
    theta: int
    A: np.ndarray
    S: int
    T: int
    plan: StrategyPlan
    noise_seed: int | None = None
    noiseless: bool = False

    def __post_init__(self):
        if not 1 <= self.theta <= self.plan.V:
            raise ValueError(f"theta={self.theta} outside [1, {self.plan.V}]")
        if self.S < 1 or self.T < 1:
            raise ValueError("S and T must be >= 1")
        if self.plan.kind is not Kind.PSMM or (self.plan.S, self.plan.T) != (self.S, self.T):
            raise ValueError("plan was not built for this (S, T)")
        if self.plan.P > self.plan.N:
            raise ValueError("plan threshold exceeds N")

    def streams(self) -> tuple:
        """Independent generators for share noise and query noise."""
        share_ss, query_ss = np.random.SeedSequence(self.noise_seed).spawn(2)
        return np.random.default_rng(share_ss), np.random.default_rng(query_ss)


@dataclass
class Shares:
    values: list
    noise: list


@dataclass
class Queries:
    values: list  # per server: V x M object array of scalars
    noise: np.ndarray  # z[v-1, m-1, t-1]


def draw_share_noise(S: int, shape, rng, p: int) -> list:
    return [random_matrix(shape[0], shape[1], rng, p) for _ in range(S)]


def draw_query_noise(V: int, M: int, T: int, rng, p: int) -> np.ndarray:
    z = rng.integers(0, p, size=(V, M, T), dtype=np.uint64)
    return z.astype(object)


def share_terms(A: np.ndarray, plan: StrategyPlan, noise: list) -> list:
    """(exponent, block) terms of the share polynomial f(x)."""
    grid = partition(A, plan.L, plan.K)
    b = plan.degrees.b
    terms = []
    for l in range(1, plan.L + 1):
        for k in range(1, plan.K + 1):
            terms.append((b[l - 1] + k - 1, grid.block(l, k)))
    for t, Z in enumerate(noise, start=1):
        terms.append((b[plan.L] + t - 1, Z))
    return terms


def share_values(A, plan: StrategyPlan, alpha, noise: list, p: int) -> list:
    terms = share_terms(A, plan, noise)
    shape = terms[0][1].shape
    return [eval_block_poly(terms, a, shape, p) for a in alpha]


def share_matrix_A(req: PsmmRequest, alpha, p: int) -> Shares:
    plan = req.plan
    grid = partition(req.A, plan.L, plan.K)
    shape = grid.block_shape
    if req.noiseless:
        noise = [zeros(*shape) for _ in range(req.S)]
    else:
        noise = draw_share_noise(req.S, shape, req.streams()[0], p)
    return Shares(share_values(req.A, plan, alpha, noise, p), noise)


def selector_scalars(theta: int, V: int, M: int, d, noise_base: int, z, x: int, p: int) -> np.ndarray:
    """V x M values of ``sum_t z[v,m,t] x^{base+t-1} + [v=theta] x^{d_m}``."""
    out = zeros(V, M)
    T = z.shape[2]
    powers = [pow(x, noise_base + t, p) for t in range(T)]
    for v in range(V):
        for m in range(M):
            acc = sum(int(z[v, m, t]) * powers[t] for t in range(T))
            if v + 1 == theta:
                acc += pow(x, d[m], p)
            out[v, m] = acc % p
    return out


def query_values(theta: int, plan: StrategyPlan, alpha, z, p: int) -> list:
    d = plan.degrees.d
    return [selector_scalars(theta, plan.V, plan.M, d, d[plan.M], z, a, p) for a in alpha]


def make_queries(req: PsmmRequest, alpha, p: int) -> Queries:
    plan = req.plan
    if req.noiseless:
        z = np.zeros((plan.V, plan.M, req.T), dtype=object)
    else:
        z = draw_query_noise(plan.V, plan.M, req.T, req.streams()[1], p)
    return Queries(query_values(req.theta, plan, alpha, z, p), z)


def encode_stored(shard: dict, query: np.ndarray, p: int) -> np.ndarray:
    """Server-side ``B~_i = sum_{v,m} e_m^{(v)}(alpha_i) q_m^{(v)}(alpha_i)``."""
    V, M = query.shape
    try:
        blocks = [(query[v - 1, m - 1], shard[(v, m)]) for v in range(1, V + 1) for m in range(1, M + 1)]
    except KeyError as exc:
        raise ShapeMismatch(f"shard has no block {exc.args[0]} required by the query") from None
    shapes = {blk.shape for _, blk in blocks}
    if len(shapes) != 1:
        raise ShapeMismatch(f"stored blocks differ in shape: {shapes}")
    return linear_combination(blocks, shapes.pop(), p)


def server_encode_and_respond(shard: dict, share: np.ndarray, query: np.ndarray, p: int) -> np.ndarray:
    b_tilde = encode_stored(shard, query, p)
    try:
        return mat_mul(share, b_tilde, p)
    except DimensionMismatch as exc:
        raise ShapeMismatch(str(exc)) from None


# -- decoding -------------------------------------------------------------------

def _check_points(responses, P: int):
    if len(responses) < P:
        raise InsufficientResponses(f"need {P} responses, got {len(responses)}")
    xs = [int(a) for a, _ in responses]
    if len(set(xs)) != len(xs):
        raise InsufficientResponses("responses must come from distinct evaluation points")


def _eval_coeffs(coeffs: list, x: int, p: int) -> np.ndarray:
    flat = [c.reshape(-1) for c in coeffs]
    stacked = np.array(flat, dtype=object)
    acc = zeros(1, stacked.shape[1])[0]
    for row in reversed(range(len(coeffs))):
        acc = (acc * x + stacked[row]) % p
    return acc.reshape(coeffs[0].shape)


def interpolate_product(responses, P: int, p: int) -> list:
    """Coefficient blocks of g(x) from the first P responses; extras must agree."""
    _check_points(responses, P)
    xs = [int(a) for a, _ in responses[:P]]
    coeffs = interpolate_blocks(xs, [y for _, y in responses[:P]], p)
    for a, y in responses[P:]:
        if not np.array_equal(_eval_coeffs(coeffs, int(a), p), y % p):
            raise InconsistentResponses(f"response at alpha={a} disagrees with the interpolant")
    return coeffs


def extract_product(coeffs: list, emap: dict, L: int, M: int) -> np.ndarray:
    return assemble([[coeffs[emap[(l, m)]] for m in range(1, M + 1)] for l in range(1, L + 1)])


def decode(responses, plan: StrategyPlan, p: int) -> np.ndarray:
    """Recover ``C = A B^(theta)`` from (alpha_i, Y_i) pairs."""
    coeffs = interpolate_product(list(responses), plan.P, p)
    return extract_product(coeffs, plan.exponent_map, plan.L, plan.M)


def locate_errors(responses, P: int, E: int, p: int, rng) -> set:
    """Indices of responses off the degree-(P-1) curve, found on a random
    linear combination of the matrix entries."""
    size = responses[0][1].size
    c = rng.integers(0, p, size=size, dtype=np.uint64).astype(object)
    points = [(int(a), int(np.dot(y.reshape(-1), c) % p)) for a, y in responses]
    poly = interpolate_with_errors(points, P, E, field=PrimeField(p))
    coeffs = list(poly.coeffs)
    return {i for i, (x, y) in enumerate(points) if horner(coeffs, x, p) != y}


def decode_with_errors(responses, plan: StrategyPlan, E: int, p: int, seed=None, repeats: int = 2) -> np.ndarray:
    """Decode while tolerating up to ``E`` arbitrarily wrong responses."""
    responses = list(responses)
    if E == 0:
        return decode(responses, plan, p)
    P = plan.P
    if len(responses) < P + 2 * E:
        raise InsufficientResponses(f"need {P + 2 * E} responses to correct {E} errors, got {len(responses)}")
    _check_points(responses, P)
    # a block of the wrong shape is a known error; drop it before locating the rest
    shape = Counter(np.shape(y) for _, y in responses).most_common(1)[0][0]
    misshapen = [r for r in responses if np.shape(r[1]) != shape]
    if len(misshapen) > E:
        raise UncorrectableErrors(f"{len(misshapen)} misshapen responses, more than E={E}")
    responses = [r for r in responses if np.shape(r[1]) == shape]
    E_left = E - len(misshapen)
    rng = np.random.default_rng(seed)
    bad = set()
    if E_left:
        try:
            for _ in range(repeats):
                bad |= locate_errors(responses, P, E_left, p, rng)
        except (ValueError, UncorrectableErrors) as exc:
            raise UncorrectableErrors(f"error location failed: {exc}") from None
    if len(bad) > E_left:
        raise UncorrectableErrors(f"{len(bad) + len(misshapen)} responses flagged, more than E={E}")
    kept = [r for i, r in enumerate(responses) if i not in bad]
    try:
        return decode(kept, plan, p)
    except InconsistentResponses as exc:
        raise UncorrectableErrors(str(exc)) from None
