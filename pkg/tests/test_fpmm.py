import random

import numpy as np
import pytest

from oracles import as_lists, blocks, mat_poly_add_term, mat_poly_eval, mat_poly_mul, naive_matmul
from pmmkit.errors import InsufficientResponses
from pmmkit.ff import MERSENNE61
from pmmkit.fpmm import (
    FpmmRequest,
    baseline_decode,
    baseline_make_queries,
    baseline_query_respond_decode,
    baseline_respond,
    baseline_setup,
    fpmm_decode,
    fpmm_make_queries,
    fpmm_server_encode,
    fpmm_server_respond,
)
from pmmkit.storage import build_store, random_library
from pmmkit.strategy import make_baseline_plan, make_fpmm_plan

P61 = MERSENNE61


def fpmm_setup(N=40, K=2, L=2, M=2, R=2, V=3, TA=2, TB=1, family="Delta1", p=P61, seed=0, thA=2, thB=3):
    libA = random_library("A", R, 4, 4, seed, p)
    libB = random_library("B", V, 4, 2, seed + 1, p)
    store = build_store(libB, N, K, M=M, lib_A=libA, L=L)
    plan = make_fpmm_plan(N, K, L, M, R, V, TA, TB, family=family)
    req = FpmmRequest(thA, thB, TA, TB, plan, noise_seed=seed + 2)
    return libA, libB, store, plan, req


def reference_tilde(lib, plan, noise, theta, side, p):
    """A~ or B~ as {exponent: block}, from the storage and query definitions."""
    K = plan.K
    if side == "A":
        parts, offs = plan.L, plan.degrees.b
    else:
        parts, offs = plan.M, plan.degrees.d
    poly = {}
    for r, X in enumerate(lib.matrices):
        if side == "A":
            grid = blocks(as_lists(X), X.shape[0] // parts, X.shape[1] // K)
            coeff = lambda j, k: (grid[j][k], k)  # A_{l,k} at x^{k-1}
        else:
            grid = blocks(as_lists(X), X.shape[0] // K, X.shape[1] // parts)
            coeff = lambda j, k: (grid[k][j], K - 1 - k)  # B_{k,m} at x^{K-k}
        for j in range(parts):
            for k in range(K):
                blk, e = coeff(j, k)
                if r + 1 == theta:
                    mat_poly_add_term(poly, e + offs[j], blk, p)
                for t in range(noise.shape[2]):
                    mat_poly_add_term(poly, e + offs[parts] + t, blk, p, int(noise[r, j, t]))
    return poly


@pytest.mark.parametrize("family", ["Delta1", "Delta2", "Delta3"])
def test_fpmm_matches_reference(family):
    libA, libB, store, plan, req = fpmm_setup(family=family)
    q = fpmm_make_queries(req, store.alpha, P61)
    fA = reference_tilde(libA, plan, q.noise_A, 2, "A", P61)
    fB = reference_tilde(libB, plan, q.noise_B, 3, "B", P61)
    g = mat_poly_mul(fA, fB, P61)
    assert max(g) == plan.delta
    # A~ noise sits at exponents b_{L+1} .. b_{L+1}+K+T_A-2
    b = plan.degrees.b
    assert {e for e in fA if e >= b[plan.L]} == set(range(b[plan.L], b[plan.L] + plan.K + 2 - 1))
    responses = []
    for i, a in enumerate(store.alpha):
        at, bt = fpmm_server_encode(store.shards_A[i], store.shards_B[i], q.values_A[i], q.values_B[i], P61)
        assert as_lists(at) == mat_poly_eval(fA, a, P61)
        assert as_lists(bt) == mat_poly_eval(fB, a, P61)
        y = fpmm_server_respond(store.shards_A[i], store.shards_B[i], q.values_A[i], q.values_B[i], P61)
        responses.append((a, y))
    want = naive_matmul(as_lists(libA.matrices[1]), as_lists(libB.matrices[2]), P61)
    rng = random.Random(1)
    for _ in range(10):
        assert as_lists(fpmm_decode(rng.sample(responses, plan.P), plan, P61)) == want
    with pytest.raises(InsufficientResponses):
        fpmm_decode(responses[: plan.P - 1], plan, P61)


def test_fpmm_threshold_single_block():
    plan = make_fpmm_plan(30, 6, 1, 1, 1, 1, 3, 3)
    assert plan.P == 27


def test_fpmm_request_validation():
    libA, libB, store, plan, _ = fpmm_setup()
    with pytest.raises(ValueError):
        FpmmRequest(3, 1, 2, 1, plan)
    with pytest.raises(ValueError):
        FpmmRequest(1, 4, 2, 1, plan)
    with pytest.raises(ValueError):
        FpmmRequest(1, 1, 1, 1, plan)


def baseline_fixture(K=3, R=2, V=2, TA=1, TB=2, N=12, p=P61, seed=0):
    libA = random_library("A", R, 3, 3 * K, seed, p)
    libB = random_library("B", V, 3 * K, 2, seed + 1, p)
    store = build_store(libB, N, K, lib_A=libA)
    plan = make_baseline_plan(N, K, R, V, TA, TB)
    return libA, libB, baseline_setup(store), plan


def test_baseline_storage_counts():
    libA, libB, bstore, plan = baseline_fixture()
    # R * V precomputed lambda x gamma products per server
    assert all(bstore.storage_elements(i) == 2 * 2 * 3 * 2 for i in range(12))


def test_baseline_products_are_shard_products():
    libA, libB, bstore, plan = baseline_fixture(K=2)
    a = bstore.alpha[3]
    Ab = blocks(as_lists(libA.matrices[0]), 3, 3)[0]
    Bb = [row[0] for row in blocks(as_lists(libB.matrices[1]), 3, 2)]
    ea = [[(x + y * a) % P61 for x, y in zip(r0, r1)] for r0, r1 in zip(Ab[0], Ab[1])]
    eb = [[(y + x * a) % P61 for x, y in zip(r0, r1)] for r0, r1 in zip(Bb[0], Bb[1])]
    assert as_lists(bstore.products[3][(1, 2)]) == naive_matmul(ea, eb, P61)


@pytest.mark.parametrize("K", [1, 2, 3])
def test_baseline_roundtrip(K):
    libA, libB, bstore, plan = baseline_fixture(K=K)
    assert plan.P == 3 * K + 2 - 2
    req = FpmmRequest(2, 1, 1, 2, plan, noise_seed=K)
    want = naive_matmul(as_lists(libA.matrices[1]), as_lists(libB.matrices[0]), P61)
    servers = random.Random(K).sample(range(12), plan.P)
    assert as_lists(baseline_query_respond_decode(bstore, req, servers)) == want


def test_baseline_needs_p_prime():
    libA, libB, bstore, plan = baseline_fixture()
    req = FpmmRequest(1, 1, 1, 2, plan, noise_seed=0)
    alpha = bstore.alpha[: plan.P - 1]
    queries, z = baseline_make_queries(req, alpha, P61)
    assert z.shape == (2, 2, 2)
    responses = [(a, baseline_respond(bstore.products[i], q, P61)) for i, (a, q) in enumerate(zip(alpha, queries))]
    with pytest.raises(InsufficientResponses):
        baseline_decode(responses, plan, P61)


def test_baseline_query_selector():
    libA, libB, bstore, plan = baseline_fixture()
    req = FpmmRequest(2, 1, 1, 2, plan, noiseless=True)
    queries, _ = baseline_make_queries(req, bstore.alpha, P61)
    for a, q in zip(bstore.alpha, queries):
        assert int(q[1, 0]) * pow(a, 3, P61) % P61 == 1
        assert int(q[0, 0]) == int(q[0, 1]) == int(q[1, 1]) == 0


def test_baseline_requires_single_blocks():
    libA = random_library("A", 1, 2, 4, 0, P61)
    libB = random_library("B", 1, 4, 2, 1, P61)
    with pytest.raises(ValueError):
        baseline_setup(build_store(libB, 5, 2, M=2, lib_A=libA))
    with pytest.raises(ValueError):
        baseline_setup(build_store(libB, 5, 2))
