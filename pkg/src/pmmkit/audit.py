"""Executable secrecy and privacy checks.

Three modes:

* ``algebraic``: every mask matrix ``[alpha_i^{c+t-1}]`` seen by a colluding
  subset must be invertible, so the subset's view is a bijection of the noise.
* ``exhaustive``: over a tiny field, enumerate every noise assignment through
  the protocol's own query/share functions and compare the exact view
  distributions under each hypothesis (rational total-variation distance).
* ``sampled``: a chi-square two-sample test on projections of sampled views,
  for parameters too large to enumerate.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import chi2_contingency

from .errors import EnumerationTooLarge
from .ff import matrix_rank, null_space
from .fpmm import baseline_query_values, fpmm_query_values
from .matrix import as_field_matrix, mat_mul
from .psmm import encode_stored, query_values, share_values
from .storage import encode_library_B, LibraryB
from .strategy import Kind, StrategyPlan, make_baseline_plan, make_fpmm_plan, make_psmm_plan

ENUMERATION_LIMIT = 10**7
SUBSET_LIMIT = 10**5
SAMPLED_ALPHA = 0.001


@dataclass
class AuditReport:
    mode: str
    subsets_checked: int = 0
    violations: list = field(default_factory=list)
    tv: dict = field(default_factory=dict)  # "h1|h2" -> Fraction (exhaustive) or p-value (sampled)
    details: dict = field(default_factory=dict)

    @property
    def max_tv(self):
        return max(self.tv.values(), default=Fraction(0))

    @property
    def passed(self) -> bool:
        if self.violations:
            return False
        if self.mode == "exhaustive":
            return all(v == 0 for v in self.tv.values())
        if self.mode == "sampled":
            return self.details.get("combined_p", 1.0) > SAMPLED_ALPHA
        return True

    def merge(self, other: "AuditReport") -> "AuditReport":
        return AuditReport(
            self.mode,
            self.subsets_checked + other.subsets_checked,
            self.violations + other.violations,
            {**self.tv, **other.tv},
            {**self.details, **other.details},
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "subsets_checked": self.subsets_checked,
            "violations": self.violations,
            "tv": {k: str(v) for k, v in sorted(self.tv.items())},
            "details": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.details.items()},
        }


# -- algebraic ------------------------------------------------------------------------

def _subsets(n: int, width: int, subsets, limit: int, seed):
    if subsets == "all" or subsets is None:
        if math.comb(n, width) <= limit:
            return list(itertools.combinations(range(n), width))
        subsets = "sample"
    if subsets == "sample":
        rng = np.random.default_rng(seed)
        return [tuple(sorted(rng.choice(n, size=width, replace=False))) for _ in range(min(limit, 1000))]
    return [tuple(s) for s in subsets]


def check_mask_nonsingular(alpha, base_exponent: int, width: int, modulus: int, subsets="all", limit=SUBSET_LIMIT, seed=0) -> AuditReport:
    """Invertibility of ``[alpha_i^{base+t-1}]_{i in subset, t<=width}`` for each subset."""
    alpha = [int(a) % modulus for a in alpha]
    report = AuditReport("algebraic", details={"base_exponent": base_exponent, "width": width})
    if width > len(alpha):
        report.violations.append(f"width {width} exceeds N={len(alpha)}")
        return report
    for sub in _subsets(len(alpha), width, subsets, limit, seed):
        rows = [[pow(alpha[i], base_exponent + t, modulus) for t in range(width)] for i in sub]
        report.subsets_checked += 1
        if matrix_rank(rows, modulus) < width:
            report.violations.append(list(sub))
    return report


def audit_plan_masks(plan: StrategyPlan, alpha, modulus: int, limit=SUBSET_LIMIT) -> AuditReport:
    """All mask matrices a plan relies on, at their declared collusion sizes."""
    checks = []
    if plan.kind is Kind.PSMM:
        checks = [("S", plan.degrees.b[plan.L], plan.S), ("T", plan.degrees.d[plan.M], plan.T)]
    elif plan.kind is Kind.FPMM:
        checks = [("T_A", plan.degrees.b[plan.L], plan.T_A), ("T_B", plan.degrees.d[plan.M], plan.T_B)]
    else:
        checks = [("T'", 0, plan.t_prime)]
    report = AuditReport("algebraic")
    for name, base, width in checks:
        sub = check_mask_nonsingular(alpha, base, width, modulus, limit=limit)
        report = report.merge(AuditReport("algebraic", sub.subsets_checked, [[name] + v if isinstance(v, list) else v for v in sub.violations]))
        report.details[name] = {"base": base, "width": width, "subsets": sub.subsets_checked}
    return report


# -- view models -------------------------------------------------------------------------

def _flat(mats) -> tuple:
    return tuple(int(x) for m in mats for x in np.asarray(m).reshape(-1))


@dataclass
class _ViewModel:
    """A protocol view as a function of (hypothesis, noise vector)."""

    hypotheses: list
    noise_len: int
    view: object  # callable(h, noise tuple) -> tuple of ints


def _psmm_plan(params, N):
    return make_psmm_plan(
        N, params.get("K", 1), params.get("L", 1), params.get("M", 1), params.get("V", 2),
        params.get("S", 1), params.get("T", 1), family=params.get("family"), check_n=False,
    )


def _psmm_privacy_model(params, alpha, p, subset, include_responses) -> _ViewModel:
    plan = _psmm_plan(params, len(alpha))
    V, M, T = plan.V, plan.M, plan.T
    xs = [alpha[i] for i in subset]
    nz = V * M * T
    if not include_responses:
        def view(theta, noise):
            z = np.array(noise, dtype=object).reshape(V, M, T)
            return _flat(query_values(theta, plan, xs, z, p))
        return _ViewModel(list(range(1, V + 1)), nz, view)
    # Responses need concrete stored data and A; fix them (1x1 blocks) and add share noise.
    K, L, S = plan.K, plan.L, plan.S
    A = as_field_matrix([[(3 * i + j + 1) % p for j in range(K)] for i in range(L)], p)
    lib = LibraryB([as_field_matrix([[(v + 2 * k + m) % p for m in range(M)] for k in range(K)], p) for v in range(V)], p)
    shards = encode_library_B(lib, alpha, K, M)

    def view(theta, noise):
        z = np.array(noise[:nz], dtype=object).reshape(V, M, T)
        Z = [as_field_matrix([[noise[nz + s]]], p) for s in range(S)]
        qs = query_values(theta, plan, xs, z, p)
        shares = share_values(A, plan, xs, Z, p)
        ys = [mat_mul(sh, encode_stored(shards[i], q, p), p) for i, sh, q in zip(subset, shares, qs)]
        return _flat(qs) + _flat(shares) + _flat(ys)
    return _ViewModel(list(range(1, V + 1)), nz + S, view)


def _psmm_secrecy_model(params, alpha, p, subset) -> _ViewModel:
    plan = _psmm_plan(params, len(alpha))
    K, L, S = plan.K, plan.L, plan.S
    candidates = params.get("A_candidates") or [[[a] * K] * L for a in range(2)]
    mats = [as_field_matrix(a, p) for a in candidates]
    br, bc = mats[0].shape[0] // L, mats[0].shape[1] // K
    xs = [alpha[i] for i in subset]

    def view(h, noise):
        Z = [as_field_matrix(np.array(noise[s * br * bc:(s + 1) * br * bc]).reshape(br, bc), p) for s in range(S)]
        return _flat(share_values(mats[h], plan, xs, Z, p))
    return _ViewModel(list(range(len(mats))), S * br * bc, view)


def _fpmm_model(params, alpha, p, subset) -> _ViewModel:
    K, L, M = params.get("K", 1), params.get("L", 1), params.get("M", 1)
    R, V, TA, TB = params.get("R", 2), params.get("V", 2), params.get("T_A", 1), params.get("T_B", 1)
    plan = make_fpmm_plan(len(alpha), K, L, M, R, V, TA, TB, family=params.get("family"), check_n=False)
    xs = [alpha[i] for i in subset]
    na = R * L * TA

    def view(h, noise):
        z_A = np.array(noise[:na], dtype=object).reshape(R, L, TA)
        z_B = np.array(noise[na:], dtype=object).reshape(V, M, TB)
        qa, qb = fpmm_query_values(h[0], h[1], plan, xs, z_A, z_B, p)
        return _flat(qa) + _flat(qb)
    hyps = [(r, v) for r in range(1, R + 1) for v in range(1, V + 1)]
    return _ViewModel(hyps, na + V * M * TB, view)


def _baseline_model(params, alpha, p, subset) -> _ViewModel:
    K, R, V = params.get("K", 1), params.get("R", 2), params.get("V", 2)
    TA, TB = params.get("T_A", 1), params.get("T_B", 1)
    plan = make_baseline_plan(len(alpha), K, R, V, TA, TB, check_n=False)
    Tp = max(TA, TB)
    xs = [alpha[i] for i in subset]

    def view(h, noise):
        z = np.array(noise, dtype=object).reshape(R, V, Tp)
        return _flat(baseline_query_values(h[0], h[1], plan, xs, z, p))
    hyps = [(r, v) for r in range(1, R + 1) for v in range(1, V + 1)]
    return _ViewModel(hyps, R * V * Tp, view)


def _model(protocol, params, alpha, p, subset, include_responses=False) -> _ViewModel:
    if protocol == "psmm":
        return _psmm_privacy_model(params, alpha, p, subset, include_responses)
    if protocol == "psmm-secrecy":
        return _psmm_secrecy_model(params, alpha, p, subset)
    if protocol == "fpmm":
        return _fpmm_model(params, alpha, p, subset)
    if protocol == "baseline":
        return _baseline_model(params, alpha, p, subset)
    raise ValueError(f"unknown protocol {protocol!r}")


# -- exhaustive ------------------------------------------------------------------------------

def total_variation(c1: Counter, c2: Counter) -> Fraction:
    n1, n2 = sum(c1.values()), sum(c2.values())
    keys = set(c1) | set(c2)
    return sum((abs(Fraction(c1[k], n1) - Fraction(c2[k], n2)) for k in keys), Fraction(0)) / 2


def exhaustive_privacy_test(
    protocol: str = "psmm",
    params: dict | None = None,
    modulus: int = 5,
    alpha=(1, 2),
    subset_size: int = 1,
    subsets=None,
    noiseless: bool = False,
    include_responses: bool = False,
    limit: int = ENUMERATION_LIMIT,
) -> AuditReport:
    """Exact view distributions for every hypothesis; TV must be 0 for each pair.

    ``noiseless`` fixes the noise at zero, which should expose the index (TV = 1).
    """
    params = dict(params or {})
    p = modulus
    alpha = [int(a) % p for a in alpha]
    chosen = [tuple(s) for s in subsets] if subsets else list(itertools.combinations(range(len(alpha)), subset_size))
    report = AuditReport("exhaustive", details={"protocol": protocol, "modulus": p, "noiseless": noiseless})
    for sub in chosen:
        model = _model(protocol, params, alpha, p, sub, include_responses)
        space = 1 if noiseless else p ** model.noise_len
        work = space * len(model.hypotheses)
        if work > limit:
            raise EnumerationTooLarge(f"{work} noise assignments exceed the limit {limit}")
        noises = [(0,) * model.noise_len] if noiseless else itertools.product(range(p), repeat=model.noise_len)
        noises = list(noises)
        dists = {h: Counter(model.view(h, z) for z in noises) for h in model.hypotheses}
        report.subsets_checked += 1
        for h1, h2 in itertools.combinations(model.hypotheses, 2):
            report.tv[f"{list(sub)}:{h1}|{h2}"] = total_variation(dists[h1], dists[h2])
    report.details["max_tv"] = report.max_tv
    return report


# -- sampled ---------------------------------------------------------------------------------

def affine_view(model: _ViewModel, h, p: int) -> tuple:
    """Write the view as ``G @ noise + s_h`` by probing the (linear) view map."""
    n = model.noise_len
    s = np.array(model.view(h, (0,) * n), dtype=np.int64)
    cols = []
    for j in range(n):
        e = [0] * n
        e[j] = 1
        cols.append((np.array(model.view(h, tuple(e)), dtype=np.int64) - s) % p)
    G = np.stack(cols, axis=1) if cols else np.zeros((len(s), 0), dtype=np.int64)
    return G, s


def _chi2_p(a: np.ndarray, b: np.ndarray, p: int) -> float:
    table = np.stack([np.bincount(a, minlength=p), np.bincount(b, minlength=p)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(chi2_contingency(table)[1])


def sampled_privacy_test(
    protocol: str = "psmm",
    params: dict | None = None,
    modulus: int = 97,
    alpha=None,
    subset_size: int = 1,
    samples: int = 100_000,
    hypotheses=None,
    noiseless: bool = False,
    functionals: int = 8,
    seed: int = 0,
) -> AuditReport:
    """Chi-square comparison of sampled views under two hypotheses.

    Views are projected onto each coordinate, random linear functionals and
    (when the noise cannot cover the view) syndromes that annihilate the mask;
    the Bonferroni-corrected minimum p-value must exceed 0.001.
    """
    params = dict(params or {})
    p = modulus
    if p >= 1 << 31:
        raise ValueError("sampled test works on small fields only")
    if alpha is None:
        alpha = list(range(1, subset_size + 1))
    sub = tuple(range(subset_size))
    model = _model(protocol, params, [int(a) % p for a in alpha], p, sub)
    h1, h2 = hypotheses or model.hypotheses[:2]
    rng = np.random.default_rng(seed)
    G, s1 = affine_view(model, h1, p)
    _, s2 = affine_view(model, h2, p)
    projections = [np.eye(len(s1), dtype=np.int64)[i] for i in range(len(s1))]
    projections += [rng.integers(0, p, size=len(s1)) for _ in range(functionals)]
    syndromes = null_space([[int(x) for x in row] for row in G.T.tolist()], p) if G.size else [list(r) for r in np.eye(len(s1), dtype=int)]
    projections += [np.array(w, dtype=np.int64) for w in syndromes]

    def draw(s):
        if noiseless:
            return np.tile(s, (samples, 1))
        z = rng.integers(0, p, size=(samples, model.noise_len))
        return (z @ G.T + s) % p

    v1, v2 = draw(s1), draw(s2)
    pvals = [_chi2_p((v1 @ w) % p, (v2 @ w) % p, p) for w in projections]
    combined = min(1.0, min(pvals) * len(pvals))
    report = AuditReport("sampled", subsets_checked=1)
    report.tv[f"{h1}|{h2}"] = combined
    report.details.update({
        "protocol": protocol, "modulus": p, "samples": samples, "projections": len(pvals),
        "syndromes": len(syndromes), "combined_p": combined, "noiseless": noiseless,
    })
    return report
