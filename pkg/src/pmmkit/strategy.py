"""Degree-parameter families, achievability checking and recovery thresholds.

A strategy is fixed by degree offsets ``b = (b_1..b_{L+1})`` and
``d = (d_1..d_{M+1})``.  The A-side encoding places row-group ``l`` at
exponents ``b_l .. b_l+K-1`` and ``S`` masks from ``b_{L+1}``; the B-side
places column-group ``m`` at ``d_m .. d_m+K-1`` and ``K+T-1`` aligned
interference terms from ``d_{M+1}``.  The desired block ``C_{l,m}`` is the
product-polynomial coefficient at ``K-1+b_l+d_m``.

FPMM reuses the PSMM algebra with ``S -> K+T_A-1`` and ``T -> T_B``: its A-side
carries ``K+T_A-1`` aligned terms instead of ``S`` masks.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import InfeasiblePlan, NotAchievable


class Family(str, enum.Enum):
    DELTA1 = "Delta1"
    DELTA2 = "Delta2"
    DELTA3 = "Delta3"


# Preference order when several families reach the same threshold.
TIE_ORDER = (Family.DELTA3, Family.DELTA1, Family.DELTA2)


class Kind(str, enum.Enum):
    PSMM = "psmm"
    FPMM = "fpmm"
    BASELINE = "baseline"


@dataclass(frozen=True)
class DegreeParams:
    b: tuple
    d: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(int(x) for x in self.b))
        object.__setattr__(self, "d", tuple(int(x) for x in self.d))
        if any(x < 0 for x in self.b + self.d):
            raise ValueError("degree parameters must be nonnegative")

    @property
    def L(self) -> int:
        return len(self.b) - 1

    @property
    def M(self) -> int:
        return len(self.d) - 1


def _positive(**kw):
    for name, value in kw.items():
        if int(value) < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")


def psmm_family(tag, L: int, M: int, K: int, S: int, T: int) -> DegreeParams:
    _positive(L=L, M=M, K=K, S=S, T=T)
    tag = Family(tag)
    if tag is Family.DELTA1:
        step = K * M + K + T - 1
        b = [(l - 1) * step for l in range(1, L + 1)] + [(L - 1) * step + K * M]
        d = [(m - 1) * K for m in range(1, M + 1)] + [K * M]
    elif tag is Family.DELTA2:
        step = L * K + S
        b = [(l - 1) * K for l in range(1, L + 1)] + [L * K]
        d = [(m - 1) * step for m in range(1, M + 1)] + [(M - 1) * step + L * K]
    else:
        b = [(l - 1) * M * K for l in range(1, L + 1)] + [L * K * M]
        d = [(m - 1) * K for m in range(1, M + 1)] + [L * K * M]
    return DegreeParams(tuple(b), tuple(d))


def fpmm_as_psmm(K: int, T_A: int, T_B: int) -> tuple:
    """(S, T) of the PSMM instance with the same polynomial structure."""
    return K + T_A - 1, T_B


def fpmm_family(tag, L: int, M: int, K: int, T_A: int, T_B: int) -> DegreeParams:
    _positive(T_A=T_A, T_B=T_B)
    S, T = fpmm_as_psmm(K, T_A, T_B)
    return psmm_family(tag, L, M, K, S, T)


def psmm_family_delta(tag, L: int, M: int, K: int, S: int, T: int) -> int:
    """Closed-form product degree of a family (the three PSMM branch formulas)."""
    tag = Family(tag)
    if tag is Family.DELTA1:
        return (L + 1) * (K * M + K + T - 1) + S - K - T - 1
    if tag is Family.DELTA2:
        return (M + 1) * (L * K + S) + K + T - S - 3
    return 2 * L * K * M + K + S + T - 3


def fpmm_family_delta(tag, L: int, M: int, K: int, T_A: int, T_B: int) -> int:
    tag = Family(tag)
    if tag is Family.DELTA1:
        return (L + 1) * (K * M + K + T_B - 1) + T_A - T_B - 2
    if tag is Family.DELTA2:
        return (M + 1) * (L * K + K + T_A - 1) + T_B - T_A - 2
    return 2 * L * K * M + 2 * K + T_A + T_B - 4


def product_degree(dp: DegreeParams, K: int, S: int, T: int) -> int:
    """Degree of f*h for arbitrary degree parameters (PSMM accounting)."""
    L, M = dp.L, dp.M
    f_deg = max([dp.b[l] + K - 1 for l in range(L)] + [dp.b[L] + S - 1])
    h_deg = max([dp.d[m] + K - 1 for m in range(M)] + [dp.d[M] + K + T - 2])
    return f_deg + h_deg


def desired_exponents(dp: DegreeParams, K: int) -> dict:
    return {
        (l, m): K - 1 + dp.b[l - 1] + dp.d[m - 1]
        for l in range(1, dp.L + 1)
        for m in range(1, dp.M + 1)
    }


def interference_exponents(dp: DegreeParams, K: int, S: int, T: int) -> set:
    """Every exponent at which an undesired cross term of f*h can land."""
    L, M, b, d = dp.L, dp.M, dp.b, dp.d
    out = set()
    for l in range(L):
        for m in range(M):
            for i in range(K - 1):
                out.add(i + b[l] + d[m])
                out.add(2 * K - 2 - i + b[l] + d[m])
    for l in range(L):
        for t in range(1, K + T):
            for k in range(1, K + 1):
                out.add(k + b[l] + d[M] + t - 2)
    for m in range(M):
        for t in range(1, S + 1):
            for k in range(1, K + 1):
                out.add(K - k + d[m] + b[L] + t - 1)
    for t in range(1, S + 1):
        for t2 in range(1, K + T):
            out.add(b[L] + d[M] + t + t2 - 2)
    return out


@dataclass
class AchievabilityReport:
    ok: bool
    violation: str | None = None
    pair: tuple | None = None

    def __bool__(self):
        return self.ok


def check_achievable_psmm(dp: DegreeParams, L: int, M: int, K: int, S: int, T: int) -> AchievabilityReport:
    """Check both sufficient conditions literally; report the first violation."""
    if dp.L != L or dp.M != M:
        return AchievabilityReport(False, f"expected {L + 1} b's and {M + 1} d's")
    desired = desired_exponents(dp, K)
    seen = {}
    for key, r in desired.items():
        if r in seen:
            return AchievabilityReport(False, "desired exponents not pairwise distinct", (seen[r], key))
        seen[r] = key
    interference = interference_exponents(dp, K, S, T)
    for key, r in desired.items():
        if r in interference:
            return AchievabilityReport(False, f"desired exponent {r} collides with interference", (key,))
    return AchievabilityReport(True)


def check_achievable_fpmm(dp: DegreeParams, L: int, M: int, K: int, T_A: int, T_B: int) -> AchievabilityReport:
    S, T = fpmm_as_psmm(K, T_A, T_B)
    return check_achievable_psmm(dp, L, M, K, S, T)


def exponent_map(dp: DegreeParams, K: int, L: int, M: int, S: int | None = None, T: int | None = None) -> dict:
    """Map (l, m) -> exponent of C_{l,m} in the product polynomial.

    With ``S`` and ``T`` the full achievability check runs; otherwise only
    injectivity is verified.
    """
    if dp.L != L or dp.M != M:
        raise NotAchievable("degree parameter lengths do not match (L, M)")
    if S is not None and T is not None:
        report = check_achievable_psmm(dp, L, M, K, S, T)
        if not report:
            raise NotAchievable(report.violation)
    emap = desired_exponents(dp, K)
    if len(set(emap.values())) != len(emap):
        raise NotAchievable("desired exponents not pairwise distinct")
    return emap


def _best(deltas: dict) -> tuple:
    best = min(deltas.values())
    for tag in TIE_ORDER:
        if deltas[tag] == best:
            return best + 1, tag
    raise AssertionError("unreachable")


def recovery_threshold(kind, L: int, M: int, K: int, S=None, T=None, T_A=None, T_B=None) -> tuple:
    """Smallest threshold over the three families, with the winning family."""
    kind = Kind(kind)
    if kind is Kind.PSMM:
        deltas = {tag: psmm_family_delta(tag, L, M, K, S, T) for tag in Family}
    elif kind is Kind.FPMM:
        deltas = {tag: fpmm_family_delta(tag, L, M, K, T_A, T_B) for tag in Family}
    else:
        return baseline_threshold(K, T_A, T_B), None
    return _best(deltas)


def baseline_threshold(K: int, T_A: int, T_B: int) -> int:
    return 3 * K + max(T_A, T_B) - 2


@dataclass
class StrategyPlan:
    kind: Kind
    N: int
    K: int
    L: int
    M: int
    V: int
    R: int = 0
    S: int = 0
    T: int = 0
    T_A: int = 0
    T_B: int = 0
    family: Family | None = None
    degrees: DegreeParams | None = None
    delta: int = 0
    exponent_map: dict = field(default_factory=dict)

    @property
    def P(self) -> int:
        return self.delta + 1

    @property
    def a_noise_terms(self) -> int:
        """Number of A-side noise exponents starting at b_{L+1}."""
        return self.S if self.kind is Kind.PSMM else self.K + self.T_A - 1

    @property
    def t_prime(self) -> int:
        return max(self.T_A, self.T_B)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "N": self.N,
            "K": self.K,
            "L": self.L,
            "M": self.M,
            "V": self.V,
            "R": self.R,
            "S": self.S,
            "T": self.T,
            "T_A": self.T_A,
            "T_B": self.T_B,
            "family": self.family.value if self.family else None,
            "b": list(self.degrees.b) if self.degrees else None,
            "d": list(self.degrees.d) if self.degrees else None,
            "delta": self.delta,
            "P": self.P,
            "exponent_map": [[l, m, r] for (l, m), r in sorted(self.exponent_map.items())],
        }


def _finish(plan: StrategyPlan, check_n: bool) -> StrategyPlan:
    if check_n and plan.P > plan.N:
        raise InfeasiblePlan(f"recovery threshold {plan.P} exceeds N={plan.N}")
    return plan


def make_psmm_plan(N, K, L, M, V, S, T, family=None, degrees: DegreeParams | None = None, check_n=True) -> StrategyPlan:
    _positive(N=N, K=K, L=L, M=M, S=S, T=T)
    if degrees is None:
        if family is None:
            _, family = recovery_threshold(Kind.PSMM, L, M, K, S=S, T=T)
        family = Family(family)
        degrees = psmm_family(family, L, M, K, S, T)
    else:
        family = None
    emap = exponent_map(degrees, K, L, M, S, T)
    plan = StrategyPlan(
        Kind.PSMM, N, K, L, M, V, S=S, T=T, family=family, degrees=degrees,
        delta=product_degree(degrees, K, S, T), exponent_map=emap,
    )
    return _finish(plan, check_n)


def make_fpmm_plan(N, K, L, M, R, V, T_A, T_B, family=None, degrees: DegreeParams | None = None, check_n=True) -> StrategyPlan:
    _positive(N=N, K=K, L=L, M=M, T_A=T_A, T_B=T_B)
    S, T = fpmm_as_psmm(K, T_A, T_B)
    if degrees is None:
        if family is None:
            _, family = recovery_threshold(Kind.FPMM, L, M, K, T_A=T_A, T_B=T_B)
        family = Family(family)
        degrees = fpmm_family(family, L, M, K, T_A, T_B)
    else:
        family = None
    emap = exponent_map(degrees, K, L, M, S, T)
    plan = StrategyPlan(
        Kind.FPMM, N, K, L, M, V, R=R, T_A=T_A, T_B=T_B, family=family, degrees=degrees,
        delta=product_degree(degrees, K, S, T), exponent_map=emap,
    )
    return _finish(plan, check_n)


def make_baseline_plan(N, K, R, V, T_A, T_B, check_n=True) -> StrategyPlan:
    """Plan for the precomputed-products strategy.

    After shifting responses by ``x^K`` the product polynomial has degree
    ``3K+T'-3`` and the desired product sits at exponent ``K-1``.
    """
    _positive(N=N, K=K, T_A=T_A, T_B=T_B)
    plan = StrategyPlan(
        Kind.BASELINE, N, K, 1, 1, V, R=R, T_A=T_A, T_B=T_B,
        delta=baseline_threshold(K, T_A, T_B) - 1, exponent_map={(1, 1): K - 1},
    )
    return _finish(plan, check_n)


def plan_from_dict(d: dict) -> StrategyPlan:
    kind = Kind(d["kind"])
    degrees = DegreeParams(d["b"], d["d"]) if d.get("b") is not None else None
    return StrategyPlan(
        kind, d["N"], d["K"], d["L"], d["M"], d["V"], R=d["R"], S=d["S"], T=d["T"],
        T_A=d["T_A"], T_B=d["T_B"], family=Family(d["family"]) if d.get("family") else None,
        degrees=degrees, delta=d["delta"],
        exponent_map={(l, m): r for l, m, r in d["exponent_map"]},
    )
