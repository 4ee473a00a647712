"""Analytic cost model: thresholds, communication, computation and storage.

Communication and storage are exact element counts (``Fraction``).  The
computation terms drop order constants, and the polylog factor is
``n (ln n)^2 ln ln n`` with both logs clamped below at 1 so small ``n`` stays
positive.  Treat these as shape-level numbers.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from fractions import Fraction

from .errors import FactorizationInvalid, NoFeasiblePlan
from .strategy import Kind, baseline_threshold, recovery_threshold

CSV_FIELDS = (
    "strategy", "L", "M", "p", "n", "P", "upload", "download", "query_bytes",
    "enc", "server", "dec", "storage", "total_comm", "total_comp",
)


def polylog(n) -> float:
    """``n (log n)^2 log log n`` with each log clamped at >= 1."""
    n = float(n)
    if n <= 0:
        return 0.0
    ln = max(math.log(n), 1.0)
    lnln = max(math.log(ln), 1.0) if ln > 1 else 1.0
    return n * ln * ln * lnln


@dataclass(frozen=True)
class CostScenario:
    N: int
    K: int
    V: int
    lam: int
    omega: int
    gamma: int
    R: int = 1
    S: int = 1
    T: int = 1
    T_A: int = 1
    T_B: int = 1
    s1: float = 1.0
    s2: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")


@dataclass
class CostVector:
    strategy: str
    L: int
    M: int
    P: int
    upload: Fraction
    download: Fraction
    query: Fraction
    enc: float
    server: Fraction
    dec: float
    storage: Fraction
    p: int | None = None
    n: int | None = None
    feasible: bool = True

    def total_comm(self, include_queries: bool = False) -> Fraction:
        return self.upload + self.download + (self.query if include_queries else 0)

    @property
    def total_comp(self) -> float:
        return float(self.enc) + float(self.server) + float(self.dec)

    def objective(self, name: str) -> float:
        if name == "total_comm":
            return float(self.total_comm())
        if name == "total_comp":
            return self.total_comp
        raise ValueError(f"unknown objective {name!r}")

    def row(self) -> dict:
        return {
            "strategy": self.strategy, "L": self.L, "M": self.M,
            "p": "" if self.p is None else self.p, "n": "" if self.n is None else self.n,
            "P": self.P, "upload": _num(self.upload), "download": _num(self.download),
            "query_bytes": _num(self.query), "enc": _num(self.enc), "server": _num(self.server),
            "dec": _num(self.dec), "storage": _num(self.storage),
            "total_comm": _num(self.total_comm()), "total_comp": _num(self.total_comp),
        }


def _num(x) -> str:
    if isinstance(x, Fraction) and x.denominator == 1:
        return str(x.numerator)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def psmm_costs(sc: CostScenario, L: int, M: int) -> CostVector:
    P, _ = recovery_threshold(Kind.PSMM, L, M, sc.K, S=sc.S, T=sc.T)
    lam, om, ga, N, K = sc.lam, sc.omega, sc.gamma, sc.N, sc.K
    return CostVector(
        "psmm", L, M, P,
        upload=Fraction(lam * om * N, L * K),
        download=Fraction(lam * ga * P, L * M),
        query=Fraction(N * sc.V * M),
        enc=lam * om * polylog(N) / (L * K),
        server=Fraction(sc.V * om * ga, K) + Fraction(lam * om * ga, L * K * M),
        dec=lam * ga * polylog(P) / (L * M),
        storage=Fraction(sc.V * om * ga, K),
        feasible=P <= N,
    )


def fpmm_costs(sc: CostScenario, L: int, M: int) -> CostVector:
    P, _ = recovery_threshold(Kind.FPMM, L, M, sc.K, T_A=sc.T_A, T_B=sc.T_B)
    lam, om, ga, N, K = sc.lam, sc.omega, sc.gamma, sc.N, sc.K
    stored = Fraction(sc.R * lam * om + sc.V * om * ga, K)
    return CostVector(
        "fpmm", L, M, P,
        upload=Fraction(0),
        download=Fraction(lam * ga * P, L * M),
        query=Fraction(N * (sc.R * L + sc.V * M)),
        enc=0.0,
        server=stored + Fraction(lam * om * ga, L * K * M),
        dec=lam * ga * polylog(P) / (L * M),
        storage=stored,
        feasible=P <= N,
    )


def prior_psmm_costs(sc: CostScenario, L: int, p: int, n: int) -> CostVector:
    """The earlier single-collusion strategy (meaningful for S = T = 1)."""
    if p < 1 or n < 1 or p * n != sc.K:
        raise FactorizationInvalid(f"p*n must equal K={sc.K}, got p={p}, n={n}")
    lam, om, ga, N, V = sc.lam, sc.omega, sc.gamma, sc.N, sc.V
    P = L * p * n + p * n
    return CostVector(
        "prior", L, 1, P,
        upload=Fraction(lam * om * V * N, L * p),
        download=Fraction(lam * ga * P, L * n),
        query=Fraction(0),
        enc=lam * om * polylog(N) / (L * p),
        server=Fraction(V * lam * om * ga, L * p * n),
        dec=lam * ga * polylog(P) / (L * n),
        storage=Fraction(V * om * ga, p * n),
        p=p, n=n, feasible=P <= N,
    )


def baseline_fpmm_costs(sc: CostScenario) -> CostVector:
    P = baseline_threshold(sc.K, sc.T_A, sc.T_B)
    lam, ga = sc.lam, sc.gamma
    stored = Fraction(sc.R * sc.V * lam * ga)
    return CostVector(
        "baseline", 1, 1, P,
        upload=Fraction(0),
        download=Fraction(lam * ga * P),
        query=Fraction(sc.N * sc.R * sc.V),
        enc=0.0,
        server=stored,
        dec=lam * ga * polylog(P),
        storage=stored,
        feasible=P <= sc.N,
    )


def factor_pairs(K: int) -> list:
    return [(p, K // p) for p in range(1, K + 1) if K % p == 0]


def sweep(sc: CostScenario, strategy: str) -> list:
    """Every feasible (P <= N) configuration of one strategy."""
    out = []
    if strategy == "psmm":
        out = [psmm_costs(sc, L, M) for L in range(1, sc.N + 1) for M in range(1, sc.N + 1)]
    elif strategy == "fpmm":
        out = [fpmm_costs(sc, L, M) for L in range(1, sc.N + 1) for M in range(1, sc.N + 1)]
    elif strategy == "prior":
        out = [prior_psmm_costs(sc, L, p, n) for L in range(1, sc.N + 1) for p, n in factor_pairs(sc.K)]
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return [c for c in out if c.feasible]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def lower_hull(points: list) -> list:
    """Pareto-minimal points, then their lower convex hull (non-increasing in P).

    ``points`` are ``(P, value, payload)`` triples.
    """
    best = {}
    for P, val, payload in points:
        if P not in best or val < best[P][1]:
            best[P] = (P, val, payload)
    frontier, floor = [], math.inf
    for P in sorted(best):
        if best[P][1] < floor:
            frontier.append(best[P])
            floor = best[P][1]
    hull = []
    for pt in frontier:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], pt) <= 0:
            hull.pop()
        hull.append(pt)
    return hull


def pareto_sweep(sc: CostScenario, strategy: str, objective: str = "total_comm") -> list:
    """Hull of (P, objective) over the strategy's configurations, as CostVectors."""
    pts = [(c.P, c.objective(objective), c) for c in sweep(sc, strategy)]
    return [c for _, _, c in lower_hull(pts)]


def hull_value(hull: list, P: float, objective: str = "total_comm") -> float:
    """Piecewise-linear hull evaluated at ``P`` (must lie within its span)."""
    pts = [(c.P, c.objective(objective)) for c in hull]
    if not pts or P < pts[0][0] or P > pts[-1][0]:
        raise ValueError(f"P={P} outside hull span")
    for (p0, v0), (p1, v1) in zip(pts, pts[1:]):
        if p0 <= P <= p1:
            return v0 + (v1 - v0) * (P - p0) / (p1 - p0)
    return pts[0][1]


def compare_hulls(ours: list, theirs: list, objective: str = "total_comm") -> list:
    """``(P, ours, theirs)`` at every integer threshold both hulls span."""
    lo = max(ours[0].P, theirs[0].P)
    hi = min(ours[-1].P, theirs[-1].P)
    return [(P, hull_value(ours, P, objective), hull_value(theirs, P, objective)) for P in range(lo, hi + 1)]


def tradeoff_frontier(kind, K: int, L: int, M: int, P: int) -> list:
    """All integer (S, T) (or (T_A, T_B)) pairs with threshold <= P."""
    kind = Kind(kind)
    out = []
    for a in range(1, P + 1):
        row = []
        for b in range(1, P + 1):
            if kind is Kind.PSMM:
                thr, _ = recovery_threshold(kind, L, M, K, S=a, T=b)
            else:
                thr, _ = recovery_threshold(kind, L, M, K, T_A=a, T_B=b)
            if thr > P:
                break
            row.append((a, b))
        if not row:
            break
        out.extend(row)
    return out


def runtime(c: CostVector, sc: CostScenario) -> float:
    return float(c.total_comm()) / sc.s1 + c.total_comp / sc.s2


def optimize_runtime(sc: CostScenario, kind="psmm") -> tuple:
    """Brute-force minimiser of predicted runtime over L, M in [1..N]."""
    cost = psmm_costs if Kind(kind) is Kind.PSMM else fpmm_costs
    best = None
    for L in range(1, sc.N + 1):
        for M in range(1, sc.N + 1):
            c = cost(sc, L, M)
            if not c.feasible:
                continue
            t = runtime(c, sc)
            if best is None or t < best[2]:
                best = (L, M, t)
    if best is None:
        raise NoFeasiblePlan(f"no (L, M) reaches a threshold <= N={sc.N}")
    return best


def write_csv(rows, target=None) -> str:
    """Write CostVectors in the fixed schema; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for c in rows:
        writer.writerow(c.row())
    text = buf.getvalue()
    if target is not None:
        with open(target, "w", newline="") as fh:
            fh.write(text)
    return text


def write_frontier_csv(pairs, kind, target=None) -> str:
    names = ("S", "T") if Kind(kind) is Kind.PSMM else ("T_A", "T_B")
    text = f"{names[0]},{names[1]}\n" + "".join(f"{a},{b}\n" for a, b in pairs)
    if target is not None:
        with open(target, "w") as fh:
            fh.write(text)
    return text
