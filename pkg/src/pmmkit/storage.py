"""(N, K) Reed-Solomon coded storage of the matrix libraries.

Server ``i`` (0-based) holds, for every library-B matrix ``v`` and column
group ``m``, the block ``e_m^{(v)}(alpha_i) = sum_k B_{k,m}^{(v)} alpha_i^{K-k}``;
for library A (FPMM only) it holds ``sum_k A_{l,k}^{(r)} alpha_i^{k-1}``.
Library indices ``v, m, r, l, k`` are 1-based throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CorruptManifest, DuplicateEvaluationPoint, InsufficientShards, ModulusMismatch
from .matrix import assemble, eval_block_poly, interpolate_blocks, partition, random_matrix, read_matrix, write_matrix

MANIFEST = "manifest.json"
FORMAT = "pmmkit-shards/1"


@dataclass
class LibraryB:
    matrices: list
    modulus: int

    def __post_init__(self):
        _check_same_shape(self.matrices)

    def __len__(self):
        return len(self.matrices)

    @property
    def shape(self):
        return self.matrices[0].shape if self.matrices else None


@dataclass
class LibraryA:
    matrices: list
    modulus: int

    def __post_init__(self):
        _check_same_shape(self.matrices)

    def __len__(self):
        return len(self.matrices)

    @property
    def shape(self):
        return self.matrices[0].shape if self.matrices else None


def _check_same_shape(mats):
    shapes = {m.shape for m in mats}
    if len(shapes) > 1:
        raise ValueError(f"library matrices differ in shape: {sorted(shapes)}")


def random_library(kind: str, count: int, rows: int, cols: int, seed, p: int):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mats = [random_matrix(rows, cols, rng, p) for _ in range(count)]
    return (LibraryA if kind == "A" else LibraryB)(mats, p)


def default_alpha(N: int) -> tuple:
    return tuple(range(1, N + 1))


def check_alpha(alpha: Sequence[int], p: int) -> tuple:
    alpha = tuple(int(a) % p for a in alpha)
    if len(set(alpha)) != len(alpha):
        raise DuplicateEvaluationPoint("evaluation points must be pairwise distinct")
    if 0 in alpha:
        raise ValueError("evaluation points must be nonzero")
    return alpha


def encode_library_B(lib: LibraryB, alpha: Sequence[int], K: int, M: int) -> list:
    """Per-server dicts ``{(v, m): e_m^{(v)}(alpha_i)}``."""
    p = lib.modulus
    alpha = check_alpha(alpha, p)
    shards = [dict() for _ in alpha]
    for v, B in enumerate(lib.matrices, start=1):
        grid = partition(B, K, M)
        shape = grid.block_shape
        for m in range(1, M + 1):
            terms = [(K - k, grid.block(k, m)) for k in range(1, K + 1)]
            for i, a in enumerate(alpha):
                shards[i][(v, m)] = eval_block_poly(terms, a, shape, p)
    return shards


def encode_library_A(lib: LibraryA, alpha: Sequence[int], K: int, L: int) -> list:
    """Per-server dicts ``{(r, l): e~_l^{(r)}(alpha_i)}`` (ascending-power convention)."""
    p = lib.modulus
    alpha = check_alpha(alpha, p)
    shards = [dict() for _ in alpha]
    for r, A in enumerate(lib.matrices, start=1):
        grid = partition(A, L, K)
        shape = grid.block_shape
        for l in range(1, L + 1):
            terms = [(k - 1, grid.block(l, k)) for k in range(1, K + 1)]
            for i, a in enumerate(alpha):
                shards[i][(r, l)] = eval_block_poly(terms, a, shape, p)
    return shards


@dataclass
class ShardStore:
    modulus: int
    alpha: tuple
    K: int
    L: int
    M: int
    shards_B: list
    shards_A: list | None = None
    V: int = 0
    R: int = 0
    dims: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def N(self) -> int:
        return len(self.alpha)

    def storage_elements(self, server: int = 0) -> int:
        """Field elements held by one server across both libraries."""
        total = sum(b.size for b in self.shards_B[server].values())
        if self.shards_A is not None:
            total += sum(a.size for a in self.shards_A[server].values())
        return total


def build_store(
    lib_B: LibraryB,
    N: int,
    K: int,
    M: int = 1,
    lib_A: LibraryA | None = None,
    L: int = 1,
    alpha: Sequence[int] | None = None,
    seed: int | None = None,
) -> ShardStore:
    if K > N:
        raise ValueError(f"an (N, K) MDS code needs K <= N, got K={K}, N={N}")
    p = lib_B.modulus
    if N >= p:
        raise ValueError(f"field of size {p} has too few nonzero points for N={N}")
    alpha = check_alpha(alpha if alpha is not None else default_alpha(N), p)
    if len(alpha) != N:
        raise ValueError("len(alpha) must equal N")
    dims = {}
    if lib_B.shape:
        dims["omega"], dims["gamma"] = lib_B.shape
    shards_A = None
    R = 0
    if lib_A is not None:
        if lib_A.modulus != p:
            raise ModulusMismatch("libraries use different moduli")
        shards_A = encode_library_A(lib_A, alpha, K, L)
        R = len(lib_A)
        if lib_A.shape:
            dims["lambda"], omega_a = lib_A.shape
            if "omega" in dims and omega_a != dims["omega"]:
                raise ValueError("library A column count must match library B row count")
    return ShardStore(
        modulus=p,
        alpha=alpha,
        K=K,
        L=L,
        M=M,
        shards_B=encode_library_B(lib_B, alpha, K, M),
        shards_A=shards_A,
        V=len(lib_B),
        R=R,
        dims=dims,
        seed=seed,
    )


def reconstruct_library(store: ShardStore, servers: Sequence[int], which: str = "B"):
    """Rebuild a library from the shards of ``servers`` (0-based ids); needs K of them."""
    servers = list(servers)
    K, p = store.K, store.modulus
    if len(servers) < K:
        raise InsufficientShards(f"need {K} shards, got {len(servers)}")
    servers = servers[:K]
    xs = [store.alpha[i] for i in servers]
    if len(set(xs)) != len(xs):
        raise DuplicateEvaluationPoint("repeated server in reconstruction subset")
    if which == "B":
        shards, count, parts = store.shards_B, store.V, store.M
    elif which == "A":
        if store.shards_A is None:
            raise InsufficientShards("store holds no library A")
        shards, count, parts = store.shards_A, store.R, store.L
    else:
        raise ValueError("which must be 'A' or 'B'")
    mats = []
    for idx in range(1, count + 1):
        columns = []
        for part in range(1, parts + 1):
            coeffs = interpolate_blocks(xs, [shards[i][(idx, part)] for i in servers], p)
            if which == "B":
                # coefficient of x^{K-k} is B_{k,m}
                columns.append([coeffs[K - k] for k in range(1, K + 1)])
            else:
                columns.append([coeffs[k - 1] for k in range(1, K + 1)])
        if which == "B":
            grid = [[columns[m][k] for m in range(parts)] for k in range(K)]
        else:
            grid = columns
        mats.append(assemble(grid))
    return (LibraryB if which == "B" else LibraryA)(mats, p)


def restripe(store: ShardStore, L: int | None = None, M: int | None = None) -> ShardStore:
    """Decode the libraries from the first K servers and re-encode with a new (L, M)."""
    first_k = range(store.K)
    lib_B = reconstruct_library(store, first_k, "B")
    lib_A = reconstruct_library(store, first_k, "A") if store.shards_A is not None else None
    return build_store(
        lib_B,
        store.N,
        store.K,
        M=store.M if M is None else M,
        lib_A=lib_A,
        L=store.L if L is None else L,
        alpha=store.alpha,
        seed=store.seed,
    )


# -- persistence -------------------------------------------------------------

def _shard_name(lib: str, server: int, idx: int, part: int) -> str:
    return f"{lib}/s{server:04d}_{idx:04d}_{part:04d}.pmm"


def save_shards(store: ShardStore, path) -> Path:
    root = Path(path)
    (root / "A").mkdir(parents=True, exist_ok=True)
    (root / "B").mkdir(parents=True, exist_ok=True)
    files = []
    libs = [("B", store.shards_B)]
    if store.shards_A is not None:
        libs.append(("A", store.shards_A))
    for lib, shards in libs:
        for server, blocks in enumerate(shards):
            for (idx, part), block in sorted(blocks.items()):
                name = _shard_name(lib, server, idx, part)
                write_matrix(root / name, block, store.modulus)
                files.append({"lib": lib, "server": server, "index": idx, "part": part, "path": name})
    manifest = {
        "format": FORMAT,
        "N": store.N,
        "K": store.K,
        "L": store.L,
        "M": store.M,
        "V": store.V,
        "R": store.R,
        "has_A": store.shards_A is not None,
        "modulus": store.modulus,
        "alpha": list(store.alpha),
        "dims": store.dims,
        "seed": store.seed,
        "files": files,
    }
    (root / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return root


_REQUIRED = ("format", "N", "K", "L", "M", "V", "R", "has_A", "modulus", "alpha", "files")


def load_shards(path, modulus: int | None = None) -> ShardStore:
    root = Path(path)
    try:
        manifest = json.loads((root / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptManifest(f"cannot read {root / MANIFEST}: {exc}") from exc
    missing = [k for k in _REQUIRED if k not in manifest]
    if missing or manifest["format"] != FORMAT:
        raise CorruptManifest(f"manifest missing keys {missing} or wrong format")
    p = manifest["modulus"]
    if modulus is not None and p != modulus:
        raise ModulusMismatch(f"store modulus {p} != expected {modulus}")
    N = manifest["N"]
    if len(manifest["alpha"]) != N:
        raise CorruptManifest("alpha list length does not match N")
    shards_B = [dict() for _ in range(N)]
    shards_A = [dict() for _ in range(N)] if manifest["has_A"] else None
    for entry in manifest["files"]:
        try:
            lib, server, idx, part, name = (entry[k] for k in ("lib", "server", "index", "part", "path"))
            target = shards_B if lib == "B" else shards_A
            block, _ = read_matrix(root / name, modulus=p)
            target[server][(idx, part)] = block
        except (KeyError, TypeError, IndexError, OSError) as exc:
            raise CorruptManifest(f"bad file entry {entry!r}: {exc}") from exc
    return ShardStore(
        modulus=p,
        alpha=tuple(manifest["alpha"]),
        K=manifest["K"],
        L=manifest["L"],
        M=manifest["M"],
        shards_B=shards_B,
        shards_A=shards_A,
        V=manifest["V"],
        R=manifest["R"],
        dims=manifest.get("dims", {}),
        seed=manifest.get("seed"),
    )
