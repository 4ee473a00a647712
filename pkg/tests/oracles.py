"""Independent reference computations used as test oracles.

Nothing here calls into pmmkit's arithmetic: products are schoolbook loops
over Python ints, interpolation goes through sympy, and the protocol
polynomials are rebuilt coefficient by coefficient from their definitions.
"""
import sympy


def naive_matmul(a, b, p):
    rows, inner, cols = len(a), len(b), len(b[0])
    return [[sum(int(a[i][k]) * int(b[k][j]) for k in range(inner)) % p for j in range(cols)] for i in range(rows)]


def as_lists(m):
    return [[int(x) for x in row] for row in m]


def horner_ref(coeffs, x, p):
    return sum(int(c) * pow(x, r, p) for r, c in enumerate(coeffs)) % p


def sympy_interpolate(xs, ys, p):
    """Coefficients (low to high) of the interpolant over GF(p), via a Vandermonde inverse."""
    n = len(xs)
    V = sympy.Matrix(n, n, lambda i, j: pow(int(xs[int(i)]), int(j), p))
    coeffs = V.inv_mod(p) * sympy.Matrix([int(y) % p for y in ys])
    return [int(c) % p for c in coeffs]


def blocks(m, br, bc):
    """Grid of blocks (lists) of a list-of-lists matrix."""
    R, C = len(m) // br, len(m[0]) // bc
    return [[[row[j * bc:(j + 1) * bc] for row in m[i * br:(i + 1) * br]] for j in range(C)] for i in range(R)]


def mat_poly_mul(f, g, p):
    """Product of matrix polynomials given as {exponent: matrix} dicts."""
    out = {}
    for e1, m1 in f.items():
        for e2, m2 in g.items():
            prod = naive_matmul(m1, m2, p)
            if e1 + e2 in out:
                acc = out[e1 + e2]
                out[e1 + e2] = [[(x + y) % p for x, y in zip(r1, r2)] for r1, r2 in zip(acc, prod)]
            else:
                out[e1 + e2] = prod
    return out


def mat_poly_add_term(poly, e, m, p, scale=1):
    m = [[int(x) * scale % p for x in row] for row in m]
    if e in poly:
        poly[e] = [[(x + y) % p for x, y in zip(r1, r2)] for r1, r2 in zip(poly[e], m)]
    else:
        poly[e] = m


def mat_poly_eval(poly, x, p):
    out = None
    for e, m in poly.items():
        term = [[int(v) * pow(x, e, p) % p for v in row] for row in m]
        out = term if out is None else [[(a + b) % p for a, b in zip(r1, r2)] for r1, r2 in zip(out, term)]
    return out
