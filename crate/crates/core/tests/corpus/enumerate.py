"""Generate the small MIP corpus and its optima by exhaustive enumeration.

Every instance is a minimization with at most 10 integer columns and at
most 10 rows. Integer points are enumerated over their bounds; continuous
columns, when present, are solved for each integer assignment with
scipy's LP solver. Output: one .mps file per instance plus optima.json.

    python3 enumerate.py            # regenerate in this directory
    python3 enumerate.py OUT_DIR    # write elsewhere
"""

import itertools
import json
import os
import sys

import numpy as np
from scipy.optimize import linprog

HERE = os.path.dirname(os.path.abspath(__file__))
TOL = 1e-9


class Instance:
    def __init__(self, name, c, rows, lo, hi, integer):
        self.name = name
        self.c = [float(v) for v in c]
        # rows: (kind, coeffs, rhs) with kind in "G", "L", "E"
        self.rows = [(k, [float(v) for v in a], float(b)) for k, a, b in rows]
        self.lo = [float(v) for v in lo]
        self.hi = [float(v) for v in hi]
        self.integer = list(integer)
        n = len(self.c)
        assert all(len(a) == n for _, a, _ in self.rows)
        assert sum(self.integer) <= 10 and len(self.rows) <= 10

    def to_mps(self):
        out = [f"NAME {self.name}", "ROWS", " N COST"]
        for i, (k, _, _) in enumerate(self.rows):
            out.append(f" {k} R{i}")
        out.append("COLUMNS")
        in_int = False
        for j in range(len(self.c)):
            if self.integer[j] and not in_int:
                out.append("    MARKER 'MARKER' 'INTORG'")
                in_int = True
            if not self.integer[j] and in_int:
                out.append("    MARKER 'MARKER' 'INTEND'")
                in_int = False
            out.append(f"    X{j} COST {fmt(self.c[j])}")
            for i, (_, a, _) in enumerate(self.rows):
                if a[j] != 0:
                    out.append(f"    X{j} R{i} {fmt(a[j])}")
        if in_int:
            out.append("    MARKER 'MARKER' 'INTEND'")
        out.append("RHS")
        for i, (_, _, b) in enumerate(self.rows):
            if b != 0:
                out.append(f"    RHS R{i} {fmt(b)}")
        out.append("BOUNDS")
        for j in range(len(self.c)):
            out.append(f" LO BND X{j} {fmt(self.lo[j])}")
            out.append(f" UP BND X{j} {fmt(self.hi[j])}")
        out.append("ENDATA")
        return "\n".join(out) + "\n"

    def optimum(self):
        ints = [j for j in range(len(self.c)) if self.integer[j]]
        conts = [j for j in range(len(self.c)) if not self.integer[j]]
        ranges = [np.arange(self.lo[j], self.hi[j] + 0.5) for j in ints]
        if not conts:
            return self._pure(ints, ranges)
        best, arg = None, None
        for point in itertools.product(*ranges):
            val, x = self._lp_rest(ints, conts, point)
            if val is not None and (best is None or val < best - TOL):
                best, arg = val, x
        return best, arg

    def _pure(self, ints, ranges):
        grid = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(ints), -1).T
        ok = np.ones(len(grid), dtype=bool)
        for k, a, b in self.rows:
            act = grid @ np.array(a)
            if k == "G":
                ok &= act >= b - TOL
            elif k == "L":
                ok &= act <= b + TOL
            else:
                ok &= np.abs(act - b) <= TOL
        if not ok.any():
            return None, None
        vals = grid @ np.array(self.c)
        vals[~ok] = np.inf
        i = int(np.argmin(vals))
        return float(vals[i]), [float(v) for v in grid[i]]

    def _lp_rest(self, ints, conts, point):
        fixed = dict(zip(ints, point))
        a_ub, b_ub, a_eq, b_eq = [], [], [], []
        for k, a, b in self.rows:
            rest = b - sum(a[j] * fixed[j] for j in ints)
            coeffs = [a[j] for j in conts]
            if k == "G":
                a_ub.append([-v for v in coeffs])
                b_ub.append(-rest)
            elif k == "L":
                a_ub.append(coeffs)
                b_ub.append(rest)
            else:
                a_eq.append(coeffs)
                b_eq.append(rest)
        res = linprog(
            [self.c[j] for j in conts],
            A_ub=a_ub or None,
            b_ub=b_ub or None,
            A_eq=a_eq or None,
            b_eq=b_eq or None,
            bounds=[(self.lo[j], self.hi[j]) for j in conts],
            method="highs",
        )
        if res.status != 0:
            return None, None
        x = [0.0] * len(self.c)
        for j in ints:
            x[j] = float(fixed[j])
        for j, v in zip(conts, res.x):
            x[j] = float(v)
        return float(sum(self.c[j] * fixed[j] for j in ints) + res.fun), x


def root_is_integral(inst):
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for k, a, b in inst.rows:
        if k == "G":
            a_ub.append([-v for v in a])
            b_ub.append(-b)
        elif k == "L":
            a_ub.append(a)
            b_ub.append(b)
        else:
            a_eq.append(a)
            b_eq.append(b)
    res = linprog(inst.c, A_ub=a_ub or None, b_ub=b_ub or None, A_eq=a_eq or None, b_eq=b_eq or None,
                  bounds=list(zip(inst.lo, inst.hi)), method="highs")
    if res.status != 0:
        return None
    return all(abs(v - round(v)) < 1e-7 for v, i in zip(res.x, inst.integer) if i)


def fmt(v):
    return repr(float(v)) if v != int(v) else str(int(v))


def knapsack(rng, name, n, dims):
    w = rng.integers(2, 12, size=(dims, n))
    v = rng.integers(3, 20, size=n)
    rows = [("L", w[d], int(w[d].sum() * 0.45)) for d in range(dims)]
    return Instance(name, -v, rows, [0] * n, [1] * n, [True] * n)


def bounded_knapsack(rng, name, n, dims, ub):
    w = rng.integers(2, 9, size=(dims, n))
    v = rng.integers(3, 15, size=n)
    rows = [("L", w[d], int(w[d].sum() * ub * 0.35)) for d in range(dims)]
    return Instance(name, -v, rows, [0] * n, [ub] * n, [True] * n)


def set_cover(rng, name, n, m):
    while True:
        a = (rng.random((m, n)) < 0.35).astype(int)
        if a.sum(axis=1).min() > 0:
            break
    c = rng.integers(2, 10, size=n)
    # rows with three or more members must be covered twice
    rows = [("G", a[i], 2 if a[i].sum() >= 3 else 1) for i in range(m)]
    return Instance(name, c, rows, [0] * n, [1] * n, [True] * n)


def covering_int(rng, name, n, m, ub):
    a = rng.integers(0, 6, size=(m, n))
    a[a < 2] = 0
    for i in range(m):
        if a[i].sum() == 0:
            a[i, rng.integers(n)] = 3
    b = rng.integers(5, 15, size=m)
    c = rng.integers(1, 9, size=n)
    return Instance(name, c, [("G", a[i], int(b[i])) for i in range(m)], [0] * n, [ub] * n, [True] * n)


def equality(rng, name, n, m, ub):
    a = rng.integers(1, 6, size=(m, n)) * rng.choice([-1, 1, 1], size=(m, n))
    x0 = rng.integers(0, ub + 1, size=n)
    c = rng.integers(-5, 8, size=n)
    return Instance(name, c, [("E", a[i], int(a[i] @ x0)) for i in range(m)], [0] * n, [ub] * n, [True] * n)


def mixed(rng, name, n_int, n_cont, m):
    n = n_int + n_cont
    a = rng.integers(1, 7, size=(m, n)).astype(float)
    a[:, n_int:] *= 0.5
    b = rng.integers(8, 20, size=m) + 0.5
    c = np.concatenate([rng.integers(3, 9, size=n_int), rng.integers(4, 12, size=n_cont) + 0.5])
    integer = [True] * n_int + [False] * n_cont
    return Instance(name, c, [("G", a[i], int(b[i])) for i in range(m)], [0] * n, [3] * n_int + [4] * n_cont, integer)


def fixed_charge(rng, name, k):
    # k facilities (binary open y) and k continuous flows x <= cap*y
    n = 2 * k
    demand = int(rng.integers(8, 14))
    cap = rng.integers(4, 9, size=k)
    fixed = rng.integers(5, 15, size=k)
    unit = rng.integers(1, 4, size=k)
    c = list(fixed) + list(unit)
    rows = [("G", [0] * k + [1] * k, demand)]
    for i in range(k):
        row = [0] * n
        row[i] = int(cap[i])
        row[k + i] = -1
        rows.append(("G", row, 0))
    return Instance(name, c, rows, [0] * n, [1] * k + [20] * k, [True] * k + [False] * k)


def general(rng, name, n, m, ub):
    a = rng.integers(-3, 7, size=(m, n))
    x0 = rng.integers(0, ub + 1, size=n)
    b = a @ x0 - rng.integers(0, 4, size=m)
    c = rng.integers(1, 10, size=n)
    rows = [("G", a[i], int(b[i])) for i in range(m)]
    cap = rng.integers(1, 5, size=n)
    rows.append(("L", cap, int(cap @ x0 + 3)))
    return Instance(name, c, rows, [0] * n, [ub] * n, [True] * n)


def assignment(name, cost):
    k = len(cost)
    n = k * k
    rows = []
    for i in range(k):
        rows.append(("E", [1 if j // k == i else 0 for j in range(n)], 1))
    for t in range(k):
        rows.append(("E", [1 if j % k == t else 0 for j in range(n)], 1))
    return Instance(name, [v for r in cost for v in r], rows, [0] * n, [1] * n, [True] * n)


def build():
    rng = np.random.default_rng(20240917)
    out = []
    for i, (n, d) in enumerate([(6, 1), (8, 1), (10, 1), (9, 2), (10, 3)]):
        out.append(knapsack(rng, f"knap{i + 1:02}", n, d))
    for i, (n, d, ub) in enumerate([(5, 2, 3), (6, 2, 3), (7, 3, 2), (6, 3, 4)]):
        out.append(bounded_knapsack(rng, f"bknap{i + 1:02}", n, d, ub))
    for i, (n, m) in enumerate([(8, 6), (10, 8), (10, 10)]):
        out.append(set_cover(rng, f"cover{i + 1:02}", n, m))
    for i, (n, m, ub) in enumerate([(5, 4, 4), (6, 5, 3)]):
        out.append(covering_int(rng, f"icover{i + 1:02}", n, m, ub))
    for i, (n, m, ub) in enumerate([(6, 2, 3), (7, 3, 2)]):
        out.append(equality(rng, f"equal{i + 1:02}", n, m, ub))
    for i, (ni, nc, m) in enumerate([(4, 2, 3), (5, 3, 4), (6, 2, 5)]):
        out.append(mixed(rng, f"mixed{i + 1:02}", ni, nc, m))
    out.append(fixed_charge(rng, "fixch01", 4))
    out.append(fixed_charge(rng, "fixch02", 5))
    for i, (n, m, ub) in enumerate([(5, 4, 4), (6, 5, 3)]):
        out.append(general(rng, f"gen{i + 1:02}", n, m, ub))
    # integral relaxation
    out.append(assignment("assign01", [[4, 2, 8], [4, 3, 7], [3, 1, 6]]))
    # no integer point: 2 x0 + 2 x1 = 3
    out.append(Instance("parity01", [1, 1], [("E", [2, 2], 3)], [0, 0], [3, 3], [True, True]))
    assert len(out) == 25
    return out


def main():
    target = sys.argv[1] if len(sys.argv) > 1 else HERE
    os.makedirs(target, exist_ok=True)
    optima = {}
    for inst in build():
        with open(os.path.join(target, inst.name + ".mps"), "w") as fh:
            fh.write(inst.to_mps())
        val, x = inst.optimum()
        optima[inst.name] = {"objective": val, "x": x}
        print(f"{inst.name:10} {val} root_integral={root_is_integral(inst)}")
    with open(os.path.join(target, "optima.json"), "w") as fh:
        json.dump(optima, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
