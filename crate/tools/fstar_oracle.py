#!/usr/bin/env python3
"""Brute-force provenance oracle for the optimal values frozen in
crates/core/src/objectives.rs.

Every benchmark is stated in maximization convention (classical
minimization surfaces are negated). For each objective this script runs a
dense grid scan followed by local refinement (Nelder-Mead polish from the
best grid points, then a high-resolution coordinate sweep) and prints the
best value found with 17 significant digits. Re-run after touching any
objective formula and paste the values into `objectives.rs`.

Usage: python3 tools/fstar_oracle.py
"""

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def sin1(x):
    return (math.sin(13.0 * x) * math.sin(27.0 * x) + 1.0) / 2.0


def sin2(p):
    return sin1(p[0]) * sin1(p[1])


def peaks(p):
    # MATLAB-style three-term Gaussian mixture surface, negated (max convention).
    x, y = p
    z = (
        3.0 * (1.0 - x) ** 2 * math.exp(-(x**2) - (y + 1.0) ** 2)
        - 10.0 * (x / 5.0 - x**3 - y**5) * math.exp(-(x**2) - y**2)
        - (1.0 / 3.0) * math.exp(-((x + 1.0) ** 2) - y**2)
    )
    return -z


def branin(p):
    x1, x2 = p
    a = 1.0
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    return -(a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1.0 - t) * math.cos(x1) + s)


def rosenbrock(p):
    total = 0.0
    for i in range(len(p) - 1):
        total += 100.0 * (p[i + 1] - p[i] ** 2) ** 2 + (1.0 - p[i]) ** 2
    return -total


HARTMAN3_A = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]]
HARTMAN3_P = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
]
HARTMAN6_A = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
]
HARTMAN6_P = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
]
HARTMAN_C = [1.0, 1.2, 3.0, 3.2]


def hartman(p, a, pp):
    total = 0.0
    for i in range(4):
        inner = sum(a[i][j] * (p[j] - pp[i][j]) ** 2 for j in range(len(p)))
        total += HARTMAN_C[i] * math.exp(-inner)
    return total


SHEKEL_A = [
    [4.0, 4.0, 4.0, 4.0],
    [1.0, 1.0, 1.0, 1.0],
    [8.0, 8.0, 8.0, 8.0],
    [6.0, 6.0, 6.0, 6.0],
    [3.0, 7.0, 3.0, 7.0],
    [2.0, 9.0, 2.0, 9.0],
    [5.0, 5.0, 3.0, 3.0],
    [8.0, 1.0, 8.0, 1.0],
    [6.0, 2.0, 6.0, 2.0],
    [7.0, 3.6, 7.0, 3.6],
]
SHEKEL_C = [0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5]


def shekel(p, m):
    total = 0.0
    for i in range(m):
        inner = sum((p[j] - SHEKEL_A[i][j]) ** 2 for j in range(4))
        total += 1.0 / (inner + SHEKEL_C[i])
    return total


def refine(f, x0, bounds):
    """Nelder-Mead polish followed by a shrinking coordinate sweep."""
    res = minimize(
        lambda z: -f(z),
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-14, "fatol": 1e-15, "maxiter": 40000, "maxfev": 40000},
    )
    x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
    best = f(x)
    step = 1e-6
    while step > 1e-13:
        improved = True
        while improved:
            improved = False
            for j in range(len(x)):
                for sgn in (-1.0, 1.0):
                    cand = x.copy()
                    cand[j] = min(max(cand[j] + sgn * step, bounds[j][0]), bounds[j][1])
                    v = f(cand)
                    if v > best:
                        best, x = v, cand
                        improved = True
        step /= 4.0
    return best, x


def grid_search(f, bounds, per_axis):
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in bounds]
    best, best_x = -math.inf, None
    for point in itertools.product(*axes):
        v = f(np.array(point))
        if v > best:
            best, best_x = v, np.array(point)
    return best, best_x


def report(name, f, bounds, per_axis, extra_starts=()):
    _, x0 = grid_search(f, bounds, per_axis)
    best, best_x = refine(f, x0, bounds)
    for start in extra_starts:
        cand, cand_x = refine(f, np.array(start, dtype=float), bounds)
        if cand > best:
            best, best_x = cand, cand_x
    coords = ", ".join(f"{c:.17g}" for c in best_x)
    print(f"{name:12s} f* = {best:.17g}   at ({coords})")
    return best


def main():
    b01 = [(0.0, 1.0)]
    s1 = report("sin1", lambda p: sin1(p[0]), b01, 2_000_001)
    print(f"{'sin1^2':12s} f* = {s1 * s1:.17g}   (sin2 optimum is the square)")
    report("sin2", sin2, b01 * 2, 3001)
    report("peaks", peaks, [(-3.0, 3.0)] * 2, 1201)
    report("branin", branin, [(-5.0, 10.0), (0.0, 15.0)], 901,
           extra_starts=[(math.pi, 2.275), (-math.pi, 12.275), (9.42478, 2.475)])
    print(f"{'branin':12s} closed form −5/(4π) = {-5.0 / (4.0 * math.pi):.17g}")
    print(f"{'rosenbrock':12s} f* = 0 exactly at (1, ..., 1)")
    report("hartman3", lambda p: hartman(p, HARTMAN3_A, HARTMAN3_P), b01 * 3, 101)
    report("hartman6", lambda p: hartman(p, HARTMAN6_A, HARTMAN6_P), b01 * 6, 11)
    for m in (5, 7, 10):
        report(f"shekel{m}", lambda p, m=m: shekel(p, m), [(0.0, 10.0)] * 4, 21)


if __name__ == "__main__":
    main()
