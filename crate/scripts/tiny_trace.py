#!/usr/bin/env python3
"""Standalone re-derivation of the TINY fixture trace.

Independent of the Rust engine: evaluates the raw formulas directly and
walks the four search phases by hand-written loops. Prints the values the
Rust tests freeze.
"""
import itertools
import math

A = [1, 2, 4]
B = [100, 200]
W = {"power": 0.1, "time": 0.9}


def metrics(a, b):
    return {"power": 0.5 * a + 0.002 * b, "time": 24 / a + 200 / b}


def F(cfg, mx):
    v = metrics(*cfg)
    return sum(W[k] * v[k] / mx[k] for k in W)


requested = []


def ev(cfg):
    requested.append(cfg)
    return metrics(*cfg)


# one-shot
first = (A[0], B[0])
sA_f, sA_l = (A[0], B[0]), (A[-1], B[0])
sB_f, sB_l = (A[0], B[0]), (A[0], B[-1])
p1 = [sA_f, sA_l, sB_l]
recs = [ev(c) for c in p1]
mx = {k: max(r[k] for r in recs) for k in W}
D_A = F(sA_l, mx) - F(sA_f, mx)
D_B = F(sB_l, mx) - F(sB_f, mx)
best = [A[0] if D_A > 0 else A[-1], B[0] if D_B > 0 else B[-1]]
print("ctx", mx)
print("F(4,100)", F((4, 100), mx))
print("D_A", D_A, "D_B", D_B, "B", best)

# partition T=3: |D_A| > |D_B|, L_A = 3 <= 3, 3*2 > 3
# exhaustive over A, B fixed at best
fsb = math.inf
for a in A:
    c = (a, best[1])
    ev(c)
    f = F(c, mx)
    print("exh", c, round(f, 4))
    if f < fsb:
        fsb, best = f, [a, best[1]]
print("after exh", best, fsb)

# greedy on B, D_B < 0 -> descending walk
walk = B[::-1] if D_B < 0 else B
g = fsb
for b in walk:
    c = (best[0], b)
    ev(c)
    f = F(c, mx)
    print("greedy", c, round(f, 4))
    if tuple(c) == tuple(best):
        continue
    if f < g:
        g, best = f, [best[0], b]
    else:
        break
print("final", best, g, "unique", len(set(requested)))

# oracle
allc = list(itertools.product(A, B))
orc = min(allc, key=lambda c: (F(c, mx), allc.index(c)))
print("oracle", orc, F(orc, mx), "explored %", 100 * len(set(requested)) / len(allc),
      "speedup", len(allc) / len(set(requested)))
print("all points", [(c, metrics(*c)) for c in allc])

# synthetic example: synth-fluid, c=4, f=2800, 32/32/512/4096
p, Wk, N, CPI0 = 0.90, 512, 2e9, 1.4
c, f, l1i, l1d, l2, l3 = 4, 2800, 32, 32, 512, 4096
mi = min(1, Wk / (8 * l1i)); md = min(1, Wk / (4 * l1d))
m2 = min(1, Wk / (2 * l2)); m3 = min(1, Wk / (8 * l3))
cpi = CPI0 + 0.2 * (4 * (md + 0.5 * mi) + 12 * md * m2 + 80 * md * m2 * m3)
sp = 1 / ((1 - p) + p / c)
t = N * cpi / (f * 1000 * sp)
pw = c * (0.3 + 1.2 * (f / 3200) ** 3) + 1e-4 * c * (l1i + l1d + l2) + 2e-5 * l3
print("synth-fluid", pw, t)
