"""Independent oracle for the frozen constants used in the C++ unit tests.

Run with `python3 tests/oracles/derive_values.py`; every printed value is
computed from first principles (quadrature, closed forms, brute force) and
does not touch the C++ implementation.
"""
import math

import numpy as np
from scipy import integrate


def hat(knots, k, x):
    t = [-1.0] + list(knots) + [2.0]
    u, v, w = t[k], t[k + 1], t[k + 2]
    if u <= x <= v:
        return (x - u) / (v - u)
    if v <= x <= w:
        return (w - x) / (w - v)
    return 0.0


def gram_quad(knots):
    m = len(knots)
    g = np.zeros((m, m))
    for a in range(m):
        for b in range(m):
            g[a, b] = integrate.quad(lambda x: hat(knots, a, x) * hat(knots, b, x),
                                     0, 1, points=list(knots), limit=200)[0]
    return g


def mass_quad(knots):
    return [integrate.quad(lambda x: hat(knots, k, x), 0, 1, points=list(knots))[0]
            for k in range(len(knots))]


def matern52(theta, x, y):
    h = abs(x - y)
    a = math.sqrt(5) * h / theta
    return (1 + a + 5.0 / 3.0 * h * h / theta ** 2) * math.exp(-a)


print("basis_eval_1d fig1 x=0.35:",
      [hat((0, .1, .2, .5, .85, 1), k, 0.35) for k in range(6)])
print("gram (0,.5,1):\n", gram_quad((0, .5, 1)))
print("gram (0,1):\n", gram_quad((0, 1)))
print("mass (0,.5,1):", mass_quad((0, .5, 1)))
print("mass (0,.1,1):", mass_quad((0, .1, 1)))
print("matern52(1,0,1): %.17g" % matern52(1, 0, 1))
print("criterion(0.1,2,0.04): %.17g" % (0.1 / (2 ** 1.4 * 0.04 ** 0.5)))
print("toy arctan D=2 x=(1,1): %.17g" % math.atan(5 * (1 - 1 / 2) * 3))
print("toy 6d ones: %.17g" % (2 + math.sin(1) + math.atan(8)))
print("half-normal mean: %.17g" % math.sqrt(2 / math.pi))
print("ordered gaussian E[x2-x1 | x1<=x2]: %.17g" % (2 / math.sqrt(math.pi)))

# ordered gaussian, brute-force rejection sampling
rng = np.random.default_rng(7)
z = rng.standard_normal((4_000_000, 2))
d = z[:, 1] - z[:, 0]
print("rejection estimate:", d[d >= 0].mean())

# 1D ramp L2 integral
print("int x^2:", integrate.quad(lambda x: x * x, 0, 1)[0])

# 1x1 conditioning: K=1, phi=1, tau2=1, y=2
K, tau2, y = 1.0, 1.0, 2.0
mu = K / (K + tau2) * y
sigma = K - K * K / (K + tau2)
print("scalar posterior mu, sigma_inv:", mu, 1 / sigma, 1 / K + 1 / tau2)

# projection onto half-space x1 <= x2 with identity metric from (1, 0)
print("projection:", (0.5, 0.5))
print("nll n=1 y=2: %.17g" % (0.5 * (math.log(2 * math.pi) + 4)))
print("q2 example:", 1 - 1 / 2)

# Multi-block likelihood and posterior mean, built from scratch:
# D=3, blocks {1,3} and {2}; knots x1:(0,.5,1) x2:(0,.3,1) x3:(0,1).
# Block layout is lexicographic with the last block variable fastest.
knots = {0: (0, .5, 1), 1: (0, .3, 1), 2: (0, 1)}
blocks = [(0, 2), (1,)]
sig2 = [0.7, 1.3]
thetas = [(0.4, 0.8), (0.6,)]
tau2 = 0.05
X = np.array([[0.1, 0.2, 0.3], [0.5, 0.9, 0.7], [0.8, 0.4, 0.1],
              [0.3, 0.6, 0.95], [0.95, 0.05, 0.5]])
Y = np.array([0.3, 1.1, 0.9, 0.8, 1.2])
import itertools
phis, Ks = [], []
for b, blk in enumerate(blocks):
    idx = list(itertools.product(*[range(len(knots[v])) for v in blk]))
    P = np.array([[np.prod([hat(knots[v], i[c], x[v]) for c, v in enumerate(blk)])
                   for x in X] for i in idx])
    Kb = np.array([[sig2[b] * np.prod([matern52(thetas[b][c], knots[v][i[c]], knots[v][j[c]])
                                       for c, v in enumerate(blk)]) for j in idx] for i in idx])
    Kb += 1e-10 * sig2[b] * np.eye(len(idx))
    phis.append(P)
    Ks.append(Kb)
C = sum(P.T @ Kb @ P for P, Kb in zip(phis, Ks)) + tau2 * np.eye(len(Y))
sign, logdet = np.linalg.slogdet(C)
alpha = np.linalg.solve(C, Y)
print("multi-block nll: %.17g" % (0.5 * (logdet + Y @ alpha + len(Y) * math.log(2 * math.pi))))
Phi = np.vstack(phis)
Kfull = np.zeros((Phi.shape[0], Phi.shape[0]))
o = 0
for Kb in Ks:
    Kfull[o:o + len(Kb), o:o + len(Kb)] = Kb
    o += len(Kb)
mu = Kfull @ Phi @ alpha
print("multi-block mu:", ", ".join("%.17g" % v for v in mu))
