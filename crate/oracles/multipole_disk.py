"""Multipole collocation for a column of disks of radius r, period H in xi2.

Independent check of m1 = (|grad W10|^2 + |omega|)/(2H) and M = |grad W2|^2
for the exact circle (the FEM uses an inscribed polygon, so expect an
O(polygon) offset). Usage: python3 multipole_disk.py r H [K]
"""
import sys
import numpy as np
import sympy as sp

r = float(sys.argv[1]) if len(sys.argv) > 1 else 0.08
H = float(sys.argv[2]) if len(sys.argv) > 2 else 0.4
K = int(sys.argv[3]) if len(sys.argv) > 3 else 24

w = sp.symbols("w")
psi = [sp.pi / H * sp.coth(sp.pi * w / H)]
for k in range(1, K):
    # psi_{k+1} ~ w^-(k+1): -(1/k) d/dw psi_k
    psi.append(sp.simplify(-sp.diff(psi[-1], w) / k))
funcs = [sp.lambdify(w, p, "numpy") for p in psi]

n = 8 * K
theta = 2 * np.pi * (np.arange(n) + 0.5) / n
pts = r * np.exp(1j * theta)
basis = np.array([f(pts) * r ** (k + 1) for k, f in enumerate(funcs)]).T


def solve(lead):
    # Im(lead + sum c_k psi_k) = const on the circle; unknowns Re/Im c_k, const.
    a = np.hstack([np.imag(basis), np.imag(1j * basis), -np.ones((n, 1))])
    sol, *_ = np.linalg.lstsq(a, -np.imag(lead(pts)), rcond=None)
    c = (sol[:K] + 1j * sol[K:2 * K]) * r ** (np.arange(K) + 1)
    field = np.real(basis @ (c / r ** (np.arange(K) + 1)))
    return c, field


c1, w1 = solve(lambda z: z)
m1 = np.real(c1[0]) * np.pi / H
area = np.pi * r * r
ds = 2 * np.pi * r / n
energy1 = np.sum(w1 * np.cos(theta)) * ds  # int W10 (-nu_1), nu into hole
c2, w2 = solve(lambda z: -1j * z)
m_xi = np.sum(w2 * np.sin(theta)) * ds
print(f"m1={m1:.12f} m1_energy={(energy1 + area) / (2 * H):.12f} M={m_xi:.12f} area={area:.12f}")
