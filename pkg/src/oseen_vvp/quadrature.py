"""Quadrature rules on the reference triangle and the unit interval.

The reference triangle has vertices (0, 0), (1, 0), (0, 1) and area 1/2.
Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre and
Gauss-Jacobi rules, so every weight is positive and every point interior.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray  # (nq, 2) reference coordinates, or (nq,) on [0, 1]
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def barycentric(self):
        p = np.atleast_2d(self.points)
        return np.column_stack([1.0 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_line(degree: int) -> Quadrature:
    """Gauss-Legendre rule on [0, 1], exact for polynomials of ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return Quadrature(0.5 * (x + 1.0), 0.5 * w, degree)


@lru_cache(maxsize=None)
def triangle(degree: int) -> Quadrature:
    """Collapsed Gauss rule on the reference triangle, exact up to ``degree``."""
    n = max(1, (degree + 2) // 2)
    xg, wg = np.polynomial.legendre.leggauss(n)
    # Jacobi(1, 0) absorbs the (1 - s) Jacobian of the collapse.
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (xj + 1.0)  # collapsed direction
    ws = 0.25 * wj
    t = 0.5 * (xg + 1.0)
    wt = 0.5 * wg
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    x = S
    y = (1.0 - S) * T
    pts = np.column_stack([x.ravel(), y.ravel()])
    return Quadrature(pts, W.ravel(), degree)
