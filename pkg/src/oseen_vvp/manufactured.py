"""Manufactured solutions: symbolic fields turned into numpy callables."""
from dataclasses import dataclass

import numpy as np
import sympy as sym

X, Y = sym.symbols("x y", real=True)


def _lambdify(expr):
    fn = sym.lambdify((X, Y), expr, "numpy")

    def wrapped(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.broadcast(x, y).shape)

    return wrapped


def _pair(e1, e2):
    f1, f2 = _lambdify(e1), _lambdify(e2)
    return lambda x, y: (f1(x, y), f2(x, y))


@dataclass
class ManufacturedSolution:
    """Exact (u, w, p) with the forcing that makes them solve the Oseen problem.

    ``w = sqrt(nu) curl u`` and
    ``f = sigma u + sqrt(nu) curl w + nu^{-1/2} w x beta + grad p``,
    where ``beta = u`` unless a separate symbolic beta is given.
    """
    u: tuple
    p: object
    nu: float
    sigma: float
    beta: tuple = None

    def __post_init__(self):
        u1, u2 = (sym.sympify(c) for c in self.u)
        p = sym.sympify(self.p)
        b1, b2 = (u1, u2) if self.beta is None else (sym.sympify(c) for c in self.beta)
        rnu = sym.sqrt(self.nu)
        w = rnu * (sym.diff(u2, X) - sym.diff(u1, Y))
        f1 = self.sigma * u1 + rnu * sym.diff(w, Y) + (w * -b2) / rnu + sym.diff(p, X)
        f2 = self.sigma * u2 - rnu * sym.diff(w, X) + (w * b1) / rnu + sym.diff(p, Y)
        self.exprs = {"u1": u1, "u2": u2, "w": w, "p": p, "f1": f1, "f2": f2,
                      "b1": b1, "b2": b2, "div": sym.diff(u1, X) + sym.diff(u2, Y)}
        self.velocity = _pair(u1, u2)
        self.vorticity = _lambdify(w)
        self.pressure = _lambdify(p)
        self.forcing = _pair(f1, f2)
        self.beta_field = _pair(b1, b2)
        self.divergence = _lambdify(self.exprs["div"])
        self.div_velocity = self.divergence
        self.curl_vorticity = _pair(sym.diff(w, Y), -sym.diff(w, X))
        self.grad_vorticity = _pair(sym.diff(w, X), sym.diff(w, Y))
        self.grad_velocity = (_pair(sym.diff(u1, X), sym.diff(u1, Y)),
                              _pair(sym.diff(u2, X), sym.diff(u2, Y)))

    def normal_velocity(self, x, y, nx, ny):
        ux, uy = self.velocity(x, y)
        return ux * nx + uy * ny

    def tangential_velocity(self, x, y, nx, ny):
        """u x n = u1 n2 - u2 n1."""
        ux, uy = self.velocity(x, y)
        return ux * ny - uy * nx


def test1_solution(nu=0.1, sigma=10.0):
    """Smooth solution on the unit square with u = 0 on the boundary, p = x^4 - y^4."""
    pi = sym.pi
    u1 = sym.sin(pi * X) ** 2 * sym.sin(pi * Y) ** 2 * sym.cos(pi * Y)
    u2 = -sym.Rational(1, 3) * sym.sin(2 * pi * X) * sym.sin(pi * Y) ** 3
    return ManufacturedSolution((u1, u2), X**4 - Y**4, nu, sigma)
