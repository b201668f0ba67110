"""Independent reference computations used only by the tests.

None of these touch the package's state machinery:

* ``SymbolicFock`` writes states as polynomials in commuting creation
  symbols (sympy) and transforms them by substitution.
* ``two_qubit_rho`` / ``chsh_dense`` do polarization CHSH by dense 4x4
  linear algebra over all 16 joint outcomes.
* ``dense_visibility`` brute-forces max/min of a sampled fringe.
"""
import math

import numpy as np
import sympy as sp


class SymbolicFock:
    names = ("aH", "aV", "bH", "bV", "b1", "b2", "s1", "s2", "A", "B")

    def __init__(self):
        self.sym = {n: sp.Symbol(n, commutative=True) for n in self.names}

    def __getitem__(self, name):
        return self.sym[name]

    def terms(self, expr):
        """{monomial exponent dict: amplitude} with the sqrt(n!) normalisation applied."""
        poly = sp.Poly(sp.expand(expr), *self.sym.values())
        out = {}
        for exps, coeff in poly.terms():
            occ = {n: e for n, e in zip(self.names, exps) if e}
            amp = complex(sp.N(coeff, 30)) * math.sqrt(math.prod(math.factorial(e) for e in exps))
            out[tuple(sorted(occ.items()))] = amp
        return out

    def pair_after_splitter(self):
        """H photon into port alpha, V photon into port beta of a symmetric 50:50 splitter."""
        t = 1 / sp.sqrt(2)
        r = sp.I / sp.sqrt(2)
        s = self.sym
        return (t * s["aH"] + r * s["bH"]) * (r * s["aV"] + t * s["bV"])

    def keep(self, expr, predicate):
        poly = sp.Poly(sp.expand(expr), *self.sym.values())
        out = 0
        for exps, coeff in poly.terms():
            occ = dict(zip(self.names, exps))
            if predicate(occ):
                out += coeff * sp.Mul(*[self.sym[n] ** e for n, e in occ.items()])
        return out

    def coincidence_alpha_beta(self, expr):
        return self.keep(expr, lambda o: o["aH"] + o["aV"] == 1 and o["bH"] + o["bV"] == 1)

    def pbs_and_launch(self, expr):
        s = self.sym
        return expr.subs({s["bV"]: s["s1"], s["bH"]: s["s2"]}, simultaneous=True)

    def herald(self, expr, theta_deg):
        """<theta_alpha| contraction for states linear in the alpha symbols."""
        s = self.sym
        th = sp.Float(theta_deg, 30) * sp.pi / 180
        return sp.expand(sp.cos(th) * sp.diff(expr, s["aH"]) + sp.sin(th) * sp.diff(expr, s["aV"]))


def ket_vec(theta_deg):
    th = math.radians(theta_deg)
    return np.array([math.cos(th), math.sin(th)])


def two_qubit_rho(gamma):
    """gamma singlet + (1-gamma)/2 (HV + VH), basis |HH>, |HV>, |VH>, |VV> (alpha first)."""
    psi = np.array([0, 1, -1, 0]) / math.sqrt(2)
    hv = np.array([0, 1, 0, 0.0])
    vh = np.array([0, 0, 1, 0.0])
    return gamma * np.outer(psi, psi) + (1 - gamma) / 2 * (np.outer(hv, hv) + np.outer(vh, vh))


def correlation_dense(rho, a, b):
    total = 0.0
    for da, sa in ((0, 1), (90, -1)):
        for db, sb in ((0, 1), (90, -1)):
            v = np.kron(ket_vec(a + da), ket_vec(b + db))
            total += sa * sb * float(v @ rho @ v)
    return total


def chsh_dense(gamma, a, ap, b, bp):
    rho = two_qubit_rho(gamma)
    E = lambda x, y: correlation_dense(rho, x, y)  # noqa: E731
    return E(a, b) - E(a, bp) + E(ap, b) + E(ap, bp)


def dense_visibility(fn, period, n=200_001):
    x = np.linspace(0, period, n)
    y = fn(x)
    return (y.max() - y.min()) / (y.max() + y.min())
