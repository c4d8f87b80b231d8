"""Parametric curves on [0, 1] and vector fields along them.

Curves live in the universal cover R^d; field evaluation wraps them onto
the torus. Every curve exposes exact `point` and `velocity` maps that
broadcast over arrays of parameters, plus `breakpoints`: interior
parameters where the velocity jumps (plateau corners, concatenation
seams). Integrators align their grids with these so piecewise-smooth
curves lose no order.

`velocity(t, side)` takes one-sided limits at breakpoints: side=+1 is the
limit from above (default), side=-1 from below. Smooth curves ignore it.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy.optimize import brentq


class Curve:
    breakpoints: tuple = ()

    def __init__(self, d):
        self.d = d
        self._samples = {}

    def point(self, t):
        raise NotImplementedError

    def velocity(self, t, side=1):
        raise NotImplementedError

    def samples(self, m):
        """Cached uniform grid of m+1 nodes: (t, point, velocity)."""
        if m not in self._samples:
            t = np.linspace(0.0, 1.0, m + 1)
            self._samples[m] = (t, self.point(t), self.velocity(t))
        return self._samples[m]


class Line(Curve):
    def __init__(self, p0, p1):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        super().__init__(len(p0))
        self.p0, self.p1 = p0, p1

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.p0 + t[..., None] * (self.p1 - self.p0)

    def velocity(self, t, side=1):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.p1 - self.p0, t.shape + (self.d,)).copy()


class Circle(Curve):
    """Circle of given radius in the (axes[0], axes[1]) coordinate plane."""

    def __init__(self, center, radius, axes=(0, 1), turns=1.0, phase=0.0):
        center = np.asarray(center, dtype=float)
        super().__init__(len(center))
        self.center, self.radius = center, float(radius)
        self.axes, self.turns, self.phase = axes, float(turns), float(phase)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        ang = 2.0 * np.pi * self.turns * t + self.phase
        out = np.broadcast_to(self.center, t.shape + (self.d,)).copy()
        out[..., self.axes[0]] += self.radius * np.cos(ang)
        out[..., self.axes[1]] += self.radius * np.sin(ang)
        return out

    def velocity(self, t, side=1):
        t = np.asarray(t, dtype=float)
        ang = 2.0 * np.pi * self.turns * t + self.phase
        w = 2.0 * np.pi * self.turns * self.radius
        out = np.zeros(t.shape + (self.d,))
        out[..., self.axes[0]] = -w * np.sin(ang)
        out[..., self.axes[1]] = w * np.cos(ang)
        return out


class TrigCurve(Curve):
    """p0 + (p1 - p0) t + sum_k a_k sin(pi k t); exact endpoints p0, p1."""

    def __init__(self, p0, p1, coeffs):
        p0 = np.asarray(p0, dtype=float)
        super().__init__(len(p0))
        self.p0 = p0
        self.p1 = np.asarray(p1, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)  # (K, d)

    @classmethod
    def random(cls, rng, d, modes=3, amplitude=0.2, closed=False):
        p0 = rng.uniform(0.0, 1.0, size=d)
        p1 = p0 if closed else p0 + rng.uniform(-0.5, 0.5, size=d)
        k = np.arange(1, modes + 1)[:, None]
        coeffs = amplitude * rng.standard_normal((modes, d)) / k
        return cls(p0, p1, coeffs)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, len(self.coeffs) + 1)
        s = np.sin(np.pi * t[..., None] * k)  # (..., K)
        return self.p0 + t[..., None] * (self.p1 - self.p0) + s @ self.coeffs

    def velocity(self, t, side=1):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, len(self.coeffs) + 1)
        c = np.pi * k * np.cos(np.pi * t[..., None] * k)
        return (self.p1 - self.p0) + c @ self.coeffs


class PerturbedCurve(Curve):
    """gamma + eps X for a vector field X along gamma."""

    def __init__(self, base, field, eps):
        super().__init__(base.d)
        self.base, self.field, self.eps = base, field, float(eps)
        self.breakpoints = base.breakpoints

    def point(self, t):
        return self.base.point(t) + self.eps * self.field.value(t)

    def velocity(self, t, side=1):
        return self.base.velocity(t, side) + self.eps * self.field.deriv(t)


class PlateauCurve(Curve):
    """Follows gamma up to r, then stands still at gamma(r)."""

    def __init__(self, base, r):
        if not 0.0 <= r <= 1.0:
            raise ValueError("plateau parameter must lie in [0, 1]")
        super().__init__(base.d)
        self.base, self.r = base, float(r)
        bps = tuple(b for b in base.breakpoints if b < r)
        self.breakpoints = bps + ((r,) if 0.0 < r < 1.0 else ())

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.base.point(np.minimum(t, self.r))

    def velocity(self, t, side=1):
        t = np.asarray(t, dtype=float)
        v = self.base.velocity(np.minimum(t, self.r), side)
        live = (t < self.r) | ((t == self.r) & (side < 0))
        return np.where(live[..., None], v, 0.0)


class ReparamCurve(Curve):
    """gamma(phi(t)) for a smooth monotone phi with phi(0)=0, phi(1)=1."""

    def __init__(self, base, phi):
        super().__init__(base.d)
        self.base, self.phi = base, phi
        self.breakpoints = tuple(
            brentq(lambda t, b=b: phi.value(t) - b, 0.0, 1.0)
            for b in base.breakpoints
        )

    def point(self, t):
        return self.base.point(self.phi.value(np.asarray(t, dtype=float)))

    def velocity(self, t, side=1):
        t = np.asarray(t, dtype=float)
        u = self.phi.value(t)
        return self.base.velocity(u, side) * self.phi.deriv(t)[..., None]


class ConcatCurve(Curve):
    """First curve on [0, 1/2], second on [1/2, 1]; endpoints must meet."""

    def __init__(self, first, second, tol=1e-12):
        gap = np.max(np.abs(first.point(np.array(1.0)) - second.point(np.array(0.0))))
        if gap > tol:
            raise ValueError(f"concatenation endpoint gap {gap:.3e}")
        super().__init__(first.d)
        self.first, self.second = first, second
        bps = tuple(0.5 * b for b in first.breakpoints)
        bps += (0.5,)
        bps += tuple(0.5 + 0.5 * b for b in second.breakpoints)
        self.breakpoints = bps

    def point(self, t):
        t = np.asarray(t, dtype=float)
        lo = self.first.point(np.clip(2.0 * t, 0.0, 1.0))
        hi = self.second.point(np.clip(2.0 * t - 1.0, 0.0, 1.0))
        return np.where((t <= 0.5)[..., None], lo, hi)

    def velocity(self, t, side=1):
        t = np.asarray(t, dtype=float)
        in_first = (t < 0.5) | ((t == 0.5) & (side < 0))
        lo = self.first.velocity(np.clip(2.0 * t, 0.0, 1.0), side)
        hi = self.second.velocity(np.clip(2.0 * t - 1.0, 0.0, 1.0), side)
        return 2.0 * np.where(in_first[..., None], lo, hi)


class SineReparam:
    """phi(t) = t - beta sin(2 pi t) / (2 pi); needs |beta| < 1."""

    def __init__(self, beta=0.7):
        if not abs(beta) < 1.0:
            raise ValueError("reparametrization must be strictly monotone")
        self.beta = float(beta)

    def value(self, t):
        return t - self.beta * np.sin(2.0 * np.pi * t) / (2.0 * np.pi)

    def deriv(self, t):
        return 1.0 - self.beta * np.cos(2.0 * np.pi * t)


class PolyReparam:
    """phi(t) = t + alpha t (1 - t) (2 t - 1); monotone for |alpha| < 2."""

    def __init__(self, alpha=1.0):
        if not abs(alpha) < 2.0:
            raise ValueError("reparametrization must be strictly monotone")
        self.alpha = float(alpha)

    def value(self, t):
        return t + self.alpha * t * (1.0 - t) * (2.0 * t - 1.0)

    def deriv(self, t):
        return 1.0 + self.alpha * (-6.0 * t * t + 6.0 * t - 1.0)


def perturb(curve, field, eps):
    return PerturbedCurve(curve, field, eps)


def plateau(curve, r):
    return PlateauCurve(curve, r)


def reparametrize(curve, phi):
    return ReparamCurve(curve, phi)


def concat(first, second):
    return ConcatCurve(first, second)


# ---------------------------------------------------------------------------
# vector fields along a curve


class CurveField:
    """Vector field t -> X(t) in R^d with exact derivative.

    `vanishing_ends` flags membership in H^1_{0,0} (X(0) = X(1) = 0).
    """

    def __init__(self, value, deriv, d, vanishing_ends=False):
        self._value, self._deriv = value, deriv
        self.d = d
        self.vanishing_ends = vanishing_ends

    def value(self, t):
        return self._value(np.asarray(t, dtype=float))

    def deriv(self, t):
        return self._deriv(np.asarray(t, dtype=float))

    def __add__(self, other):
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        return CurveField(
            lambda t: self.value(t) + other.value(t),
            lambda t: self.deriv(t) + other.deriv(t),
            self.d,
            self.vanishing_ends and other.vanishing_ends,
        )

    def __mul__(self, c):
        return CurveField(
            lambda t: c * self.value(t),
            lambda t: c * self.deriv(t),
            self.d,
            self.vanishing_ends,
        )

    __rmul__ = __mul__


def sine_basis(n, d, axis=0):
    """e_n(t) e_axis with e_n(t) = sqrt(2) sin(pi n t); H^1_{0,0} basis."""
    unit = np.zeros(d)
    unit[axis] = 1.0
    w = np.pi * n
    root2 = np.sqrt(2.0)

    def value(t):
        return root2 * np.sin(w * t)[..., None] * unit

    def deriv(t):
        return root2 * w * np.cos(w * t)[..., None] * unit

    return CurveField(value, deriv, d, vanishing_ends=True)


class TrigField(CurveField):
    """Per-component a + b t + sum_k (c_k cos(pi k t) + s_k sin(pi k t))."""

    def __init__(self, a, b, cos_coeffs, sin_coeffs):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.cos_coeffs = np.asarray(cos_coeffs, dtype=float)  # (K, d)
        self.sin_coeffs = np.asarray(sin_coeffs, dtype=float)
        d = len(self.a)
        k = np.arange(1, len(self.cos_coeffs) + 1)

        def value(t):
            ang = np.pi * t[..., None] * k
            out = self.a + t[..., None] * self.b
            out = out + np.cos(ang) @ self.cos_coeffs
            return out + np.sin(ang) @ self.sin_coeffs

        def deriv(t):
            ang = np.pi * t[..., None] * k
            out = np.broadcast_to(self.b, t.shape + (d,)).astype(float).copy()
            out -= (np.pi * k * np.sin(ang)) @ self.cos_coeffs
            return out + (np.pi * k * np.cos(ang)) @ self.sin_coeffs

        ends = value(np.array([0.0, 1.0]))
        super().__init__(value, deriv, d, vanishing_ends=np.max(np.abs(ends)) < 1e-15)


def random_vanishing_field(rng, d, modes=4, amplitude=1.0):
    """Random H^1_{0,0} field: seeded sine series, zero at both ends."""
    k = np.arange(1, modes + 1)[:, None]
    coeffs = amplitude * rng.standard_normal((modes, d)) / k
    field = None
    for n in range(1, modes + 1):
        for mu in range(d):
            term = coeffs[n - 1, mu] * sine_basis(n, d, mu)
            field = term if field is None else field + term
    field.vanishing_ends = True
    return field


def random_field(rng, d, modes=3, amplitude=1.0):
    """Random field with generically nonzero endpoint values."""
    a = amplitude * rng.standard_normal(d)
    b = amplitude * rng.standard_normal(d)
    k = np.arange(1, modes + 1)[:, None]
    cos_c = amplitude * rng.standard_normal((modes, d)) / k
    sin_c = amplitude * rng.standard_normal((modes, d)) / k
    return TrigField(a, b, cos_c, sin_c)


def covariant_deriv_along(field):
    """Covariant derivative of X along the curve; flat metric, so X'."""
    return CurveField(field.deriv, _second_deriv_fd(field), field.d)


def _second_deriv_fd(field, h=1e-6):
    # only the first derivative is ever integrated; the second appears in
    # no formula, so a central difference of the exact X' is enough
    def second(t):
        return (field.deriv(t + h) - field.deriv(t - h)) / (2.0 * h)

    return second


# ---------------------------------------------------------------------------
# quadrature on [0, 1]


@functools.lru_cache(maxsize=None)
def gauss_legendre(panels, order=8):
    """Composite Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 / panels
    nodes = (edges[:-1, None] + half * (x + 1.0)).ravel()
    weights = np.tile(half * w, panels)
    return nodes, weights


def h0_inner(x, y, panels=256):
    """G0 inner product: integral of X(t) . Y(t) dt."""
    t, w = gauss_legendre(panels)
    return float(np.einsum("td,td,t->", x.value(t), y.value(t), w))


def h1_inner(x, y, panels=256):
    """G1 inner product: integral of X . Y + X' . Y' dt."""
    t, w = gauss_legendre(panels)
    val = np.einsum("td,td,t->", x.value(t), y.value(t), w)
    val += np.einsum("td,td,t->", x.deriv(t), y.deriv(t), w)
    return float(val)


def curve_integral(fn, curve, panels=256):
    """integral of fn(gamma(t)) dt for a scalar function on the torus."""
    t, w = gauss_legendre(panels)
    return float(np.einsum("t,t->", fn(curve.point(t)), w))


# ---------------------------------------------------------------------------
# named curve library


def make_curve(spec, d=2):
    """Build a curve from a JSON-style dict, e.g.

    {"kind": "fourier", "seed": 7, "modes": 3, "amplitude": 0.2}
    """
    kind = spec.get("kind")
    if kind == "line":
        return Line(spec["p0"], spec["p1"])
    if kind == "circle":
        return Circle(
            spec["center"],
            spec["radius"],
            axes=tuple(spec.get("axes", (0, 1))),
            turns=spec.get("turns", 1.0),
            phase=spec.get("phase", 0.0),
        )
    if kind == "fourier":
        rng = np.random.default_rng(np.random.SeedSequence(spec["seed"]))
        return TrigCurve.random(
            rng,
            d,
            modes=spec.get("modes", 3),
            amplitude=spec.get("amplitude", 0.2),
            closed=spec.get("closed", False),
        )
    raise ValueError(f"unknown curve kind {kind!r}")
