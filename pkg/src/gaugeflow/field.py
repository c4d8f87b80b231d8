"""Gauge fields on flat tori: representations, curvature, action.

A gauge field A assigns to each point x of the torus a d-tuple of Lie
elements A_mu(x) (connection coefficients in a fixed trivialization; the
torus is flat, so there are no Christoffel terms anywhere). Three
representations share one interface:

* `AnalyticField`: finite Fourier series with exact derivatives.
* `LatticeField`: values on an m^d grid; derivatives by 4th-order central
  stencils, off-grid evaluation by periodic cubic spline interpolation.
* `TransformedField`: the gauge transform of another field by a gauge map,
  evaluated pointwise exactly (no sampling error).

The interface is batched: `eval(x)` maps points (..., d) to (..., d, N, N),
`partial_all` adds a leading derivative axis, `second_all` two of them.

Derived local quantities (`curvature`, `cov_deriv_curvature`, ...) are free
functions of the interface, so they work for every representation.
"""

from __future__ import annotations

import json
import pathlib

import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from .algebra import commutator, dagger, expm, project_lie, random_lie


class Torus:
    """Flat torus (R/LZ)^d with d in {2, 3}."""

    def __init__(self, d=2, L=1.0):
        if d not in (2, 3):
            raise ValueError("torus dimension must be 2 or 3")
        if not L > 0:
            raise ValueError("torus side must be positive")
        self.d, self.L = int(d), float(L)

    @property
    def volume(self):
        return self.L**self.d

    def wrap(self, x):
        return np.mod(x, self.L)

    def to_dict(self):
        return {"d": self.d, "L": self.L}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["d"], obj["L"])

    def __eq__(self, other):
        return isinstance(other, Torus) and (self.d, self.L) == (other.d, other.L)


class ScalarFourier:
    """Real scalar function on the torus: c0 + sum_m c_m trig(2 pi k_m.x / L).

    Carries exact derivatives to third order and closed-form heat evolution;
    used for curve functionals L_f and for gauge-map angles.
    """

    def __init__(self, torus, kvecs, coeffs, phases, const=0.0):
        self.torus = torus
        self.kvecs = np.asarray(kvecs, dtype=float).reshape(-1, torus.d)
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        self.phases = np.asarray(phases, dtype=int).reshape(-1)  # 0 cos, 1 sin
        self.const = float(const)
        self._w = 2.0 * np.pi * self.kvecs / torus.L  # (M, d)

    @classmethod
    def random(cls, rng, torus, modes=3, amplitude=1.0, kmax=2):
        kvecs, phases = [], []
        while len(kvecs) < modes:
            k = rng.integers(-kmax, kmax + 1, size=torus.d)
            if np.any(k):
                kvecs.append(k)
                phases.append(rng.integers(0, 2))
        coeffs = amplitude * rng.standard_normal(modes)
        coeffs /= np.sum(np.asarray(kvecs, dtype=float) ** 2, axis=1)
        return cls(torus, np.array(kvecs), coeffs, np.array(phases))

    def _trig(self, x, order):
        ang = np.asarray(x, dtype=float) @ self._w.T  # (..., M)
        c, s = np.cos(ang), np.sin(ang)
        iscos = self.phases == 0
        table = [
            np.where(iscos, c, s),
            np.where(iscos, -s, c),
            np.where(iscos, -c, -s),
            np.where(iscos, s, -c),
        ]
        return table[order]

    def value(self, x):
        return self.const + self._trig(x, 0) @ self.coeffs

    def grad(self, x):
        t = self._trig(x, 1) * self.coeffs
        return np.einsum("...m,ma->...a", t, self._w)

    def hess(self, x):
        t = self._trig(x, 2) * self.coeffs
        return np.einsum("...m,ma,mb->...ab", t, self._w, self._w)

    def third(self, x):
        t = self._trig(x, 3) * self.coeffs
        return np.einsum("...m,ma,mb,mc->...abc", t, self._w, self._w, self._w)

    def laplacian(self, x):
        t = self._trig(x, 2) * self.coeffs
        return t @ np.sum(self._w**2, axis=1)

    def decay_rates(self):
        """Heat decay rate (2 pi |k| / L)^2 per mode."""
        return np.sum(self._w**2, axis=1)

    def heat(self, s):
        """Solution of d_s f = Laplace f at time s with this initial value."""
        return ScalarFourier(
            self.torus,
            self.kvecs,
            self.coeffs * np.exp(-self.decay_rates() * s),
            self.phases,
            const=self.const,
        )

    def ds(self, s):
        """d_s of the heat evolution at time s, itself a scalar field."""
        rates = self.decay_rates()
        return ScalarFourier(
            self.torus, self.kvecs, -rates * np.exp(-rates * s) * self.coeffs, self.phases
        )


# ---------------------------------------------------------------------------
# gauge fields


class GaugeField:
    """Interface: torus, n, eval, partial_all, second_all."""

    torus: Torus
    n: int

    def eval(self, x):
        raise NotImplementedError

    def partial_all(self, x):
        raise NotImplementedError

    def second_all(self, x):
        raise NotImplementedError

    def partial(self, x, axis):
        return self.partial_all(x)[..., axis, :, :, :]


class AnalyticField(GaugeField):
    """Finite Fourier series A_mu(x) = sum_m C_m trig(2 pi k_m.x / L)."""

    def __init__(self, torus, n, kvecs=None, mus=None, coeffs=None, phases=None):
        self.torus, self.n = torus, int(n)
        d = torus.d
        self.kvecs = (
            np.zeros((0, d)) if kvecs is None else np.asarray(kvecs, dtype=float).reshape(-1, d)
        )
        m = len(self.kvecs)
        self.mus = np.zeros(m, dtype=int) if mus is None else np.asarray(mus, dtype=int)
        self.coeffs = (
            np.zeros((m, n, n), dtype=np.complex128)
            if coeffs is None
            else np.asarray(coeffs, dtype=np.complex128).reshape(m, n, n)
        )
        self.phases = np.zeros(m, dtype=int) if phases is None else np.asarray(phases, dtype=int)
        self._w = 2.0 * np.pi * self.kvecs / torus.L

    @classmethod
    def zero(cls, torus, n=2):
        return cls(torus, n)

    @classmethod
    def random_su(cls, rng, torus, n=2, modes=2, amplitude=0.2, kmax=2):
        """Seeded random field: `modes` Fourier modes per direction."""
        kvecs, mus, coeffs, phases = [], [], [], []
        for mu in range(torus.d):
            got = 0
            while got < modes:
                k = rng.integers(-kmax, kmax + 1, size=torus.d)
                if not np.any(k):
                    continue
                kvecs.append(k)
                mus.append(mu)
                phases.append(rng.integers(0, 2))
                coeffs.append(random_lie(rng, n, scale=amplitude) / np.sum(k.astype(float) ** 2))
                got += 1
        return cls(torus, n, np.array(kvecs), np.array(mus), np.stack(coeffs), np.array(phases))

    @classmethod
    def random_abelian(cls, rng, torus, n=2, modes=3, amplitude=0.2, kmax=2, direction=None):
        """All coefficients proportional to one Lie direction (commuting)."""
        t_dir = random_lie(rng, n) if direction is None else np.asarray(direction)
        t_dir = t_dir / np.max(np.abs(t_dir))
        kvecs, mus, coeffs, phases = [], [], [], []
        for _ in range(modes):
            k = rng.integers(-kmax, kmax + 1, size=torus.d)
            if not np.any(k):
                continue
            kvecs.append(k)
            mus.append(rng.integers(0, torus.d))
            phases.append(rng.integers(0, 2))
            scale = amplitude * rng.standard_normal() / np.sum(k.astype(float) ** 2)
            coeffs.append(scale * t_dir)
        return cls(torus, n, np.array(kvecs), np.array(mus), np.stack(coeffs), np.array(phases))

    def _trig(self, x, order):
        ang = np.asarray(x, dtype=float) @ self._w.T
        c, s = np.cos(ang), np.sin(ang)
        iscos = self.phases == 0
        table = [
            np.where(iscos, c, s),
            np.where(iscos, -s, c),
            np.where(iscos, -c, -s),
        ]
        return table[order]

    def _sum_modes(self, weights, x_shape):
        # weights: (..., M) real; scatter mode sums into the mu slots
        d, n = self.torus.d, self.n
        out = np.zeros(x_shape[:-1] + (d, n, n), dtype=np.complex128)
        for mu in range(d):
            sel = self.mus == mu
            if np.any(sel):
                out[..., mu, :, :] = np.einsum(
                    "...m,mij->...ij", weights[..., sel], self.coeffs[sel]
                )
        return out

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if len(self.kvecs) == 0:
            return np.zeros(x.shape[:-1] + (self.torus.d, self.n, self.n), dtype=np.complex128)
        return self._sum_modes(self._trig(x, 0), x.shape)

    def partial_all(self, x):
        x = np.asarray(x, dtype=float)
        d, n = self.torus.d, self.n
        if len(self.kvecs) == 0:
            return np.zeros(x.shape[:-1] + (d, d, n, n), dtype=np.complex128)
        t1 = self._trig(x, 1)
        return np.stack(
            [self._sum_modes(t1 * self._w[:, a], x.shape) for a in range(d)], axis=-4
        )

    def second_all(self, x):
        x = np.asarray(x, dtype=float)
        d, n = self.torus.d, self.n
        if len(self.kvecs) == 0:
            return np.zeros(x.shape[:-1] + (d, d, d, n, n), dtype=np.complex128)
        t2 = self._trig(x, 2)
        rows = []
        for a in range(d):
            rows.append(
                np.stack(
                    [
                        self._sum_modes(t2 * self._w[:, a] * self._w[:, b], x.shape)
                        for b in range(d)
                    ],
                    axis=-4,
                )
            )
        return np.stack(rows, axis=-5)

    @property
    def kmax(self):
        return int(np.max(np.abs(self.kvecs))) if len(self.kvecs) else 0

    def to_dict(self):
        modes = []
        for k, mu, c, ph in zip(self.kvecs, self.mus, self.coeffs, self.phases):
            modes.append(
                {
                    "k": [int(v) for v in k],
                    "mu": int(mu),
                    "phase": "cos" if ph == 0 else "sin",
                    "re": np.real(c).tolist(),
                    "im": np.imag(c).tolist(),
                }
            )
        return {"kind": "analytic", "torus": self.torus.to_dict(), "n": self.n, "modes": modes}

    @classmethod
    def from_dict(cls, obj):
        torus = Torus.from_dict(obj["torus"])
        modes = obj["modes"]
        if not modes:
            return cls(torus, obj["n"])
        kvecs = np.array([m["k"] for m in modes], dtype=float)
        mus = np.array([m["mu"] for m in modes], dtype=int)
        phases = np.array([0 if m["phase"] == "cos" else 1 for m in modes], dtype=int)
        coeffs = np.stack([np.array(m["re"]) + 1j * np.array(m["im"]) for m in modes])
        return cls(torus, obj["n"], kvecs, mus, coeffs, phases)


# --- lattice stencils (shared with the heat-flow module) -------------------


def stencil_d1(arr, axis, a):
    """4th-order central first derivative along a periodic site axis."""
    f1, b1 = np.roll(arr, -1, axis), np.roll(arr, 1, axis)
    f2, b2 = np.roll(arr, -2, axis), np.roll(arr, 2, axis)
    return (8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * a)


class LatticeField(GaugeField):
    """Gauge field sampled on a uniform m^d grid, x_i = a i, a = L / m.

    values: complex array of shape grid + (d, N, N), site axes first.
    Off-grid evaluation interpolates with periodic cubic splines; stencil
    derivative grids are themselves interpolated for off-grid derivatives.
    """

    def __init__(self, torus, values):
        values = np.asarray(values, dtype=np.complex128)
        d = torus.d
        grid = values.shape[:d]
        if len(set(grid)) != 1:
            raise ValueError("grid must have equal extent per axis")
        if values.shape[d] != d:
            raise ValueError("direction axis mismatch")
        if values.shape[-1] != values.shape[-2]:
            raise ValueError("matrix axes mismatch")
        self.torus = torus
        self.values = values
        self.n = values.shape[-1]
        self.m = grid[0]
        self.a = torus.L / self.m
        self._grids = {"val": values}
        self._splines = {}

    @classmethod
    def sample(cls, field, m):
        """Sample any gauge field on an m^d grid (exact at the sites)."""
        torus = field.torus
        axes = [np.arange(m) * (torus.L / m)] * torus.d
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(torus, field.eval(pts))

    def _grid(self, key):
        if key not in self._grids:
            if key[0] == "d":
                base = self.values
                arr = stencil_d1(base, key[1], self.a)
            elif key[0] == "dd":
                arr = stencil_d1(self._grid(("d", key[1])), key[2], self.a)
            else:
                raise KeyError(key)
            self._grids[key] = arr
        return self._grids[key]

    def _spline(self, key):
        if key not in self._splines:
            arr = self._grid(key)
            d = self.torus.d
            flat = arr.reshape(arr.shape[:d] + (-1,))
            coeff = np.empty_like(flat)
            for c in range(flat.shape[-1]):
                re = spline_filter(np.ascontiguousarray(flat[..., c].real), order=3, mode="grid-wrap")
                im = spline_filter(np.ascontiguousarray(flat[..., c].imag), order=3, mode="grid-wrap")
                coeff[..., c] = re + 1j * im
            self._splines[key] = (coeff, arr.shape[d:])
        return self._splines[key]

    def _interp(self, key, x):
        coeff, trailing = self._spline(key)
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        coords = (x.reshape(-1, self.torus.d) / self.a).T  # (d, M)
        out = np.empty((coords.shape[1], coeff.shape[-1]), dtype=np.complex128)
        for c in range(coeff.shape[-1]):
            re = map_coordinates(coeff[..., c].real, coords, order=3, mode="grid-wrap", prefilter=False)
            im = map_coordinates(coeff[..., c].imag, coords, order=3, mode="grid-wrap", prefilter=False)
            out[:, c] = re + 1j * im
        return out.reshape(lead + trailing)

    def eval(self, x):
        return self._interp("val", x)

    def partial_all(self, x):
        d = self.torus.d
        return np.stack([self._interp(("d", a), x) for a in range(d)], axis=-4)

    def second_all(self, x):
        d = self.torus.d
        rows = []
        for a in range(d):
            row = [self._interp(("dd", min(a, b), max(a, b)), x) for b in range(d)]
            rows.append(np.stack(row, axis=-4))
        return np.stack(rows, axis=-5)

    # --- serialization: JSON header + flat little-endian binary ---

    def save(self, base):
        base = pathlib.Path(base)
        header = {
            "kind": "lattice",
            "torus": self.torus.to_dict(),
            "n": self.n,
            "grid": self.m,
            "dtype": "complex128-little-endian",
            "layout": "C order: site indices (row-major), direction mu, matrix row, matrix column",
            "data": base.with_suffix(".bin").name,
        }
        base.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
        base.with_suffix(".bin").write_bytes(np.ascontiguousarray(self.values).astype("<c16").tobytes())

    @classmethod
    def load(cls, base):
        base = pathlib.Path(base)
        header = json.loads(base.with_suffix(".json").read_text())
        torus = Torus.from_dict(header["torus"])
        m, n, d = header["grid"], header["n"], torus.d
        raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<c16")
        values = raw.reshape((m,) * d + (d, n, n)).astype(np.complex128)
        return cls(torus, values)


# ---------------------------------------------------------------------------
# gauge maps and transformed fields


def _leibniz(u, v):
    """Derivative tensors (order 0..3) of a pointwise matrix product."""
    e = np.einsum
    out0 = u[0] @ v[0]
    out1 = e("...aij,...jk->...aik", u[1], v[0]) + e("...ij,...ajk->...aik", u[0], v[1])
    out2 = (
        e("...abij,...jk->...abik", u[2], v[0])
        + e("...aij,...bjk->...abik", u[1], v[1])
        + e("...bij,...ajk->...abik", u[1], v[1])
        + e("...ij,...abjk->...abik", u[0], v[2])
    )
    out3 = (
        e("...abcij,...jk->...abcik", u[3], v[0])
        + e("...abij,...cjk->...abcik", u[2], v[1])
        + e("...acij,...bjk->...abcik", u[2], v[1])
        + e("...bcij,...ajk->...abcik", u[2], v[1])
        + e("...aij,...bcjk->...abcik", u[1], v[2])
        + e("...bij,...acjk->...abcik", u[1], v[2])
        + e("...cij,...abjk->...abcik", u[1], v[2])
        + e("...ij,...abcjk->...abcik", u[0], v[3])
    )
    return [out0, out1, out2, out3]


class GaugeMap:
    """Smooth map psi: torus -> SU(N), a product of factors exp(theta_j(x) T_j).

    Each factor has a fixed Lie direction T_j and a scalar Fourier angle
    theta_j, so all derivatives through third order are exact.
    """

    def __init__(self, torus, n, factors):
        self.torus, self.n = torus, int(n)
        self.factors = list(factors)  # [(ScalarFourier, (n, n) Lie direction)]

    @classmethod
    def random(cls, rng, torus, n=2, factors=2, modes=2, amplitude=0.7, kmax=1):
        fs = []
        for _ in range(factors):
            theta = ScalarFourier.random(rng, torus, modes=modes, amplitude=amplitude, kmax=kmax)
            t_dir = random_lie(rng, n)
            t_dir = t_dir / np.sqrt(np.sum(np.abs(t_dir) ** 2))
            fs.append((theta, t_dir))
        return cls(torus, n, fs)

    def _factor_derivs(self, theta, t_dir, x):
        th0 = theta.value(x)
        th1 = theta.grad(x)
        th2 = theta.hess(x)
        th3 = theta.third(x)
        f0 = expm(th0[..., None, None] * t_dir)
        t2 = t_dir @ t_dir
        t3 = t2 @ t_dir
        e = np.einsum
        f1 = e("...a,ij,...jk->...aik", th1, t_dir, f0)
        f2 = e("...ab,ij,...jk->...abik", th2, t_dir, f0) + e(
            "...a,...b,ij,...jk->...abik", th1, th1, t2, f0
        )
        f3 = (
            e("...abc,ij,...jk->...abcik", th3, t_dir, f0)
            + e("...ab,...c,ij,...jk->...abcik", th2, th1, t2, f0)
            + e("...ac,...b,ij,...jk->...abcik", th2, th1, t2, f0)
            + e("...bc,...a,ij,...jk->...abcik", th2, th1, t2, f0)
            + e("...a,...b,...c,ij,...jk->...abcik", th1, th1, th1, t3, f0)
        )
        return [f0, f1, f2, f3]

    def derivs(self, x, order=1):
        """psi and its derivative tensors [D0, D1, ..., D_order] at x."""
        x = np.asarray(x, dtype=float)
        tensors = None
        for theta, t_dir in self.factors:
            ft = self._factor_derivs(theta, t_dir, x)
            tensors = ft if tensors is None else _leibniz(tensors, ft)
        if tensors is None:
            d, n = self.torus.d, self.n
            eye = np.broadcast_to(np.eye(n, dtype=np.complex128), x.shape[:-1] + (n, n)).copy()
            tensors = [
                eye,
                np.zeros(x.shape[:-1] + (d, n, n), dtype=np.complex128),
                np.zeros(x.shape[:-1] + (d, d, n, n), dtype=np.complex128),
                np.zeros(x.shape[:-1] + (d, d, d, n, n), dtype=np.complex128),
            ]
        return tensors[: order + 1]

    def value(self, x):
        return self.derivs(x, order=0)[0]


class TransformedField(GaugeField):
    """Gauge transform psi^-1 A psi + psi^-1 d psi, evaluated exactly.

    psi is unitary, so the derivative tensors of psi^-1 are the conjugate
    transposes of the tensors of psi.
    """

    def __init__(self, base, gauge_map):
        if base.n != gauge_map.n:
            raise ValueError("gauge rank mismatch")
        self.base, self.map = base, gauge_map
        self.torus, self.n = base.torus, base.n

    def _tensors(self, x, order):
        psi = self.map.derivs(x, order=order)
        inv = [dagger(p) for p in psi]
        return psi, inv

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        psi, inv = self._tensors(x, 1)
        a0 = self.base.eval(x)
        e = np.einsum
        conj = e("...ij,...mjk,...kl->...mil", inv[0], a0, psi[0])
        return conj + e("...ij,...mjk->...mik", inv[0], psi[1])

    def partial_all(self, x):
        x = np.asarray(x, dtype=float)
        psi, inv = self._tensors(x, 2)
        a0 = self.base.eval(x)
        a1 = self.base.partial_all(x)
        e = np.einsum
        out = e("...aij,...mjk,...kl->...amil", inv[1], a0, psi[0])
        out += e("...ij,...amjk,...kl->...amil", inv[0], a1, psi[0])
        out += e("...ij,...mjk,...akl->...amil", inv[0], a0, psi[1])
        out += e("...aij,...mjk->...amik", inv[1], psi[1])
        out += e("...ij,...amjk->...amik", inv[0], psi[2])
        return out

    def second_all(self, x):
        x = np.asarray(x, dtype=float)
        psi, inv = self._tensors(x, 3)
        a0 = self.base.eval(x)
        a1 = self.base.partial_all(x)
        a2 = self.base.second_all(x)
        e = np.einsum
        out = e("...abij,...mjk,...kl->...abmil", inv[2], a0, psi[0])
        out += e("...aij,...bmjk,...kl->...abmil", inv[1], a1, psi[0])
        out += e("...bij,...amjk,...kl->...abmil", inv[1], a1, psi[0])
        out += e("...aij,...mjk,...bkl->...abmil", inv[1], a0, psi[1])
        out += e("...bij,...mjk,...akl->...abmil", inv[1], a0, psi[1])
        out += e("...ij,...abmjk,...kl->...abmil", inv[0], a2, psi[0])
        out += e("...ij,...amjk,...bkl->...abmil", inv[0], a1, psi[1])
        out += e("...ij,...bmjk,...akl->...abmil", inv[0], a1, psi[1])
        out += e("...ij,...mjk,...abkl->...abmil", inv[0], a0, psi[2])
        out += e("...abij,...mjk->...abmik", inv[2], psi[1])
        out += e("...aij,...bmjk->...abmik", inv[1], psi[2])
        out += e("...bij,...amjk->...abmik", inv[1], psi[2])
        out += e("...ij,...abmjk->...abmik", inv[0], psi[3])
        return out


def gauge_transform(field, gauge_map):
    """psi^-1 A psi + psi^-1 d psi as an exactly evaluable field.

    The result supports the full field interface (including second
    derivatives), so curvature and its covariant derivatives of the
    transformed field carry no sampling error. Use LatticeField.sample to
    put it on a grid when a lattice is wanted.
    """
    return TransformedField(field, gauge_map)


# ---------------------------------------------------------------------------
# local differential-geometric quantities


def curvature(field, x):
    """F_mn = d_m A_n - d_n A_m + [A_m, A_n]; shape (..., d, d, N, N).

    Antisymmetry in (m, n) holds by construction of the return value.
    """
    a0 = field.eval(x)
    p = field.partial_all(x)
    aa = np.einsum("...mij,...vjk->...mvik", a0, a0)
    f = p - np.swapaxes(p, -4, -3) + aa - np.swapaxes(aa, -4, -3)
    return f


def cov_deriv_curvature(field, x):
    """nabla_l F_mn = d_l F_mn + [A_l, F_mn]; shape (..., d, d, d, N, N).

    Index order (l, m, n). The torus is flat, so the covariant derivative
    has no Christoffel part.
    """
    e = np.einsum
    a0 = field.eval(x)
    p = field.partial_all(x)
    s = field.second_all(x)
    f = curvature(field, x)
    df = s - np.swapaxes(s, -4, -3)
    df += e("...lmij,...vjk->...lmvik", p, a0) - e("...vij,...lmjk->...lmvik", a0, p)
    df += e("...mij,...lvjk->...lmvik", a0, p) - e("...lvij,...mjk->...lmvik", p, a0)
    df += e("...lij,...mvjk->...lmvik", a0, f) - e("...mvij,...ljk->...lmvik", f, a0)
    return df


def cov_div_curvature(field, x):
    """(div F)_n = sum_m nabla_m F_mn; shape (..., d, N, N)."""
    return np.einsum("...mmvij->...vij", cov_deriv_curvature(field, x))


def bianchi_residual(field, x):
    """Max norm of the cyclic sum nabla_l F_mn + nabla_m F_nl + nabla_n F_lm."""
    df = cov_deriv_curvature(field, x)
    cyc = df + np.moveaxis(df, (-5, -4, -3), (-3, -5, -4)) + np.moveaxis(
        df, (-5, -4, -3), (-4, -3, -5)
    )
    return float(np.max(np.abs(cyc)))


def lattice_curvature_grid(field):
    """On-grid curvature of a LatticeField via 4th-order stencils."""
    d, a = field.torus.d, field.a
    vals = field.values
    p = np.stack([stencil_d1(vals, ax, a) for ax in range(d)], axis=-4)
    aa = np.einsum("...mij,...vjk->...mvik", vals, vals)
    return p - np.swapaxes(p, -4, -3) + aa - np.swapaxes(aa, -4, -3)


def ym_action(field, samples=None):
    """Yang-Mills action -1/2 integral sum_mn tr(F_mn F_mn) dx >= 0.

    Lattice fields use the on-grid stencil curvature and a Riemann sum;
    other representations sample a grid fine enough that the periodic
    Riemann sum is spectrally accurate.
    """
    torus = field.torus
    if isinstance(field, LatticeField):
        f = lattice_curvature_grid(field)
    else:
        if samples is None:
            kmax = field.kmax if isinstance(field, AnalyticField) else 12
            samples = max(32, 4 * kmax + 3)
        axes = [np.arange(samples) * (torus.L / samples)] * torus.d
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        f = curvature(field, pts)
    dens = -0.5 * np.einsum("...mvij,...mvji->...", f, f)
    mean = np.mean(np.real(dens))
    return float(mean * torus.volume)


# ---------------------------------------------------------------------------
# named field library and serialization


def make_field(spec, torus=None, n=2):
    """Build a gauge field from a JSON-style dict.

    Kinds: zero | random_su | abelian | pure_gauge | lattice (wraps a base
    spec with {"grid": m}).
    """
    torus = torus or Torus(**spec.get("torus", {}))
    kind = spec.get("kind", "random_su")
    seed = spec.get("seed", 0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if kind == "zero":
        return AnalyticField.zero(torus, n)
    if kind == "random_su":
        return AnalyticField.random_su(
            rng,
            torus,
            n=n,
            modes=spec.get("modes", 2),
            amplitude=spec.get("amplitude", 0.2),
            kmax=spec.get("kmax", 2),
        )
    if kind == "abelian":
        return AnalyticField.random_abelian(
            rng,
            torus,
            n=n,
            modes=spec.get("modes", 3),
            amplitude=spec.get("amplitude", 0.2),
            kmax=spec.get("kmax", 2),
        )
    if kind == "pure_gauge":
        psi = GaugeMap.random(
            rng,
            torus,
            n=n,
            factors=spec.get("factors", 2),
            modes=spec.get("modes", 2),
            amplitude=spec.get("amplitude", 0.7),
        )
        return TransformedField(AnalyticField.zero(torus, n), psi)
    if kind == "lattice":
        base = make_field(spec["base"], torus, n)
        return LatticeField.sample(base, spec.get("grid", 64))
    raise ValueError(f"unknown field kind {spec.get('kind')!r}")


def save_field(field, base):
    base = pathlib.Path(base)
    if isinstance(field, LatticeField):
        field.save(base)
    elif isinstance(field, AnalyticField):
        base.with_suffix(".json").write_text(
            json.dumps(field.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    else:
        raise TypeError("only analytic and lattice fields serialize")


def load_field(base):
    base = pathlib.Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    if header["kind"] == "lattice":
        return LatticeField.load(base)
    if header["kind"] == "analytic":
        return AnalyticField.from_dict(header)
    raise ValueError(f"unknown serialized field kind {header['kind']!r}")
