"""Functional calculus of the parallel transport on curve space.

The transport U_{1,0}(gamma) is a map from curves into the unitary group.
This module computes, numerically exactly (quadrature-limited):

  * its H^0 gradient along the curve,
  * the integral kernels of its second derivative (a regular part, a
    first-order "levy" part and a singular delta part),
  * the full second-derivative bilinear form assembled from the kernels,
  * the Levy Laplacian: the Cesaro mean over an orthonormal H^1_{0,0}
    basis of second directional derivatives, which for the transport has
    the closed form  -int U_{1,t} (div F)_n gammadot^n U_{t,0} dt,
  * a brute-force Cesaro estimator that touches none of the above,
    used to validate the closed forms.

All second-derivative quantities are checked two independent ways in the
test-suite; `levy_laplacian_transport` additionally cross-checks its two
internal routes on every call unless told not to.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .algebra import dagger, fiber_metric, maxabs
from .field import cov_deriv_curvature, cov_div_curvature, curvature
from .path import curve_integral, gauss_legendre, perturb, sine_basis
from .transport import DEFAULT_STEP, TransportContext, transport


# ---------------------------------------------------------------------------
# first derivative
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class GradientField:
    """H^0 gradient of the transport along one curve.

    seg_values[k] holds J^m(t) = -U_{1,t} F^m_n gammadot^n U_{t,0} sampled
    on segment k's nodes, shape (npts, d, N, N). Velocities are one-sided
    at segment junctions, so kinked curves keep full quadrature order.
    """

    ctx: TransportContext
    seg_values: list

    def pair(self, x_field, phi):
        """H^0 inner product <grad U, X phi> = int sum_m <J^m, phi> X^m dt."""

        def integrand(seg):
            fm = fiber_metric(self.seg_values[seg.index], phi)  # (t, d)
            xv = x_field.value(seg.ts)
            return np.einsum("tm,tm->t", fm, xv)

        return float(self.ctx.integrate(integrand))

    def at_nodes(self):
        """Gradient on the global node grid (right-limit at junctions)."""
        m = len(self.ctx.nodes)
        d, n = self.seg_values[0].shape[1], self.seg_values[0].shape[-1]
        out = np.empty((m, d, n, n), dtype=np.complex128)
        for seg in self.ctx.segments():
            out[seg.sl] = self.seg_values[seg.index]
        return out


def h0_gradient_transport(field, curve, step=DEFAULT_STEP, ctx=None):
    if ctx is None:
        ctx = TransportContext(field, curve, step=step)
    values = []
    for seg in ctx.segments():
        f = curvature(field, ctx.seg_points(seg))
        vel = ctx.seg_velocities(seg)
        g = np.einsum("tmvij,tv->tmij", f, vel)
        values.append(-np.einsum("tij,tmjk,tkl->tmil",
                                 ctx.to_end[seg.sl], g, ctx.from_start[seg.sl]))
    return GradientField(ctx, values)


class FunctionalGradient:
    """H^0 gradient of the integral functional gamma -> int f(gamma(t)) dt."""

    def __init__(self, f, curve, panels=256):
        self.f, self.curve, self.panels = f, curve, panels

    def values(self, ts):
        return self.f.grad(self.curve.point(np.asarray(ts)))

    def pair(self, x_field):
        nodes, weights = gauss_legendre(self.panels)
        g = self.values(nodes)
        xv = x_field.value(nodes)
        return float(np.einsum("t,tm,tm->", weights, g, xv))


def h0_gradient_functional(f, curve, panels=256):
    return FunctionalGradient(f, curve, panels)


# ---------------------------------------------------------------------------
# second derivative kernels
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class KernelTriple:
    """Kernels of the second derivative of the transport along one curve.

    The bilinear form splits into a double-time (Volterra) part with the
    factored kernel K_V(t, s), a same-time first-order part K_L(t) and a
    singular part K_S(t) paired against one derivative of a variation:

      D^2 U(X, Y) = int_t OX(t) int_0^t IY(s) ds dt  + (X <-> Y)
                  + int K_L,ab X^a Y^b dt
                  + 1/2 int K_S,ab (X'^a Y^b + Y'^a X^b) dt

    with OX(t) = sum_a out[t, a] X^a(t), IY(s) = sum_b in[s, b] Y^b(s).
    `dense` optionally materializes K_V on a subgrid for inspection.
    """

    ctx: TransportContext
    levy_seg: list      # (npts, d, d, N, N) per segment
    singular_seg: list  # (npts, d, d, N, N)
    out_seg: list       # (npts, d, N, N)
    in_seg: list        # (npts, d, N, N)
    dense_index: np.ndarray | None = None
    dense: np.ndarray | None = None


def second_kernels(field, curve, step=DEFAULT_STEP, ctx=None, dense=0):
    if ctx is None:
        ctx = TransportContext(field, curve, step=step)
    levy_seg, singular_seg, out_seg, in_seg = [], [], [], []
    for seg in ctx.segments():
        pts = ctx.seg_points(seg)
        vel = ctx.seg_velocities(seg)
        uf, ut = ctx.from_start[seg.sl], ctx.to_end[seg.sl]
        f = curvature(field, pts)
        df = cov_deriv_curvature(field, pts)            # [a, b, c] = D_a F_bc
        g = np.einsum("tmvij,tv->tmij", f, vel)
        h1 = np.einsum("tabcij,tc->tabij", df, vel)     # D_a F_{b .} gammadot
        sym = h1 + np.swapaxes(h1, 1, 2)
        levy_seg.append(-0.5 * np.einsum("tij,tabjk,tkl->tabil", ut, sym, uf))
        singular_seg.append(np.einsum("tij,tabjk,tkl->tabil", ut, f, uf))
        out_seg.append(np.einsum("tij,tmjk,tkl->tmil", ut, g, uf))
        in_seg.append(np.einsum("tij,tmjk,tkl->tmil", dagger(uf), g, uf))

    dense_index = dense_vals = None
    if dense:
        m = len(ctx.nodes)
        out_glob = np.empty((m,) + out_seg[0].shape[1:], dtype=np.complex128)
        in_glob = np.empty_like(out_glob)
        for seg in ctx.segments():
            out_glob[seg.sl] = out_seg[seg.index]
            in_glob[seg.sl] = in_seg[seg.index]
        dense_index = np.unique(np.linspace(0, m - 1, int(dense)).round().astype(int))
        o, i = out_glob[dense_index], in_glob[dense_index]
        upper = np.einsum("taij,svjk->tsavik", o, i)    # t >= s branch
        lower = np.einsum("svij,tajk->tsavik", o, i)    # t <  s branch
        tt = ctx.nodes[dense_index]
        mask = (tt[:, None] >= tt[None, :])[:, :, None, None, None, None]
        dense_vals = np.where(mask, upper, lower)
    return KernelTriple(ctx, levy_seg, singular_seg, out_seg, in_seg,
                        dense_index, dense_vals)


def levy_divergence(kernels):
    """Trace over directions of the first-order kernel: int sum_a K_L,aa dt.

    This is the kernel-route value of the Levy Laplacian of the transport;
    the double-time and singular kernels contribute nothing to the Cesaro
    mean (their sine-series coefficients are summable and average out).
    """
    ctx = kernels.ctx
    return ctx.integrate(
        lambda seg: np.einsum("taaij->tij", kernels.levy_seg[seg.index])
    )


def assemble_bilinear(kernels, x_field, y_field):
    """Second derivative D^2 U(X, Y) assembled from the kernel triple.

    X and Y must vanish at the endpoints (variations fixing both ends).
    Returns an (N, N) matrix; symmetric in X <-> Y by construction.
    """
    ctx = kernels.ctx

    def volterra(xf, yf):
        ciy = ctx.cumulative(
            lambda seg: np.einsum("tmij,tm->tij",
                                  kernels.in_seg[seg.index], yf.value(seg.ts))
        )

        def outer(seg):
            ox = np.einsum("tmij,tm->tij",
                           kernels.out_seg[seg.index], xf.value(seg.ts))
            return ox @ ciy[seg.sl]

        return ctx.integrate(outer)

    def levy_part(seg):
        xv, yv = x_field.value(seg.ts), y_field.value(seg.ts)
        return np.einsum("tabij,ta,tb->tij", kernels.levy_seg[seg.index], xv, yv)

    def singular_part(seg):
        xv, yv = x_field.value(seg.ts), y_field.value(seg.ts)
        dx, dy = x_field.deriv(seg.ts), y_field.deriv(seg.ts)
        ks = kernels.singular_seg[seg.index]
        return 0.5 * (np.einsum("tabij,ta,tb->tij", ks, dx, yv)
                      + np.einsum("tabij,ta,tb->tij", ks, dy, xv))

    return (volterra(x_field, y_field) + volterra(y_field, x_field)
            + ctx.integrate(levy_part) + ctx.integrate(singular_part))


# ---------------------------------------------------------------------------
# Levy Laplacian
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class LevyLaplacian:
    value: np.ndarray         # closed-form route
    kernel_value: np.ndarray  # divergence of the first-order kernel
    mismatch: float           # relative max-norm gap between the routes


def levy_laplacian_transport(field, curve, step=DEFAULT_STEP, ctx=None,
                             check=True, check_tol=1e-8):
    """Levy Laplacian of the transport along the curve.

    Closed form: -int U_{1,t} (div F)_n(gamma) gammadot^n U_{t,0} dt with
    (div F)_n = sum_m D_m F_{mn}. With check=True (default) the same value
    is recomputed from the second-derivative kernels and the two routes
    must agree to check_tol; a gap means a broken derivative somewhere.
    """
    if ctx is None:
        ctx = TransportContext(field, curve, step=step)

    def integrand(seg):
        div = cov_div_curvature(field, ctx.seg_points(seg))
        c = np.einsum("tvij,tv->tij", div, ctx.seg_velocities(seg))
        return -(ctx.to_end[seg.sl] @ c @ ctx.from_start[seg.sl])

    closed = ctx.integrate(integrand)
    if not check:
        return LevyLaplacian(closed, closed, 0.0)
    kernel_value = levy_divergence(second_kernels(field, curve, ctx=ctx))
    mismatch = maxabs(closed - kernel_value) / (1.0 + maxabs(closed))
    if mismatch > check_tol:
        raise RuntimeError(
            f"Levy Laplacian routes disagree: relative gap {mismatch:.3e}"
        )
    return LevyLaplacian(closed, kernel_value, mismatch)


def levy_laplacian_functional(f, curve, panels=256):
    """Levy Laplacian of gamma -> int f(gamma(t)) dt, i.e. int (lap f)(gamma) dt."""
    return curve_integral(f.laplacian, curve, panels=panels)


# ---------------------------------------------------------------------------
# brute-force Cesaro estimator
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class CesaroResult:
    estimate: np.ndarray | float
    n_modes: int
    partial: dict            # mode count -> running Cesaro mean
    base: np.ndarray | float


def cesaro_second_trace(evaluate, curve, d, n_modes, eps=1e-3,
                        checkpoints=()):
    """Cesaro mean (1/n) sum_{k<=n} sum_axis D^2 evaluate (along sine modes).

    Second directional derivatives are central finite differences of
    `evaluate` (any curve -> matrix/scalar map) along the orthonormal
    H^1_{0,0} basis fields sqrt(2) sin(pi k t) e_axis. The running mean is
    recorded at each checkpoint so convergence is visible to callers.
    """
    base = evaluate(curve)
    total = None
    partial = {}
    for k in range(1, n_modes + 1):
        sk = None
        for axis in range(d):
            x = sine_basis(k, d, axis)
            up = evaluate(perturb(curve, x, eps))
            um = evaluate(perturb(curve, x, -eps))
            dd = (up - 2.0 * base + um) / (eps * eps)
            sk = dd if sk is None else sk + dd
        total = sk if total is None else total + sk
        if k in checkpoints or k == n_modes:
            partial[k] = total / k
    return CesaroResult(total / n_modes, n_modes, partial, base)


def cesaro_levy_estimate(field, curve, n_modes=64, eps=1e-3,
                         step=DEFAULT_STEP, checkpoints=(4, 8, 16, 32, 64)):
    """Brute-force Cesaro estimate of the Levy Laplacian of the transport.

    Uses nothing but whole-transport evaluations, so it is an oracle for
    `levy_laplacian_transport`; expect O(1/n) convergence of the mean.
    """
    return cesaro_second_trace(
        lambda c: transport(field, c, step=step),
        curve, field.torus.d, n_modes, eps=eps, checkpoints=checkpoints,
    )
