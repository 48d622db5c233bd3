"""
Markovian embedding of classical generalized Langevin equations.

The equation of motion is

    m u'' = -U'(u) - int_0^t C(t - s) u'(s) ds + xi(t)

with a deterministic forcing ``xi``.  When ``C(t) = sum_j c_j exp(-r_j t)``
the memory integral equals ``sum_j c_j phi_j`` with auxiliary modes obeying
``phi_j' = -r_j phi_j + u'``, so the history never has to be stored.
SOE poles ``z`` relate to the rates by ``r = i z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np
from scipy import special

from .contour import build_from_segments
from .oracle import BcfOracle
from .soe import SoeRepresentation, conjugate_closure, eval_grid, l1_error, time_grid
from .spectral import AnalyticSegment

SERIES_CUTOFF = 0.1
SERIES_TERMS = 14
REALITY_TOL = 1e-10
FRACTIONAL_NODE_CAP = 1000


@dataclass
class MemoryKernel:
    """Memory kernel C(t), its two-sided spectrum S(w) and an optional SOE.

    ``C(t) = (1/2pi) int S(w) exp(-i w t) dw``.  ``segments`` describe
    ``S / 2pi`` as analytic pieces when the spectrum is integrable.
    """
    C: Callable
    S: Callable
    soe: Optional[SoeRepresentation] = None
    segments: Optional[list] = None
    fit_error: Optional[float] = None
    name: str = "custom"
    _tables: dict = field(default_factory=dict, repr=False)

    def table(self, dt: float, n: int) -> np.ndarray:
        """``C(k dt)`` for ``k = 0 .. n``; cached so repeated runs share it."""
        key = (float(dt), int(n))
        if key not in self._tables:
            for (d, m), tab in self._tables.items():
                if d == key[0] and m >= n:
                    return tab[:n + 1]
            self._tables[key] = np.asarray(self.C(np.arange(n + 1) * dt), dtype=float)
        return self._tables[key]

    def with_soe(self, soe, fit_error=None) -> "MemoryKernel":
        return MemoryKernel(self.C, self.S, soe, self.segments, fit_error, self.name, self._tables)


def chain_kernel(m: float, K: float, abs_tol: float = 1e-12) -> MemoryKernel:
    """Boundary-atom kernel of a harmonic chain with masses m and springs K.

    The spectrum is ``m sqrt(wD^2 - w^2)`` on ``|w| < wD = 2K/sqrt(m)`` and
    ``C(t) = (1/pi) int_0^wD S(w) cos(w t) dw`` is computed by the oracle's
    panel quadrature.
    """
    if not (m > 0 and K > 0):
        raise ValueError("m and K must be positive")
    wd = 2 * K / math.sqrt(m)

    def ev(w, dl, dr):
        return m * np.sqrt(dl) * np.sqrt(dr) / (2 * np.pi)

    seg = AnalyticSegment(-wd, wd, ev, 0.5, 0.5, label="chain")
    oracle = BcfOracle(None, abs_tol=abs_tol, segments=[seg])

    def C(t):
        t = np.asarray(t, dtype=float)
        flat = np.abs(t.ravel())
        return oracle.evaluate(flat).values.real.reshape(t.shape)

    def S(w):
        w = np.asarray(w, dtype=float)
        inside = np.abs(w) < wd
        return np.where(inside, m * np.sqrt(np.clip(wd ** 2 - w ** 2, 0, None)), 0.0)

    return MemoryKernel(C, S, segments=[seg], name="chain")


def kernel_to_soe(kernel: MemoryKernel, eps: float, T: float, dt: float = 0.01,
                  refine: bool = True) -> MemoryKernel:
    """Attach a conjugate-closed SOE of the kernel with L1 target ``eps`` on ``[0, T]``."""
    if kernel.segments is None:
        raise ValueError("kernel has no analytic segments of its spectrum")
    n = time_grid(T, dt).size - 1
    ref = kernel.table(dt, n).astype(complex)
    soe = build_from_segments(kernel.segments, eps, T, "L1", refine=refine,
                              reference=ref, dt=dt, meta={"kernel": kernel.name})
    soe = conjugate_closure(soe)
    err = l1_error(soe, ref, T, dt)
    return kernel.with_soe(soe.with_error("L1", err), err)


def fractional_kernel(gamma_nu: float, nu: float, t_min: float, T: float,
                      eps_rel: float = 1e-6) -> MemoryKernel:
    """Power-law kernel ``gamma_nu / Gamma(1 - nu) t^-nu`` as real exponentials.

    Uses ``t^-nu = (1/Gamma(nu)) int exp(nu x - e^x t) dx`` discretized by the
    trapezoid rule in ``x``.  The ends of the ``x`` range come from the
    incomplete gamma function, the step from the strip width ``pi/2``; both
    are tightened until the relative error on ``[t_min, T]`` is below
    ``eps_rel``.
    """
    if not 0 < nu < 1:
        raise ValueError("nu must lie in (0, 1)")
    if not 0 < t_min < T:
        raise ValueError("need 0 < t_min < T")
    if not (gamma_nu > 0 and eps_rel > 0):
        raise ValueError("gamma_nu and eps_rel must be positive")
    pref = gamma_nu / math.gamma(1 - nu)
    probe = np.geomspace(t_min, T, 2001)
    exact = probe ** -nu
    target = eps_rel / 10
    for _ in range(20):
        x_lo = math.log(special.gammaincinv(nu, target) / T)
        x_hi = math.log(special.gammainccinv(nu, target) / t_min)
        h = np.pi ** 2 / math.log(10 / target)
        n = int(math.ceil((x_hi - x_lo) / h))
        if n + 1 > FRACTIONAL_NODE_CAP:
            break
        x = x_lo + h * np.arange(n + 1)
        w = h * np.exp(nu * x) / math.gamma(nu)
        s = np.exp(x)
        approx = np.exp(-np.outer(probe, s)) @ w
        rel = float(np.max(np.abs(approx - exact) / exact))
        if rel <= eps_rel:
            soe = SoeRepresentation(pref * w + 0j, -1j * s, T,
                                    {"provenance": "quadrature", "real_kernel": True,
                                     "t_min": t_min, "h": h})
            soe = soe.with_error("rel", rel)
            break
        target /= 10
    else:
        soe = None
    if soe is None:
        raise ValueError(f"relative error {eps_rel} not reached within {FRACTIONAL_NODE_CAP} nodes")

    def C(t):
        return pref * np.asarray(t, dtype=float) ** -nu

    amp = 2 * gamma_nu * math.sin(math.pi * nu / 2)

    def S(w):
        return amp * np.abs(np.asarray(w, dtype=float)) ** (nu - 1)

    return MemoryKernel(C, S, soe, None, rel, "fractional")


# ---------------------------------------------------------------- systems

def no_forcing(t):
    return 0.0


@dataclass
class GleSystem:
    """Particle of mass ``m`` with force ``-U'(u)``, memory and forcing."""
    m: float
    force: Callable
    kernel: MemoryKernel
    forcing: Callable = field(default=None)
    potential: Optional[Callable] = None
    u0: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if self.forcing is None:
            self.forcing = no_forcing

    def compiled(self):
        """numba versions of (force, forcing), or None."""
        if not hasattr(self, "_compiled"):
            f, x = _jit(self.force), _jit(self.forcing)
            self._compiled = (f, x) if f is not None and x is not None else None
        return self._compiled

    def energy(self, u, v):
        pot = self.potential(u) if self.potential is not None else 0.0
        return 0.5 * self.m * v ** 2 + pot


def harmonic(m: float, kernel: MemoryKernel, stiffness: float = 1.0,
             u0: float = 1.0, v0: float = 0.0, forcing=None) -> GleSystem:
    """GLE in the potential ``U(u) = stiffness u^2 / 2``."""
    return GleSystem(m, lambda u: -stiffness * u, kernel,
                     forcing,
                     lambda u: 0.5 * stiffness * u ** 2, u0, v0)


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    max_imag_ratio: float = 0.0

    def __len__(self):
        return self.t.size


def _source_coefficients(q, dt):
    """Weights A, B of ``v_n``, ``v_{n+1}`` in the exact mode update."""
    q = np.asarray(q, dtype=complex)
    small = np.abs(q) < SERIES_CUTOFF
    qs = np.where(small, 1.0, q)
    em = np.exp(-qs)
    a_direct = (1 - em * (1 + qs)) / qs ** 2
    b0_direct = (1 - em) / qs
    k = np.arange(SERIES_TERMS)
    fact1 = np.array([math.factorial(i + 1) for i in k], dtype=float)
    fact2 = np.array([math.factorial(i + 2) for i in k], dtype=float)
    powers = (-q[..., None]) ** k
    a_series = (powers * ((k + 1) / fact2)).sum(-1)
    b0_series = (powers / fact1).sum(-1)
    a = np.where(small, a_series, a_direct)
    b0 = np.where(small, b0_series, b0_direct)
    return dt * a, dt * (b0 - a)


def _check_finite(n, *vals):
    if not all(math.isfinite(x) for x in vals):
        raise FloatingPointError(f"non-finite state at step {n}")


def integrate_aux(system: GleSystem, dt: float, T: float) -> Trajectory:
    """Velocity-Verlet integration with auxiliary modes, cost O(T/dt * N).

    Modes are advanced exactly for a velocity that is linear over the step;
    the resulting implicit dependence on ``v_{n+1}`` is scalar and solved in
    closed form.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    soe = system.kernel.soe
    if soe is None:
        raise ValueError("kernel has no SOE; call kernel_to_soe first")
    n_steps = int(math.floor(T / dt * (1 + 1e-12)))
    c = soe.c
    q = 1j * soe.z * dt
    decay = np.exp(-q)
    A, B = _source_coefficients(q, dt)
    cA, cB = c * A, c * B
    b_re = float(np.sum(cB).real)
    m, force, xi = system.m, system.force, system.forcing
    half = dt / (2 * m)
    phi = np.zeros(c.size, dtype=complex)
    u, v = float(system.u0), float(system.v0)
    mem = 0.0
    ts = np.arange(n_steps + 1) * dt
    us = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    us[0], vs[0] = u, v
    worst = 0.0
    denom = 1 + half * b_re
    for n in range(n_steps):
        v_half = v + half * (force(u) - mem + xi(ts[n]))
        u = u + dt * v_half
        known = decay * phi + A * v
        mk = np.dot(c, known)
        v_new = (v_half + half * (force(u) - mk.real + xi(ts[n + 1]))) / denom
        phi = known + B * v_new
        full = np.dot(c, phi)
        mem = full.real
        scale = float(np.abs(c).sum()) * (abs(v_new) + abs(v)) + 1e-300
        worst = max(worst, abs(full.imag) / scale)
        v = v_new
        _check_finite(n + 1, u, v)
        us[n + 1], vs[n + 1] = u, v
    E = np.array([system.energy(a, b) for a, b in zip(us, vs)])
    return Trajectory(ts, us, vs, E, worst)


def _jit(fn):
    """Compile a scalar callable with numba, or None if it cannot be typed."""
    try:
        compiled = numba.njit(fn)
        float(compiled(0.0))
        return compiled
    except Exception:
        return None


@numba.njit(cache=False)
def _convolution_loop(C, Crev, u0, v0, dt, m, n_steps, force, forcing):
    L = n_steps
    half = dt / (2 * m)
    c0 = C[0]
    denom = 1 + half * dt * c0 / 2
    us = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    us[0] = u0
    vs[0] = v0
    u, v, mem = u0, v0, 0.0
    for n in range(n_steps):
        v_half = v + half * (force(u) - mem + forcing(n * dt))
        u = u + dt * v_half
        hist = 0.0
        for j in range(n):
            hist += Crev[L - n + j] * vs[1 + j]
        known = dt * (0.5 * C[n + 1] * vs[0] + hist)
        v = (v_half + half * (force(u) - known + forcing((n + 1) * dt))) / denom
        mem = known + 0.5 * dt * c0 * v
        us[n + 1] = u
        vs[n + 1] = v
    return us, vs


def _convolution_python(C, Crev, u0, v0, dt, m, n_steps, force, forcing):
    L = n_steps
    half = dt / (2 * m)
    c0 = C[0]
    denom = 1 + half * dt * c0 / 2
    us = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    us[0], vs[0] = u0, v0
    u, v, mem = u0, v0, 0.0
    for n in range(n_steps):
        v_half = v + half * (force(u) - mem + forcing(n * dt))
        u = u + dt * v_half
        # sum_{k=1}^{n} C[n+1-k] v_k plus the half-weight v_0 end
        hist = np.dot(Crev[L - n:L], vs[1:n + 1]) if n else 0.0
        known = dt * (0.5 * C[n + 1] * vs[0] + hist)
        v = (v_half + half * (force(u) - known + forcing((n + 1) * dt))) / denom
        mem = known + 0.5 * dt * c0 * v
        us[n + 1], vs[n + 1] = u, v
    return us, vs


def integrate_convolution(system: GleSystem, dt: float, T: float) -> Trajectory:
    """Same Verlet stepping with the memory integral over the stored history.

    The integral is the trapezoid rule on the grid, cost O((T/dt)^2).  The
    kernel table ``C(k dt)`` is taken from :meth:`MemoryKernel.table`.  The
    loop is compiled with numba when the force and forcing can be; the
    first call for a given system includes compilation time.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_steps = int(math.floor(T / dt * (1 + 1e-12)))
    C = system.kernel.table(dt, n_steps)
    if not np.all(np.isfinite(C)):
        raise ValueError("kernel is not finite on the grid (singular at t = 0?)")
    Crev = np.ascontiguousarray(C[::-1])
    args = (C, Crev, float(system.u0), float(system.v0), float(dt), float(system.m), n_steps)
    jitted = system.compiled()
    if jitted is not None:
        us, vs = _convolution_loop(*args, *jitted)
    else:
        us, vs = _convolution_python(*args, system.force, system.forcing)
    bad = ~(np.isfinite(us) & np.isfinite(vs))
    if np.any(bad):
        raise FloatingPointError(f"non-finite state at step {int(np.argmax(bad))}")
    E = np.array([system.energy(a, b) for a, b in zip(us, vs)])
    return Trajectory(np.arange(n_steps + 1) * dt, us, vs, E)
