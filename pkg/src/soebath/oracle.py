"""
Reference values of bath correlation functions.

The oracle integrates ``J_eff(w) exp(-i w t)`` along the real axis only
(it never touches the deformed contour used to build SOEs), so comparing
an SOE with the oracle is an independent check.  Each analytic segment is
cut into panels graded geometrically toward both endpoints and capped in
width to resolve the oscillation; panels use a 7/15-point Gauss-Kronrod
pair, and the innermost panel at a power-law endpoint uses Gauss-Jacobi
rules that absorb the singular factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .spectral import AnalyticSegment, SpectralModel, effective_segments

# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

GK_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[1:7:2] = _WG[:3]
G_WEIGHTS[7] = _WG[3]
G_WEIGHTS[9:15:2] = _WG[2::-1]

JACOBI_HIGH, JACOBI_LOW = 15, 8
MAX_BLOCK = 4_000_000
ADAPT_ROUNDS = 8


class OracleToleranceWarning(UserWarning):
    """The oracle's error estimate exceeds the requested tolerance."""


@dataclass
class _Panels:
    """Panel set of one segment, stored as distances from an endpoint.

    ``side`` is 0 when offsets are measured from the left end, 1 from the
    right end; keeping the offsets (not the absolute frequency) preserves
    accuracy next to singular endpoints.
    """
    side: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self):
        return self.lo.size

    def bisect(self, mask):
        mid = 0.5 * (self.lo[mask] + self.hi[mask])
        side = np.concatenate([self.side[~mask], self.side[mask], self.side[mask]])
        lo = np.concatenate([self.lo[~mask], self.lo[mask], mid])
        hi = np.concatenate([self.hi[~mask], mid, self.hi[mask]])
        return _Panels(side, lo, hi)


@dataclass
class _EndRule:
    """Weighted rule on the innermost panel next to a power-law endpoint."""
    side: int
    off_hi: np.ndarray
    w_hi: np.ndarray
    off_lo: np.ndarray
    w_lo: np.ndarray


def _jacobi_rule(n, alpha, delta):
    x, w = special.roots_jacobi(n, 0.0, alpha)
    off = delta * (x + 1) / 2
    # weight (1 + x)^alpha absorbed: divide the integrand by off^alpha later
    return off, w * (delta / 2) ** (alpha + 1)


def _evaluate_at(seg: AnalyticSegment, side, off):
    width = seg.b - seg.a
    side = np.broadcast_to(side, off.shape)
    left = side == 0
    dl = np.where(left, off, width - off)
    dr = np.where(left, width - off, off)
    w = np.where(left, seg.a + off, seg.b - off)
    return w, np.asarray(seg(w.astype(complex), dl.astype(complex), dr.astype(complex)), dtype=complex)


@dataclass
class BcfOracle:
    """Adaptive real-axis quadrature of ``Delta(t)`` for a spectral model.

    Parameters
    ----------
    model : SpectralModel
    abs_tol : float
        Target absolute error per time point.
    theta0 : float
        Only used to build (and probe) the segments.
    eps_tail : float, optional
        Budget for the smooth cutoff of an infinite tail; defaults to
        ``abs_tol / 100`` so truncation is invisible at the tolerance.
    segments : list of AnalyticSegment, optional
        Integrate these instead of the model's segments (``model`` may then
        be None).
    """
    model: Optional[SpectralModel]
    abs_tol: float = 1e-10
    theta0: float = np.pi / 12
    eps_tail: Optional[float] = None
    segments: Optional[list] = None
    depth: int = field(init=False)

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.segments is None:
            if self.model is None:
                raise ValueError("need a model or explicit segments")
            tail = self.eps_tail if self.eps_tail is not None else self.abs_tol / 100
            self.segments = effective_segments(self.model, self.theta0, eps_tail=tail)
        self.segments = list(self.segments)
        self.depth = int(math.ceil(math.log2(1.0 / self.abs_tol))) + 10
        self._cache = {}
        self._ends = [self._end_rules(s) for s in self.segments]

    # ------------------------------------------------------------ panels
    def _graded(self, seg: AnalyticSegment, width_cap: float) -> _Panels:
        half = seg.half_width
        d = half * 2.0 ** -np.arange(self.depth + 1)
        sides, los, his = [], [], []
        for side in (0, 1):
            for k in range(self.depth):
                lo, hi = d[k + 1], d[k]
                m = max(1, int(math.ceil((hi - lo) / width_cap)))
                edges = lo + (hi - lo) * np.arange(m + 1) / m
                los.append(edges[:-1])
                his.append(edges[1:])
                sides.append(np.full(m, side))
            if self._regular_end(seg, side):
                los.append(np.array([0.0]))
                his.append(np.array([d[-1]]))
                sides.append(np.array([side]))
        return _Panels(np.concatenate(sides), np.concatenate(los), np.concatenate(his))

    def _regular_end(self, seg, side):
        # innermost panel handled by a plain rule when the end is regular
        alpha = seg.alpha_a if side == 0 else seg.alpha_b
        return alpha == 0 or alpha == int(alpha)

    def _end_rules(self, seg):
        rules = []
        delta = seg.half_width * 2.0 ** -self.depth
        for side, alpha in ((0, seg.alpha_a), (1, seg.alpha_b)):
            if alpha == 0 or alpha == int(alpha):
                continue
            oh, wh = _jacobi_rule(JACOBI_HIGH, alpha, delta)
            ol, wl = _jacobi_rule(JACOBI_LOW, alpha, delta)
            # integrand values are divided by off^alpha at evaluation time
            rules.append((_EndRule(side, oh, wh, ol, wl), alpha))
        return rules

    def _panels(self, k: int, width_cap: float) -> _Panels:
        key = (k, width_cap)
        if key not in self._cache:
            self._cache[key] = self._graded(self.segments[k], width_cap)
        return self._cache[key]

    # ------------------------------------------------------- integration
    def _panel_sums(self, seg, panels: _Panels, t):
        """Kronrod values and per-panel |K - G| for every t in the chunk."""
        P = len(panels)
        half = 0.5 * (panels.hi - panels.lo)
        off = (0.5 * (panels.hi + panels.lo))[:, None] + half[:, None] * GK_NODES[None, :]
        w, f = _evaluate_at(seg, panels.side[:, None], off)
        fk = (f * GK_WEIGHTS * half[:, None]).ravel()
        fd = (f * (GK_WEIGHTS - G_WEIGHTS) * half[:, None]).ravel()
        wflat = w.ravel()
        kron = np.zeros(t.size, dtype=complex)
        perr = np.zeros((t.size, P))
        step = max(1, MAX_BLOCK // wflat.size)
        for s in range(0, t.size, step):
            E = np.exp(-1j * np.outer(t[s:s + step], wflat))
            kron[s:s + step] = E @ fk
            perr[s:s + step] = np.abs((E * fd).reshape(-1, P, 15).sum(axis=2))
        return kron, perr

    def _end_sums(self, seg, rules, t):
        total = np.zeros(t.size, dtype=complex)
        err = np.zeros(t.size)
        for rule, alpha in rules:
            vals = []
            for off, wts in ((rule.off_hi, rule.w_hi), (rule.off_lo, rule.w_lo)):
                w, f = _evaluate_at(seg, np.full(off.shape, rule.side), off)
                g = f / off ** alpha
                vals.append(np.exp(-1j * np.outer(t, w)) @ (g * wts))
            total += vals[0]
            err += np.abs(vals[0] - vals[1])
        return total, err

    def _integrate_chunk(self, t, width_cap):
        total = np.zeros(t.size, dtype=complex)
        err = np.zeros(t.size)
        for k, seg in enumerate(self.segments):
            panels = self._panels(k, width_cap)
            budget = self.abs_tol / (2 * len(self.segments))
            for _ in range(ADAPT_ROUNDS):
                kron, perr = self._panel_sums(seg, panels, t)
                pe = perr.sum(axis=1)
                if np.max(pe) <= budget:
                    break
                worst = perr.max(axis=0)
                mask = worst > budget / len(panels)
                if not np.any(mask):
                    mask = worst >= np.max(worst)
                panels = panels.bisect(mask)
                self._cache[(k, width_cap)] = panels
            tot_e, err_e = self._end_sums(seg, self._ends[k], t)
            total += kron + tot_e
            err += pe + err_e
        return total, err

    def evaluate(self, t) -> "OracleResult":
        """Values and error estimates at an array of times ``t >= 0``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise ValueError("the oracle is evaluated for t >= 0 only")
        vals = np.empty(t.size, dtype=complex)
        errs = np.empty(t.size)
        # bucket times by oscillation width cap (powers of two)
        cap = np.pi / (4 * t + 1)
        bucket = np.floor(np.log2(cap))
        for bkt in np.unique(bucket):
            idx = np.nonzero(bucket == bkt)[0]
            width_cap = float(2.0 ** bkt)
            for s in range(0, idx.size, 4096):
                sel = idx[s:s + 4096]
                v, e = self._integrate_chunk(t[sel], width_cap)
                vals[sel], errs[sel] = v, e
        flagged = bool(np.any(errs > self.abs_tol))
        if flagged:
            warnings.warn(f"oracle error estimate {errs.max():.3g} exceeds abs_tol {self.abs_tol:.3g}",
                          OracleToleranceWarning, stacklevel=2)
        return OracleResult(vals, errs, flagged)

    def __call__(self, t):
        if np.ndim(t) == 0:
            return bcf_reference(self, float(t))
        return self.evaluate(t).values


@dataclass(frozen=True)
class OracleResult:
    values: np.ndarray
    error: np.ndarray
    flagged: bool


def bcf_reference(oracle: BcfOracle, t: float) -> complex:
    """Reference value of the BCF at one time ``t >= 0``."""
    if t < 0:
        raise ValueError("the oracle is evaluated for t >= 0 only")
    return complex(oracle.evaluate([t]).values[0])


# ------------------------------------------------------------ closed forms

def _unit_weighting(model: SpectralModel) -> bool:
    if not model.zero_temperature:
        return False
    if model.statistics == "boson":
        return True
    a, b = model.base.support
    return model.mu >= b if model.branch == "lesser" else model.mu <= a


def _step_form(a, b):
    def f(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (np.exp(-1j * a * t) - np.exp(-1j * b * t)) / (1j * t)
        return np.where(t == 0, b - a, v)
    return f


def closed_form(model: SpectralModel) -> Optional[Callable]:
    """Closed-form BCF for the zero-temperature cases where one is known.

    Covered: ohmic at zero temperature, ``Gamma(g+1) / (1 + i wc t)^(g+1)``;
    step, semicircle and inverse-square-root edge densities whenever the
    statistics weighting is identically one on the support (or cuts a step
    sharply at mu).  Returns None otherwise.
    """
    base = model.base
    name, p = base.name, base.params
    if not model.zero_temperature:
        return None
    if name == "ohmic":
        g, wc = p
        pref = math.gamma(g + 1)

        def ohmic(t):
            return pref / (1 + 1j * wc * np.asarray(t, dtype=float)) ** (g + 1)
        return ohmic
    if name == "step" and model.statistics == "fermion":
        a, b = p
        lo, hi = (a, min(b, model.mu)) if model.branch == "lesser" else (max(a, model.mu), b)
        if lo >= hi:
            return None
        return _step_form(lo, hi)
    if not _unit_weighting(model):
        return None
    if name == "semicircle":
        R, m = p

        def semicircle(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = m * np.pi * R * special.j1(R * t) / t
            return np.where(t == 0, m * np.pi * R ** 2 / 2, v).astype(complex)
        return semicircle
    if name == "inverse_sqrt_edges":
        a, b = p
        mid, half = (a + b) / 2, (b - a) / 2

        def inv_sqrt(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-1j * mid * t) * special.j0(half * t)
        return inv_sqrt
    return None


def reference_for(model: SpectralModel, abs_tol: float = 1e-10) -> Callable:
    """Closed form when available, otherwise a numerical oracle."""
    cf = closed_form(model)
    return cf if cf is not None else BcfOracle(model, abs_tol)


# -------------------------------------------------------------- tail mass

@dataclass(frozen=True)
class TailEstimate:
    value: float
    extrapolated: bool


def tail_l1(model: SpectralModel, T: float, abs_tol: float = 1e-10) -> TailEstimate:
    """Estimate ``int_T^inf |Delta(t)| dt``.

    Exact (by quadrature of the closed-form modulus) for the zero-temperature
    ohmic family.  Otherwise ``|Delta|`` is integrated on ``[T, 10T]`` and the
    rest is extrapolated with the envelope ``(1 + t)^-(1 + alpha)``; for
    ``alpha <= 0`` that envelope is not integrable and the result is inf.
    Extrapolated results are flagged.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    base = model.base
    if base.name == "ohmic" and model.zero_temperature:
        g, wc = base.params
        pref = math.gamma(g + 1)
        val, _ = integrate.quad(lambda t: pref * (1 + (wc * t) ** 2) ** (-(g + 1) / 2),
                                T, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
        return TailEstimate(val, False)
    ref = reference_for(model, abs_tol)
    segs = ref.segments if isinstance(ref, BcfOracle) else effective_segments(model)
    alpha = min(s.alpha for s in segs)
    wmax = max(max(abs(s.a), abs(s.b)) for s in segs)
    dt = min(T / 200, 2 * np.pi / (20 * max(wmax, 1e-12)))
    t = np.arange(T, 10 * T + dt / 2, dt)
    vals = np.abs(np.asarray(ref(t)))
    near = float(integrate.trapezoid(vals, t))
    if alpha <= 0:
        return TailEstimate(math.inf, True)
    sel = t >= 5 * T
    env = (1 + t[sel]) ** -(1 + alpha)
    amp = float(integrate.trapezoid(vals[sel], t[sel]) / integrate.trapezoid(env, t[sel]))
    far = amp * (1 + 10 * T) ** -alpha / alpha
    return TailEstimate(near + far, True)
