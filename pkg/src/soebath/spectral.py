"""
Spectral densities, quantum-statistics weighting and analytic segments.

A :class:`BaseDensity` is a list of analytic pieces of a bare spectral
density J(w).  A :class:`SpectralModel` attaches statistics (boson or
fermion), an inverse temperature and a chemical potential.  The function
:func:`effective_segments` turns a model into the list of finite
:class:`AnalyticSegment` objects on which the contour quadrature operates.

Every evaluator in this module has the signature ``f(w, dl, dr)`` where
``dl = w - a`` and ``dr = b - w`` are the distances to the two ends of the
interval the evaluator lives on.  Callers that know these distances more
accurately than ``w`` itself (nodes exponentially close to an endpoint)
pass them in; otherwise they may be ``None``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

Evaluator = Callable[..., np.ndarray]

STATISTICS = ("boson", "fermion")
BRANCHES = ("lesser", "greater", "total")
PRESETS = ("ohmic", "semicircle", "inverse_sqrt_edges", "log_model", "step",
           "fractional")

# relative distance (in units of the Matsubara margin) below which a
# statistics-factor pole is treated as hit
POLE_GUARD = 1e-3


class PoleProximityError(ValueError):
    """An evaluation point came too close to a statistics-factor pole."""


def _distances(w, dl, dr, a, b):
    w = np.asarray(w, dtype=complex)
    if dl is None:
        dl = w - a
    if dr is None:
        dr = b - w
    return w, np.asarray(dl, dtype=complex), np.asarray(dr, dtype=complex)


@dataclass(frozen=True)
class Piece:
    """One analytic piece of a bare density on ``[a, b]`` (``b`` may be inf)."""
    a: float
    b: float
    func: Evaluator
    order_a: float
    order_b: float
    log_a: bool = False
    log_b: bool = False

    def __call__(self, w, dl=None, dr=None):
        w, dl, dr = _distances(w, dl, dr, self.a, self.b)
        return self.func(w, dl, dr)


@dataclass(frozen=True)
class Tail:
    """Exponential tail ``|J(w)| <= C w**gamma exp(-w / omega_c)``."""
    omega_c: float
    gamma: float


@dataclass(frozen=True)
class BaseDensity:
    """Bare spectral density made of disjoint analytic pieces.

    Attributes
    ----------
    pieces : tuple of Piece
        Sorted, disjoint pieces; together they form the support.
    omega_c : float
        Characteristic frequency of the density.
    tail : Tail or None
        Present when the last piece extends to +inf with exponential decay.
    name, params :
        Preset family and its parameters (used for closed forms and JSON).
    """
    pieces: tuple
    omega_c: float
    tail: Optional[Tail] = None
    name: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("a density needs at least one piece")
        for p in self.pieces:
            if not p.a < p.b:
                raise ValueError(f"piece [{p.a}, {p.b}] is empty")
        for p, q in zip(self.pieces, self.pieces[1:]):
            if q.a < p.b:
                raise ValueError("pieces overlap or are unsorted")
        if self.tail is not None and math.isfinite(self.pieces[-1].b):
            raise ValueError("a tail requires the last piece to reach +inf")
        self._check_nonnegative()

    @property
    def support(self) -> tuple:
        return self.pieces[0].a, self.pieces[-1].b

    def _check_nonnegative(self):
        for p in self.pieces:
            lo = p.a if math.isfinite(p.a) else p.b - 50.0 * self.omega_c
            hi = p.b if math.isfinite(p.b) else p.a + 50.0 * self.omega_c
            w = np.linspace(lo, hi, 203)[1:-1]
            vals = p(w)
            if np.any(~np.isfinite(vals)) or np.any(vals.real < -1e-12 * (1 + np.abs(vals))):
                raise ValueError(f"density '{self.name}' is negative or non-finite on its support")

    def __call__(self, w):
        """Evaluate J on real frequencies; zero outside the support."""
        w = np.asarray(w, dtype=float)
        out = np.zeros(w.shape)
        for p in self.pieces:
            mask = (w > p.a) & (w < p.b)
            if np.any(mask):
                out[mask] = p(w[mask]).real
        return out


# ---------------------------------------------------------------- presets

def _ohmic(gamma, omega_c):
    if gamma <= 0:
        raise ValueError("ohmic exponent gamma must be positive")
    if omega_c <= 0:
        raise ValueError("omega_c must be positive")
    pref = omega_c ** (-(gamma + 1.0))

    def f(w, dl, dr):
        # dl = w - 0 is exact near the origin
        return pref * dl ** gamma * np.exp(-w / omega_c)

    piece = Piece(0.0, math.inf, f, order_a=gamma, order_b=math.inf)
    return BaseDensity((piece,), omega_c, Tail(omega_c, gamma), "ohmic", (gamma, omega_c))


def _semicircle(omega_d, m):
    if omega_d <= 0 or m <= 0:
        raise ValueError("semicircle needs omega_D > 0 and m > 0")

    def f(w, dl, dr):
        return m * np.sqrt(dl) * np.sqrt(dr)

    piece = Piece(-omega_d, omega_d, f, 0.5, 0.5)
    return BaseDensity((piece,), omega_d, None, "semicircle", (omega_d, m))


def _inverse_sqrt_edges(a, b):
    if a >= b:
        raise ValueError("need a < b")

    def f(w, dl, dr):
        return 1.0 / (np.pi * np.sqrt(dl) * np.sqrt(dr))

    piece = Piece(a, b, f, -0.5, -0.5)
    return BaseDensity((piece,), (b - a) / 2, None, "inverse_sqrt_edges", (a, b))


def _log_model(a, b):
    # -log(|w - mid| / half): log divergence at the midpoint, vanishing
    # linearly at the outer edges so the density stays non-negative.
    if a >= b:
        raise ValueError("need a < b")
    mid, half = (a + b) / 2, (b - a) / 2

    def near_log(d_edge, d_mid):
        # -log(d_mid / half) with d_mid = half - d_edge; log1p keeps it exact
        # near the outer edge, the direct form near the midpoint
        edge = np.abs(d_edge) < np.abs(d_mid)
        e = np.where(edge, d_edge, 0.0)
        m = np.where(edge, half, d_mid)
        return np.where(edge, -np.log1p(-e / half), -np.log(m / half))

    def left(w, dl, dr):
        return near_log(dl, dr)

    def right(w, dl, dr):
        return near_log(dr, dl)

    pieces = (Piece(a, mid, left, 1.0, 0.0, log_b=True),
              Piece(mid, b, right, 0.0, 1.0, log_a=True))
    return BaseDensity(pieces, half, None, "log_model", (a, b))


def _step(a, b):
    if a >= b:
        raise ValueError("need a < b")

    def f(w, dl, dr):
        return np.ones(np.shape(w), dtype=complex)

    piece = Piece(a, b, f, 0.0, 0.0, log_a=True, log_b=True)
    return BaseDensity((piece,), (b - a) / 2, None, "step", (a, b))


def _fractional(gamma_nu, nu):
    if not 0 < nu < 1:
        raise ValueError("fractional exponent nu must lie in (0, 1)")
    if gamma_nu <= 0:
        raise ValueError("gamma_nu must be positive")
    amp = 2.0 * gamma_nu * math.sin(math.pi * nu / 2)

    def left(w, dl, dr):
        return amp * dr ** (nu - 1.0)

    def right(w, dl, dr):
        return amp * dl ** (nu - 1.0)

    pieces = (Piece(-math.inf, 0.0, left, math.inf, nu - 1.0),
              Piece(0.0, math.inf, right, nu - 1.0, math.inf))
    return BaseDensity(pieces, 1.0, None, "fractional", (gamma_nu, nu))


_FACTORIES = {
    "ohmic": _ohmic,
    "semicircle": _semicircle,
    "inverse_sqrt_edges": _inverse_sqrt_edges,
    "log_model": _log_model,
    "step": _step,
    "fractional": _fractional,
}


def make_preset(name: str, params: Sequence[float]) -> BaseDensity:
    """Build one of the preset densities.

    ``ohmic(gamma, omega_c)``, ``semicircle(omega_D, m)``,
    ``inverse_sqrt_edges(a, b)``, ``log_model(a, b)``, ``step(a, b)`` and
    ``fractional(gamma_nu, nu)``.
    """
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown preset '{name}'") from None
    params = tuple(float(p) for p in params)
    try:
        return factory(*params)
    except TypeError:
        raise ValueError(f"wrong number of parameters for '{name}'") from None


# ------------------------------------------------------------------ model

@dataclass(frozen=True)
class SpectralModel:
    base: BaseDensity
    statistics: str
    beta: float = math.inf
    mu: float = 0.0
    branch: str = "total"

    def __post_init__(self):
        if self.statistics not in STATISTICS:
            raise ValueError(f"statistics must be one of {STATISTICS}")
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.statistics == "boson":
            if self.branch != "total":
                raise ValueError("bosonic models use the total branch")
            if self.mu != 0:
                raise ValueError("bosonic models require mu = 0")
            if self.base.support[0] < 0:
                raise ValueError("bosonic densities must be supported on [0, inf)")
        elif self.branch == "total":
            raise ValueError("fermionic models need the lesser or greater branch")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def to_json(self) -> dict:
        return {
            "density": {"preset": self.base.name, "params": list(self.base.params)},
            "statistics": self.statistics,
            "beta": "inf" if self.zero_temperature else self.beta,
            "mu": self.mu,
            "branch": self.branch,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SpectralModel":
        dens = doc["density"]
        base = make_preset(dens["preset"], dens.get("params", []))
        beta = doc.get("beta", "inf")
        beta = math.inf if beta in ("inf", "Infinity", None) else float(beta)
        stats = doc["statistics"]
        branch = doc.get("branch", "total" if stats == "boson" else "lesser")
        return cls(base, stats, beta, float(doc.get("mu", 0.0)), branch)


# --------------------------------------------------------------- segments

@dataclass(frozen=True)
class AnalyticSegment:
    """Finite analytic piece of an effective spectral density.

    ``theta0_limit`` is the smallest opening parameter theta0 for which the
    evaluator is analytic on the semi-ellipse below the interval.
    """
    a: float
    b: float
    evaluator: Evaluator
    alpha_a: float
    alpha_b: float
    log_a: bool = False
    log_b: bool = False
    theta0_limit: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError("segments must be finite and non-empty")
        if self.alpha_a <= -1 or self.alpha_b <= -1:
            raise ValueError("singularity orders must exceed -1")

    @property
    def alpha(self) -> float:
        return min(self.alpha_a, self.alpha_b)

    @property
    def log_class(self) -> bool:
        """True when the dominant endpoint is a jump or logarithm."""
        return self.alpha == 0

    @property
    def half_width(self) -> float:
        return (self.b - self.a) / 2

    @property
    def midpoint(self) -> float:
        return (self.a + self.b) / 2

    def __call__(self, w, dl=None, dr=None):
        w, dl, dr = _distances(w, dl, dr, self.a, self.b)
        return self.evaluator(w, dl, dr)

    def probe(self, theta0: float) -> None:
        """Check the evaluator on a grid inside the semi-ellipse Omega(theta0)."""
        if theta0 < self.theta0_limit:
            raise ValueError(f"segment {self.label} is only analytic for theta0 >= {self.theta0_limit}")
        x = np.linspace(-8.0, 8.0, 33)
        y = np.linspace(0.0, np.pi / 4 - theta0, 6)[1:]
        z = (x[:, None] - 1j * y[None, :]).ravel()
        t = np.tanh(z)
        W = self.half_width
        vals = self(self.midpoint + W * t, W * (1 + t), W * (1 - t))
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"segment {self.label} evaluator is not finite inside Omega({theta0:.4g})")


def matsubara_margin(beta: float, mu: float, theta0: float) -> float:
    """Lower bound (pi / beta) sin(2 theta0) on the distance from Omega(theta0)
    to the nearest Matsubara pole; 0 at zero temperature."""
    if not 0 < theta0 < np.pi / 4:
        raise ValueError("theta0 must lie in (0, pi/4)")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if math.isinf(beta):
        return 0.0
    return math.pi / beta * math.sin(2 * theta0)


def fermi(x, beta):
    """Fermi-Dirac factor 1 / (exp(beta x) + 1) for complex x, overflow-safe."""
    x = np.asarray(x, dtype=complex)
    e = np.exp(-beta * np.abs(x.real) - 1j * beta * x.imag * np.sign(x.real + (x.real == 0)))
    pos = x.real >= 0
    return np.where(pos, e / (1 + e), 1 / (1 + e))


def _fermi_guard(x, beta, theta0):
    # Matsubara poles of the factor sit at i pi (2n + 1) / beta
    margin = matsubara_margin(beta, 0.0, theta0)
    n = np.round((beta * x.imag / np.pi - 1) / 2)
    d = np.abs(x - 1j * np.pi * (2 * n + 1) / beta)
    if np.any(d < POLE_GUARD * margin):
        raise PoleProximityError("evaluation point within the pole guard of a Matsubara pole")


def _bose_guard(w, beta, theta0):
    # poles of 1 / (1 - exp(-beta w)) at 2 pi i n / beta; n = 0 is the endpoint
    margin = matsubara_margin(beta, 0.0, theta0)
    n = np.round(beta * w.imag / (2 * np.pi))
    n = np.where(n == 0, np.sign(w.imag) + (w.imag == 0), n)
    d = np.abs(w - 2j * np.pi * n / beta)
    if np.any(d < POLE_GUARD * margin):
        raise PoleProximityError("evaluation point within the pole guard of a Bose pole")


def _chi_factor(omega_c, W):
    norm = -math.expm1(-W / omega_c)

    def chi(dr):
        # (1 - exp(-(W - w)/omega_c)) / (1 - exp(-W/omega_c)), with dr = W - w
        return -np.expm1(-dr / omega_c) / norm
    return chi


def _tail_cutoff(model: SpectralModel, T: Optional[float], eps_tail: float) -> float:
    """Pick W so that the estimated L1 truncation error is below eps_tail."""
    base = model.base
    wc = base.omega_c
    W0 = 10.0 * wc
    last = base.pieces[-1]

    def jeff(w):
        v = last(np.asarray(w, dtype=float)).real
        if model.statistics == "boson" and not model.zero_temperature:
            v = v / -np.expm1(-model.beta * np.asarray(w))
        return v

    # truncation mass at W0: J (1 - chi_W0) on [a, W0] plus the tail beyond W0
    chi0 = _chi_factor(wc, W0)
    inner = integrate.quad(lambda w: jeff(w) * (1 - chi0(W0 - w).real),
                           max(last.a, 0.0), W0, limit=200)[0]
    outer = integrate.quad(jeff, W0, np.inf, limit=200)[0]
    # calibrate C in |err| <= C exp(-W / 2 omega_c) at W0, with 10x safety
    C = 10.0 * (inner + outer) * math.exp(W0 / (2 * wc))
    if (model.statistics == "boson" and not model.zero_temperature
            and base.tail.gamma <= 1 and T is not None):
        C *= 1.0 + math.log1p(T) / model.beta
    W = 2 * wc * math.log(max(10.0 * C / eps_tail, 1.0))
    return max(W, W0)


def _truncate(pieces, model, T, eps_tail, cutoff=None):
    tail = model.base.tail
    last = pieces[-1]
    if math.isfinite(last.b):
        return list(pieces), None
    if tail is None:
        raise ValueError("unbounded support without an exponential tail cannot be truncated")
    W = _tail_cutoff(model, T, eps_tail) if cutoff is None else float(cutoff)
    if not W > last.a:
        raise ValueError("cutoff must lie above the start of the tail piece")
    chi = _chi_factor(tail.omega_c, W)
    inner = last.func

    def f(w, dl, dr):
        return inner(w, dl, dr) * chi(dr)

    cut = Piece(last.a, W, f, last.order_a, 1.0, last.log_a, False)
    return list(pieces[:-1]) + [cut], W


def _split(pieces, at):
    out = []
    for p in pieces:
        if p.a < at < p.b:
            # children see distances to their own ends; map back to the parent's
            gap_r, gap_l = p.b - at, at - p.a

            def left(w, dl, dr, f=p.func, g=gap_r):
                return f(w, dl, dr + g)

            def right(w, dl, dr, f=p.func, g=gap_l):
                return f(w, dl + g, dr)

            out.append(Piece(p.a, at, left, p.order_a, 0.0, p.log_a, True))
            out.append(Piece(at, p.b, right, 0.0, p.order_b, True, p.log_b))
        else:
            out.append(p)
    return out


def _fermion_segments(model, pieces, theta0):
    beta, mu = model.beta, model.mu
    lesser = model.branch == "lesser"
    segs = []
    for p in _split(pieces, mu):
        if model.zero_temperature:
            # sharp occupation: keep only the occupied (lesser) or empty side
            below = p.b <= mu
            if below != lesser:
                continue
            segs.append(AnalyticSegment(p.a, p.b, p.func, p.order_a, p.order_b,
                                        p.log_a, p.log_b, label=f"[{p.a:.4g},{p.b:.4g}]"))
            continue
        sign = 1.0 if lesser else -1.0

        def ev(w, dl, dr, p=p, sign=sign):
            # x = w - mu, computed from the distance to mu when mu is an end
            if p.a == mu:
                x = dl
            elif p.b == mu:
                x = -dr
            else:
                x = w - mu
            _fermi_guard(x, beta, theta0)
            return p.func(w, dl, dr) * fermi(sign * x, beta)

        segs.append(AnalyticSegment(p.a, p.b, ev, p.order_a, p.order_b,
                                    p.log_a, p.log_b, label=f"[{p.a:.4g},{p.b:.4g}]"))
    return segs


def _boson_segments(model, pieces, theta0):
    beta = model.beta
    segs = []
    for p in pieces:
        oa, la = p.order_a, p.log_a
        if p.a == 0 and not model.zero_temperature:
            # the Bose factor lowers the order at the origin by one
            oa = p.order_a - 1.0
            if oa <= -1:
                raise ValueError("J_eff is not integrable at w = 0 for this density at finite beta")
            la = oa == 0
        if model.zero_temperature:
            segs.append(AnalyticSegment(p.a, p.b, p.func, oa, p.order_b, la, p.log_b,
                                        label=f"[{p.a:.4g},{p.b:.4g}]"))
            continue

        def pos(w, dl, dr, p=p):
            _bose_guard(w, beta, theta0)
            return p.func(w, dl, dr) / -np.expm1(-beta * w)

        def neg(w, dl, dr, p=p):
            # analytic continuation -J(-w) / (1 - exp(-beta w)) on w < 0
            _bose_guard(w, beta, theta0)
            return p.func(-w, dr, dl) * np.exp(beta * w) / -np.expm1(beta * w)

        segs.append(AnalyticSegment(-p.b, 0.0 - p.a, neg, p.order_b, oa, p.log_b, la,
                                    label=f"[{-p.b:.4g},{-p.a:.4g}]"))
        segs.append(AnalyticSegment(p.a, p.b, pos, oa, p.order_b, la, p.log_b,
                                    label=f"[{p.a:.4g},{p.b:.4g}]"))
    segs.sort(key=lambda s: s.a)
    return segs


def effective_segments(model: SpectralModel, theta0: float = np.pi / 12,
                       eps_tail: float = 1e-10, T: Optional[float] = None,
                       cutoff: Optional[float] = None) -> list:
    """Analytic segments of the effective spectral density of ``model``.

    Unbounded exponential tails are cut at a frequency W chosen from
    ``eps_tail`` (and ``T`` for finite-temperature sub-Ohmic/Ohmic baths),
    or at ``cutoff`` when it is given.
    """
    if not 0 < theta0 < np.pi / 4:
        raise ValueError("theta0 must lie in (0, pi/4)")
    if not eps_tail > 0:
        raise ValueError("eps_tail must be positive")
    pieces, _ = _truncate(model.base.pieces, model, T, eps_tail, cutoff)
    if not math.isfinite(pieces[0].a):
        raise ValueError("unbounded support without an exponential tail cannot be truncated")
    if model.statistics == "fermion":
        segs = _fermion_segments(model, pieces, theta0)
    else:
        segs = _boson_segments(model, pieces, theta0)
    for s in segs:
        s.probe(theta0)
    return segs


def effective_density(model: SpectralModel, w) -> np.ndarray:
    """Directly weighted J_eff on real frequencies (no segmentation, no cutoff)."""
    w = np.asarray(w, dtype=float)
    J = model.base
    if model.statistics == "fermion":
        x = w - model.mu
        if model.zero_temperature:
            occ = (x < 0).astype(float) if model.branch == "lesser" else (x > 0).astype(float)
        else:
            s = 1.0 if model.branch == "lesser" else -1.0
            occ = fermi(s * x, model.beta).real
        return J(w) * occ
    a = np.abs(w)
    if model.zero_temperature:
        return np.where(w > 0, J(a), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sign(w) * J(a) / -np.expm1(-model.beta * w)
    return np.where(w == 0, 0.0, out)
