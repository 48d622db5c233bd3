"""
SOE construction by trapezoidal quadrature on a deformed contour.

Each analytic segment ``[wa, wb]`` is mapped to ``[-1, 1]`` and then to the
real line by ``w = tanh z``.  The Fourier integral is shifted down to the
line ``Im z = -y2`` where the integrand decays in ``t``, and a uniform
trapezoid rule with step ``h`` truncated at ``|Re z| <= M`` gives one SOE
term per node.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .soe import (SoeRepresentation, affine_rescale, eval_grid, measure,
                  normalize_norm, time_grid)
from .spectral import AnalyticSegment, SpectralModel, effective_segments

THETA_DEFAULT = np.pi / 12
H_MAX = 0.5
M_MAX = 300.0
REFINE_ROUNDS = 8
REFINE_H = 1.5
REFINE_M = 1.25
TAIL_SHARE = 0.25
ERROR_DT = 0.01


class RefinementError(RuntimeError):
    """Refinement stopped before the target error; ``best`` holds the best SOE."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class QuadratureParams:
    """Contour and trapezoid parameters in nondimensional units.

    ``y2`` (contour depth) and ``a`` (strip half-width) are derived from the
    two angles; ``c = 2 pi a`` is the exponential rate in ``1/h``.
    ``horizon`` is the nondimensional time the parameters were chosen for.
    """
    theta0: float
    theta1: float
    h: float
    M: float
    kappa: float = 1.0
    horizon: float = math.inf

    def __post_init__(self):
        if not (self.theta0 > 0 and 0 < self.theta1 < np.pi / 4 - self.theta0):
            raise ValueError("need theta0 > 0 and 0 < theta1 < pi/4 - theta0")
        if not 0 < self.h < 1:
            raise ValueError("h must lie in (0, 1)")
        if not self.M >= 1:
            raise ValueError("M must be at least 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def y2(self) -> float:
        return (self.theta1 + np.pi / 4 - self.theta0) / 2

    @property
    def a(self) -> float:
        return (np.pi / 4 - self.theta0 - self.theta1) / 2

    @property
    def c(self) -> float:
        return 2 * np.pi * self.a

    @property
    def n_nodes(self) -> int:
        return 2 * int(math.floor(self.M / self.h + 1e-12)) + 1

    def nodes(self) -> np.ndarray:
        n = int(math.floor(self.M / self.h + 1e-12))
        return np.arange(-n, n + 1) * self.h - 1j * self.y2

    def refined(self, rounds: int = 1) -> "QuadratureParams":
        h = self.h / REFINE_H ** rounds
        M = min(self.M * REFINE_M ** rounds, M_MAX)
        return replace(self, h=h, M=M)


def _check_angles(theta0, theta1):
    if not (theta0 > 0 and theta1 > 0 and theta0 + theta1 < np.pi / 4):
        raise ValueError("need theta0, theta1 > 0 and theta0 + theta1 < pi/4")


def select_params(alpha: float, log_flag: bool, eps: float, T: float,
                  theta0: float = THETA_DEFAULT, theta1: float = THETA_DEFAULT,
                  kappa: float = 1.0, norm: str = "L1") -> QuadratureParams:
    """Choose ``h`` and ``M`` for a segment of singularity order ``alpha``.

    ``eps`` and ``T`` are nondimensional.  For the L1 norm the truncation
    ``M`` grows like ``log T`` for jumps/logs and negative orders and is
    T-independent for positive orders; for the L-infinity norm both
    parameters are T-independent.  ``h`` is clamped to ``(0, 0.5]`` and
    ``M`` to ``[1, 300]``.
    """
    if not alpha > -1:
        raise ValueError("singularity order must exceed -1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not T > 0:
        raise ValueError("T must be positive")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    _check_angles(theta0, theta1)
    c = 2 * np.pi * (np.pi / 4 - theta0 - theta1) / 2
    K = kappa
    log_class = log_flag or alpha == 0
    if normalize_norm(norm) == "Linf":
        M = math.log(2 * K / eps) if log_class else math.log(2 * K / eps) / (alpha + 1)
        inv_h = math.log(2 * K / eps) / c
    elif log_class:
        M = math.log(2 * K * T / eps)
        inv_h = math.log(2 * K * math.log(2 + T) ** 2 / eps) / c
    elif alpha > 0:
        M = math.log(2 * (alpha + 1) * K / (alpha * eps)) / alpha
        inv_h = math.log(2 * K / (alpha * eps)) / c
    else:
        M = math.log(2 * K * T / eps) / (alpha + 1)
        inv_h = math.log(2 * K * (1 + T) ** abs(alpha) / (abs(alpha) * eps)) / c
    h = H_MAX if inv_h <= 1 / H_MAX else 1 / inv_h
    M = min(max(M, 1.0), M_MAX)
    return QuadratureParams(theta0, theta1, h, M, kappa, T)


def _tanh_parts(z):
    """tanh z together with 1 - tanh z and 1 + tanh z, accurate for large |Re z|."""
    pos = z.real >= 0
    e2 = np.exp(np.where(pos, -2 * z, 2 * z))
    inv = 1 / (1 + e2)
    small = 2 * e2 * inv
    large = 2 * inv
    one_minus = np.where(pos, small, large)
    one_plus = np.where(pos, large, small)
    t = np.where(pos, (1 - e2) * inv, (e2 - 1) * inv)
    return t, one_minus, one_plus


def build_segment_soe(segment: AnalyticSegment, params: QuadratureParams) -> SoeRepresentation:
    """Trapezoid SOE of one segment.

    Nodes ``z_n = n h - i y2``; weights ``h Wh J_eff(tanh z_n) / cosh^2 z_n``
    and poles ``Wh tanh z_n + wm`` with ``Wh`` the half width and ``wm`` the
    midpoint.  The returned horizon is ``params.horizon / Wh``.
    """
    if params.theta0 < segment.theta0_limit:
        raise ValueError("segment evaluator is not analytic for this theta0")
    W, mid = segment.half_width, segment.midpoint
    z = params.nodes()
    t, one_minus, one_plus = _tanh_parts(z)
    dl, dr = W * one_plus, W * one_minus
    # near an endpoint the pole is formed from the small distance so that its
    # tiny imaginary part survives the addition
    w = np.where(z.real >= 0, segment.b - dr, segment.a + dl)
    try:
        vals = np.asarray(segment(w, dl, dr), dtype=complex)
    except (ArithmeticError, ValueError) as exc:
        raise ValueError(f"segment evaluator failed at a quadrature node: {exc}") from exc
    weights = params.h * W * vals * one_minus * one_plus
    if not np.all(np.isfinite(weights)):
        raise ValueError("non-finite quadrature weight")
    meta = {"provenance": "quadrature", "segment": [segment.a, segment.b],
            "h": params.h, "M": params.M, "alpha": segment.alpha}
    return SoeRepresentation(weights, w, params.horizon / W, meta)


def _concat(parts: Sequence[SoeRepresentation], horizon: float, meta: dict) -> SoeRepresentation:
    c = np.concatenate([p.c for p in parts])
    z = np.concatenate([p.z for p in parts])
    return SoeRepresentation(c, z, horizon, meta)


@dataclass
class _Plan:
    segments: list
    params: list


def _plan(segments, eps, T, norm, theta0, theta1, kappa) -> _Plan:
    norm = normalize_norm(norm)
    eps_seg = eps / len(segments)
    params = []
    for s in segments:
        W = s.half_width
        e = W * eps_seg if norm == "L1" else eps_seg
        params.append(select_params(s.alpha, s.log_class, e, W * T,
                                    theta0, theta1, kappa, norm))
    return _Plan(list(segments), params)


def _assemble(plan: _Plan, rounds: int, T: float, meta: dict) -> SoeRepresentation:
    parts = [build_segment_soe(s, p.refined(rounds) if rounds else p)
             for s, p in zip(plan.segments, plan.params)]
    return _concat(parts, T, dict(meta, rounds=rounds))


def build_from_segments(segments, eps: float, T: float, norm: str = "L1",
                        theta0: float = THETA_DEFAULT, theta1: float = THETA_DEFAULT,
                        kappa: float = 1.0, refine: bool = True,
                        reference=None, dt: float = ERROR_DT,
                        meta: Optional[dict] = None,
                        target: Optional[float] = None) -> SoeRepresentation:
    """Build and optionally refine an SOE from a list of analytic segments.

    ``eps`` is split equally across segments.  With ``refine`` the error is
    measured against ``reference`` on the grid ``k dt`` and the quadrature
    is made finer (1/h x 1.5, M x 1.25) for at most 8 rounds, until the
    measured error is below ``target`` (default ``eps``).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not T > 0:
        raise ValueError("T must be positive")
    if not segments:
        raise ValueError("no segments to build from")
    norm = normalize_norm(norm)
    target = eps if target is None else target
    plan = _plan(segments, eps, T, norm, theta0, theta1, kappa)
    meta = dict(meta or {}, provenance="quadrature", norm=norm, eps=eps)
    soe = _assemble(plan, 0, T, meta)
    if reference is None:
        if refine:
            raise ValueError("refinement requires a reference")
        return soe
    grid = time_grid(T, dt)
    ref = np.asarray(reference(grid), dtype=complex) if callable(reference) else reference
    err = measure(soe, ref, T, dt, norm)
    best = soe.with_error(norm, err)
    if not refine:
        return best
    rounds = 0
    while err > target and rounds < REFINE_ROUNDS:
        rounds += 1
        soe = _assemble(plan, rounds, T, meta)
        err = measure(soe, ref, T, dt, norm)
        if err < best.achieved_error[1]:
            best = soe.with_error(norm, err)
    if err > target:
        raise RefinementError(f"refinement reached {best.achieved_error[1]:.3g} > eps = {target:.3g} "
                              f"after {REFINE_ROUNDS} rounds", best)
    return soe.with_error(norm, err)


def build_bcf_soe(model: SpectralModel, eps: float, T: float, norm: str = "L1",
                  theta0: float = THETA_DEFAULT, theta1: float = THETA_DEFAULT,
                  kappa: float = 1.0, refine: bool = True, reference=None,
                  dt: float = ERROR_DT) -> SoeRepresentation:
    """SOE of the BCF of ``model`` on ``[0, T]`` with target error ``eps``.

    A quarter of the budget goes to truncating an infinite tail (if any),
    the rest is split equally across segments.  When ``reference`` is None
    and refinement or error reporting is needed, the closed form (if any)
    or a :class:`~soebath.oracle.BcfOracle` is used.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not T > 0:
        raise ValueError("T must be positive")
    norm = normalize_norm(norm)
    has_tail = model.base.tail is not None
    eps_tail = TAIL_SHARE * eps if has_tail else eps
    segs = effective_segments(model, theta0, eps_tail=eps_tail, T=T)
    eps_quad = eps - eps_tail if has_tail else eps
    if reference is None and refine:
        from .oracle import reference_for
        reference = reference_for(model)
    meta = {"model": model.to_json(), "T": T}
    return build_from_segments(segs, eps_quad, T, norm, theta0, theta1, kappa, refine,
                               reference, dt, meta, target=eps)
