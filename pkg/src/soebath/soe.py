"""
Sum-of-exponentials objects: evaluation, affine maps, merging and errors.

An SOE is ``sum_j c_j exp(-i z_j t)`` with poles in the closed lower half
plane, valid on a horizon ``[0, T]``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

PROVENANCES = ("quadrature", "esprit", "analytic")
IM_TOL = 1e-12
BLOCK = 1024

Reference = Union[Callable, np.ndarray]


@dataclass(frozen=True)
class SoeRepresentation:
    """Weights ``c`` and poles ``z`` of a sum of exponentials.

    Attributes
    ----------
    c, z : ndarray of complex
        Weights and poles (rad/time).
    horizon : float
        Time T up to which the representation is certified.
    meta : dict
        Provenance (``meta["provenance"]`` in quadrature/esprit/analytic)
        plus free-form build information.
    achieved_error : tuple or None
        ``(norm, value)`` measured when the object was built.
    """
    c: np.ndarray
    z: np.ndarray
    horizon: float = math.inf
    meta: dict = field(default_factory=dict)
    achieved_error: Optional[tuple] = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=complex)).copy()
        z = np.atleast_1d(np.asarray(self.z, dtype=complex)).copy()
        if c.shape != z.shape or c.ndim != 1:
            raise ValueError("weights and poles must be 1-D arrays of equal length")
        if c.size == 0:
            raise ValueError("an SOE needs at least one term")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(z))):
            raise ValueError("weights and poles must be finite")
        prov = self.meta.get("provenance", "analytic")
        if prov not in PROVENANCES:
            raise ValueError(f"unknown provenance '{prov}'")
        if np.any(z.imag > IM_TOL):
            raise ValueError("poles must satisfy Im z <= 0 (no growing modes)")
        if prov == "quadrature" and np.any(z.imag >= 0):
            raise ValueError("quadrature poles must lie strictly below the real axis")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        c.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "meta", {"provenance": prov, **self.meta})

    def __len__(self):
        return self.c.size

    @property
    def N(self) -> int:
        return self.c.size

    @property
    def provenance(self) -> str:
        return self.meta["provenance"]

    def __call__(self, t):
        if np.ndim(t) == 0:
            return evaluate(self, float(t))
        return eval_grid(self, t)

    def with_error(self, norm: str, value: float) -> "SoeRepresentation":
        return replace(self, achieved_error=(norm, float(value)))

    # -------------------------------------------------------------- I/O
    def to_json(self) -> dict:
        meta = dict(self.meta)
        if self.achieved_error is not None:
            meta["achieved_error"] = {"norm": self.achieved_error[0],
                                      "value": self.achieved_error[1]}
        return {
            "terms": [{"c": [float(ci.real), float(ci.imag)], "z": [float(zi.real), float(zi.imag)]}
                      for ci, zi in zip(self.c, self.z)],
            "horizon": self.horizon if math.isfinite(self.horizon) else "inf",
            "meta": meta,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SoeRepresentation":
        terms = doc["terms"]
        c = [complex(*t["c"]) for t in terms]
        z = [complex(*t["z"]) for t in terms]
        meta = dict(doc.get("meta", {}))
        err = meta.pop("achieved_error", None)
        horizon = doc.get("horizon", "inf")
        horizon = math.inf if horizon == "inf" else float(horizon)
        achieved = (err["norm"], float(err["value"])) if err else None
        return cls(np.array(c), np.array(z), horizon, meta, achieved)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "SoeRepresentation":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def evaluate(soe: SoeRepresentation, t: float) -> complex:
    """Value of the SOE at a single time ``t >= 0``.

    Terms are added in descending order of ``|c_j|`` with exact (fsum)
    accumulation of the real and imaginary parts.
    """
    if t < 0:
        raise ValueError("SOEs are evaluated for t >= 0 only")
    order = np.argsort(-np.abs(soe.c), kind="stable")
    terms = soe.c[order] * np.exp(-1j * soe.z[order] * t)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def _is_uniform(t: np.ndarray) -> bool:
    if t.size < 3:
        return False
    d = np.diff(t)
    step = (t[-1] - t[0]) / (t.size - 1)
    return step > 0 and np.max(np.abs(d - step)) <= 1e-9 * step


def eval_grid(soe: SoeRepresentation, t_grid) -> np.ndarray:
    """SOE values on a nondecreasing grid of non-negative times.

    Uniform grids are processed in blocks of 1024 steps: inside a block the
    phase factors are ``exp(-i z (t_b + j dt))`` split as a block base times a
    precomputed table, so the base is re-synchronized at every block start.
    """
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("empty time grid")
    if t[0] < 0:
        raise ValueError("SOEs are evaluated for t >= 0 only")
    if np.any(np.diff(t) < 0):
        raise ValueError("time grid must be nondecreasing")
    c, z = soe.c, soe.z
    out = np.empty(t.size, dtype=complex)
    if _is_uniform(t):
        dt = (t[-1] - t[0]) / (t.size - 1)
        table = np.exp(-1j * np.outer(np.arange(BLOCK) * dt, z))
        for b in range(0, t.size, BLOCK):
            n = min(BLOCK, t.size - b)
            base = c * np.exp(-1j * z * (t[0] + b * dt))
            out[b:b + n] = table[:n] @ base
        return out
    chunk = max(1, 4_000_000 // max(c.size, 1))
    for s in range(0, t.size, chunk):
        tt = t[s:s + chunk]
        out[s:s + chunk] = np.exp(-1j * np.outer(tt, z)) @ c
    return out


def affine_rescale(soe: SoeRepresentation, s: float, d: float) -> SoeRepresentation:
    """Map poles ``z -> s z + d``; the horizon becomes ``T / s``.

    If ``f(t)`` is the original SOE the result is ``exp(-i d t) f(s t)``.
    """
    if not s > 0:
        raise ValueError("scale must be positive")
    return SoeRepresentation(soe.c, s * soe.z + d, soe.horizon / s, dict(soe.meta))


def merge(a: SoeRepresentation, b: SoeRepresentation,
          consolidate: bool = False) -> SoeRepresentation:
    """Concatenate two SOEs; the merged horizon is the smaller one.

    With ``consolidate`` poles closer than 1e-14 are fused and their
    weights added.
    """
    c = np.concatenate([a.c, b.c])
    z = np.concatenate([a.z, b.z])
    if consolidate:
        c, z = _consolidate(c, z)
    pa, pb = a.provenance, b.provenance
    meta = {"provenance": pa if pa == pb else "analytic", "merged": True}
    return SoeRepresentation(c, z, min(a.horizon, b.horizon), meta)


def _consolidate(c, z, tol=1e-14):
    order = np.lexsort((z.imag, z.real))
    c, z = c[order], z[order]
    keep_c, keep_z = [c[0]], [z[0]]
    for ci, zi in zip(c[1:], z[1:]):
        if abs(zi - keep_z[-1]) < tol:
            keep_c[-1] += ci
        else:
            keep_c.append(ci)
            keep_z.append(zi)
    return np.array(keep_c), np.array(keep_z)


def time_grid(T: float, dt: float) -> np.ndarray:
    """Uniform grid ``k dt`` for ``k = 0 .. floor(T/dt)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T < dt:
        raise ValueError("T must be at least dt")
    n = int(math.floor(T / dt * (1 + 1e-12)))
    return np.arange(n + 1) * dt


def reference_values(reference: Reference, t: np.ndarray) -> np.ndarray:
    """Evaluate a reference (vectorized callable, scalar callable or array)."""
    if isinstance(reference, np.ndarray):
        if reference.shape != t.shape:
            raise ValueError("reference samples do not match the time grid")
        return reference.astype(complex)
    try:
        vals = np.asarray(reference(t), dtype=complex)
        if vals.shape == t.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([complex(reference(float(tk))) for tk in t])


def residual(soe: SoeRepresentation, reference: Reference, T: float, dt: float) -> np.ndarray:
    t = time_grid(T, dt)
    return np.abs(reference_values(reference, t) - eval_grid(soe, t))


def l1_error(soe: SoeRepresentation, reference: Reference, T: float, dt: float) -> float:
    """Riemann sum ``sum_k |ref(k dt) - soe(k dt)| dt`` over ``k <= floor(T/dt)``."""
    return float(np.sum(residual(soe, reference, T, dt)) * dt)


def linf_error(soe: SoeRepresentation, reference: Reference, T: float, dt: float) -> float:
    """Maximum deviation on the same grid as :func:`l1_error`."""
    return float(np.max(residual(soe, reference, T, dt)))


def measure(soe, reference, T, dt, norm: str = "L1") -> float:
    norm = normalize_norm(norm)
    return l1_error(soe, reference, T, dt) if norm == "L1" else linf_error(soe, reference, T, dt)


def normalize_norm(norm: str) -> str:
    key = str(norm).lower().replace("∞", "inf")
    if key in ("l1", "1"):
        return "L1"
    if key in ("linf", "inf", "max"):
        return "Linf"
    raise ValueError(f"unknown norm '{norm}'")


def write_csv(soe: SoeRepresentation, path, T: float, dt: float) -> None:
    """Write ``(t, Re, Im)`` samples of the SOE."""
    t = time_grid(T, dt)
    vals = eval_grid(soe, t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for tk, v in zip(t, vals):
            w.writerow([repr(float(tk)), repr(float(v.real)), repr(float(v.imag))])


def conjugate_closure(soe: SoeRepresentation, tol: float = 1e-12) -> SoeRepresentation:
    """Make an SOE real on real ``t`` by pairing ``(c, z)`` with ``(c*, -z*)``.

    If the terms already pair up (in reversed order, as produced by a
    quadrature of a symmetric density) each pair is averaged; otherwise the
    conjugate copy is appended and all weights are halved.
    """
    c, z = soe.c, soe.z
    cr, zr = np.conj(c[::-1]), -np.conj(z[::-1])
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.max(np.abs(zr - z)) <= 1e-8 * scale:
        c2 = (c + cr) / 2
        z2 = (z + zr) / 2
        # self-paired terms must sit on the imaginary axis with real weight
        mid = np.abs(z2 + np.conj(z2)) <= tol * scale
        z2 = np.where(mid, 1j * z2.imag, z2)
        c2 = np.where(mid, c2.real + 0j, c2)
    else:
        c2 = np.concatenate([c, np.conj(c)]) / 2
        z2 = np.concatenate([z, -np.conj(z)])
    meta = dict(soe.meta, real_kernel=True)
    return SoeRepresentation(c2, z2, soe.horizon, meta, soe.achieved_error)
