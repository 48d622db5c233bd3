"""
Parameter sweeps over T, eps or beta, and their CSV/JSON artifacts.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .contour import RefinementError, build_bcf_soe
from .oracle import reference_for
from .prony import minimal_modes
from .soe import measure, normalize_norm, time_grid
from .spectral import SpectralModel

AXES = ("T", "eps", "beta")
METHODS = ("quadrature", "quadrature+refine", "esprit")
CSV_COLUMNS = ("axis_value", "N", "error", "wall_time_s", "ref_T", "ref_logT", "ref_log2T")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a model, an axis with its values and the fixed parameters.

    ``model`` is the JSON document of a :class:`SpectralModel`.  Exactly the
    parameters that are not on the axis must be fixed (``beta`` may be left
    None to keep the model's own value).
    """
    model: dict
    axis: str
    values: tuple
    eps: Optional[float] = None
    T: Optional[float] = None
    beta: Optional[float] = None
    method: str = "quadrature+refine"
    norm: str = "L1"
    dt: float = 0.01
    N_max: int = 20

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("a sweep needs at least one value")
        if any(not v > 0 for v in vals) or list(vals) != sorted(vals):
            raise ValueError("sweep values must be positive and sorted")
        if getattr(self, self.axis) is not None:
            raise ValueError(f"'{self.axis}' is both the axis and a fixed parameter")
        for name in ("eps", "T"):
            if name != self.axis and getattr(self, name) is None:
                raise ValueError(f"fixed parameter '{name}' is missing")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "norm", normalize_norm(self.norm))
        SpectralModel.from_json(self.model)

    def point(self, value: float) -> dict:
        p = {"eps": self.eps, "T": self.T, "beta": self.beta}
        p[self.axis] = value
        return p

    @classmethod
    def from_json(cls, doc: dict, base_dir: str = ".") -> "SweepSpec":
        doc = dict(doc)
        model = doc.pop("model")
        if isinstance(model, str):
            with open(os.path.join(base_dir, model)) as fh:
                model = json.load(fh)
        if "nmax" in doc:
            doc["N_max"] = doc.pop("nmax")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown sweep keys: {sorted(extra)}")
        doc["values"] = tuple(doc.get("values", ()))
        return cls(model=model, **doc)


@dataclass
class SweepRow:
    axis_value: float
    N: int
    error: float
    wall_time_s: float
    flagged: bool = False
    message: str = ""


@dataclass
class SweepResult:
    axis: str
    rows: list
    reference: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return any(r.flagged for r in self.rows)


def _model_at(spec: SweepSpec, point: dict) -> SpectralModel:
    doc = dict(spec.model)
    if point["beta"] is not None:
        doc["beta"] = point["beta"]
    return SpectralModel.from_json(doc)


def _run_point(spec: SweepSpec, value: float) -> SweepRow:
    point = spec.point(value)
    start = time.perf_counter()
    try:
        model = _model_at(spec, point)
        eps, T = point["eps"], point["T"]
        ref = reference_for(model)
        if spec.method == "esprit":
            N, soe = minimal_modes(ref, T, eps, spec.dt, spec.N_max)
            err = soe.achieved_error[1]
            flagged = bool(soe.meta.get("flagged"))
            msg = "no N <= N_max met eps" if flagged else ""
        else:
            refine = spec.method == "quadrature+refine"
            try:
                soe = build_bcf_soe(model, eps, T, spec.norm, refine=refine, reference=ref,
                                    dt=spec.dt)
                flagged, msg = False, ""
            except RefinementError as exc:
                soe, flagged, msg = exc.best, True, str(exc)
            if soe.achieved_error is None:
                grid = time_grid(T, spec.dt)
                err = measure(soe, np.asarray(ref(grid)), T, spec.dt, spec.norm)
            else:
                err = soe.achieved_error[1]
            N = soe.N
    except Exception as exc:  # recorded as a flagged row, the sweep continues
        return SweepRow(value, 0, math.nan, time.perf_counter() - start, True,
                        f"{type(exc).__name__}: {exc}")
    return SweepRow(value, int(N), float(err), time.perf_counter() - start, flagged, msg)


def _axis_coordinate(axis: str, value: float) -> float:
    # complexity grows with T, 1/eps and beta
    return 1.0 / value if axis == "eps" else value


def reference_curves(axis: str, values, N0: float) -> dict:
    """Curves c x, c log(1+x) and c log(1+x)^2 through ``(x0, N0)``."""
    x = np.array([_axis_coordinate(axis, v) for v in values])
    g = np.log1p(x)
    return {
        "ref_T": list(N0 * x / x[0]),
        "ref_logT": list(N0 * g / g[0]),
        "ref_log2T": list(N0 * (g / g[0]) ** 2),
    }


def run_sweep(spec: SweepSpec, jobs: Optional[int] = None) -> SweepResult:
    """Run every sweep point (in a process pool when ``jobs != 1``).

    Rows are ordered by axis value whatever the completion order.
    """
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(spec.values) == 1:
        rows = [_run_point(spec, v) for v in spec.values]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(spec.values))) as pool:
            rows = list(pool.map(_run_point, [spec] * len(spec.values), spec.values))
    rows.sort(key=lambda r: r.axis_value)
    ref = reference_curves(spec.axis, spec.values, rows[0].N) if rows else {}
    return SweepResult(spec.axis, rows, ref)


def _row_dicts(result: SweepResult):
    for i, r in enumerate(result.rows):
        d = {"axis_value": r.axis_value, "N": r.N, "error": r.error, "wall_time_s": r.wall_time_s}
        for key in ("ref_T", "ref_logT", "ref_log2T"):
            d[key] = result.reference[key][i]
        d["flagged"] = r.flagged
        d["message"] = r.message
        yield d


def emit(result: SweepResult, path, fmt: str = "csv") -> None:
    """Write a sweep result as CSV (fixed columns) or JSON."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for d in _row_dicts(result):
                w.writerow([repr(float(d[k])) if k != "N" else d[k] for k in CSV_COLUMNS])
    elif fmt == "json":
        doc = {"axis": result.axis, "columns": list(CSV_COLUMNS), "rows": list(_row_dicts(result))}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
    else:
        raise ValueError(f"unknown format '{fmt}'")


def load_result(path, fmt: str = "json") -> dict:
    with open(path) as fh:
        if fmt == "json":
            return json.load(fh)
        return {"rows": list(csv.DictReader(fh))}


FIG1 = {
    "model": {"density": {"preset": "ohmic", "params": [1, 1]}, "statistics": "boson",
              "beta": "inf", "mu": 0.0, "branch": "total"},
    "axis": "T",
    "values": [10, 100, 1000, 10000],
    "eps": 0.01,
    "method": "esprit",
    "dt": 0.01,
    "N_max": 20,
}

PRESETS = {"fig1": FIG1}
