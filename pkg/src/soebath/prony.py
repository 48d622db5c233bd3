"""
ESPRIT fitting of sums of exponentials from uniform samples.

The default factorization uses the full Hankel matrix of all samples.  It
is never formed: products with it are FFT convolutions, and its leading
singular vectors come from ARPACK.  Small problems use a dense SVD.  A
decimated variant (row and column index subsets, solved as a matrix
pencil) is available for very long records.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.fft import fft, ifft, next_fast_len
from scipy.sparse.linalg import LinearOperator, svds

from .soe import SoeRepresentation, eval_grid, reference_values, time_grid

RANK_TOL = 1e-13
GROWTH_TOL = 1e-8
DENSE_LIMIT = 2500
DECIMATED_CAP = 2048
LSQ_BLOCK = 65536


class RankDeficiencyError(ValueError):
    """The samples have numerical rank below the requested number of modes."""


class GrowingModeWarning(UserWarning):
    """A fitted ratio had modulus above one and was moved to the unit circle."""


@dataclass(frozen=True)
class SampleSet:
    """Values ``f(k dt)`` for ``k = 0 .. floor(T/dt)``."""
    values: np.ndarray
    dt: float
    T: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).ravel()
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if vals.size != time_grid(self.T, self.dt).size:
            raise ValueError("sample count must equal floor(T/dt) + 1")
        if not np.all(np.isfinite(vals)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return time_grid(self.T, self.dt)

    def __len__(self):
        return self.values.size


def sample(reference, T: float, dt: float) -> SampleSet:
    """Sample a reference function on the uniform grid ``k dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    t = time_grid(T, dt)
    return SampleSet(reference_values(reference, t), dt, T)


# ----------------------------------------------------------- factorization

def hankel_operator(y: np.ndarray, rows: int) -> LinearOperator:
    """Full Hankel matrix ``H[i, j] = y[i + j]`` as an FFT-backed operator."""
    K = y.size
    cols = K - rows + 1
    nfft = next_fast_len(K + cols - 1)
    Y = fft(y, nfft)
    Yc = fft(np.conj(y), nfft)

    def matvec(x):
        x = np.asarray(x, dtype=complex).ravel()
        return ifft(Y * fft(x[::-1], nfft))[cols - 1:cols - 1 + rows]

    def rmatvec(u):
        u = np.asarray(u, dtype=complex).ravel()
        return ifft(Yc * fft(u[::-1], nfft))[rows - 1:rows - 1 + cols]

    return LinearOperator((rows, cols), matvec=matvec, rmatvec=rmatvec, dtype=complex)


@dataclass
class HankelFactor:
    """Leading left singular vectors and singular values of the data Hankel."""
    U: np.ndarray
    s: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.sum(self.s > RANK_TOL * self.s[0])) if self.s[0] > 0 else 0


def factorize(samples: SampleSet, k: int) -> HankelFactor:
    """Top-``k`` singular triplets of the full Hankel matrix of the samples."""
    y = samples.values
    K = y.size
    rows = (K + 1) // 2
    cols = K - rows + 1
    k = min(k, min(rows, cols) - 1) if K > DENSE_LIMIT else k
    if K <= DENSE_LIMIT:
        H = sla.hankel(y[:rows], y[rows - 1:])
        U, s, _ = sla.svd(H, full_matrices=False)
        return HankelFactor(U[:, :k], s[:k])
    op = hankel_operator(y, rows)
    # deterministic start vector keeps fits reproducible
    v0 = np.ones(cols, dtype=complex) / math.sqrt(cols)
    U, s, _ = svds(op, k=k, tol=0, v0=v0)
    order = np.argsort(s)[::-1]
    return HankelFactor(U[:, order], s[order])


def _hybrid_indices(n: int, count: int) -> np.ndarray:
    """At most ``count`` indices in ``[0, n)``: geometric near 0, then uniform."""
    if n <= count:
        return np.arange(n)
    half = count // 2
    geo = np.unique(np.round(np.geomspace(1, n - 1, half)).astype(int))
    uni = np.round(np.linspace(0, n - 1, count - geo.size)).astype(int)
    return np.unique(np.concatenate([[0], geo, uni]))[:count]


def _decimated_ratios(samples: SampleSet, N: int, cap: int) -> np.ndarray:
    y = samples.values
    half = (y.size - 1) // 2
    r = _hybrid_indices(half, cap)
    c = _hybrid_indices(half, cap)
    H0 = y[r[:, None] + c[None, :]]
    H1 = y[r[:, None] + c[None, :] + 1]
    U, s, Vh = sla.svd(H0, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0]))
    if N > rank:
        raise RankDeficiencyError(f"numerical rank {rank} < N = {N}")
    # pencil: eigenvalues of S^-1 U^H H1 V are the ratios
    A = (U[:, :N].conj().T @ H1 @ Vh[:N].conj().T) / s[:N, None]
    return sla.eigvals(A)


def ratios_to_poles(lam: np.ndarray, dt: float) -> np.ndarray:
    """Poles ``z = i log(lam) / dt`` with ``Re z`` in ``(-pi/dt, pi/dt]``.

    Ratios outside the unit disc are moved onto the unit circle; a warning
    is issued when the excess exceeds 1e-8.
    """
    lam = np.asarray(lam, dtype=complex)
    mod = np.abs(lam)
    if np.any(mod > 1 + GROWTH_TOL):
        warnings.warn(f"{int(np.sum(mod > 1 + GROWTH_TOL))} growing mode(s) clamped to the unit circle",
                      GrowingModeWarning, stacklevel=3)
    log_mod = np.minimum(np.log(mod), 0.0)
    arg = np.angle(lam)
    re = -arg / dt
    re = np.where(re <= -np.pi / dt, re + 2 * np.pi / dt, re)
    return re + 1j * log_mod / dt


def fit_weights(z: np.ndarray, y: np.ndarray, dt: float) -> np.ndarray:
    """Least-squares weights on the full grid (blockwise QR, low memory)."""
    K = y.size
    t = np.arange(K) * dt
    if K <= LSQ_BLOCK:
        V = np.exp(-1j * np.outer(t, z))
        return sla.lstsq(V, y)[0]
    Rs, qys = [], []
    for s in range(0, K, LSQ_BLOCK):
        V = np.exp(-1j * np.outer(t[s:s + LSQ_BLOCK], z))
        Q, R = sla.qr(V, mode="economic")
        Rs.append(R)
        qys.append(Q.conj().T @ y[s:s + LSQ_BLOCK])
    return sla.lstsq(np.vstack(Rs), np.concatenate(qys))[0]


def esprit(samples: SampleSet, N: int, factor: Optional[HankelFactor] = None,
           method: str = "full", decimation_cap: int = DECIMATED_CAP) -> SoeRepresentation:
    """Fit ``N`` exponentials to uniform samples by ESPRIT.

    Parameters
    ----------
    samples : SampleSet
    N : int
        Number of modes, with ``2 N < len(samples)``.
    factor : HankelFactor, optional
        Precomputed factorization with at least ``N`` vectors (reused across
        N by :func:`minimal_modes`).
    method : {"full", "decimated"}
        Full Hankel with shift invariance, or hybrid-decimated index sets
        solved as a matrix pencil.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if 2 * N >= len(samples):
        raise ValueError("need 2N < number of samples")
    if method == "decimated":
        lam = _decimated_ratios(samples, N, decimation_cap)
    elif method == "full":
        if factor is None or factor.U.shape[1] < N:
            factor = factorize(samples, N)
        if N > factor.rank:
            raise RankDeficiencyError(f"numerical rank {factor.rank} < N = {N}")
        U = factor.U[:, :N]
        Phi = sla.lstsq(U[:-1], U[1:])[0]
        lam = sla.eigvals(Phi)
    else:
        raise ValueError(f"unknown method '{method}'")
    z = ratios_to_poles(lam, samples.dt)
    c = fit_weights(z, samples.values, samples.dt)
    meta = {"provenance": "esprit", "dt": samples.dt, "method": method}
    return SoeRepresentation(c, z, samples.T, meta)


def minimal_modes(reference, T: float, eps: float, dt: float = 0.01, N_max: int = 20,
                  method: str = "full", samples: Optional[SampleSet] = None):
    """Smallest ``N`` whose ESPRIT fit has Riemann L1 error at most ``eps``.

    Returns ``(N, soe)``.  When no ``N <= N_max`` succeeds the best fit is
    returned with ``soe.meta["flagged"] = True``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if N_max < 1:
        raise ValueError("N_max must be at least 1")
    if samples is None:
        samples = sample(reference, T, dt)
    y = samples.values
    N_max = min(N_max, (len(samples) - 1) // 2)
    factor = None
    if method == "full":
        k = min(N_max, 12)
        factor = factorize(samples, k)
    best = None
    for N in range(1, N_max + 1):
        if method == "full" and N > factor.U.shape[1]:
            factor = factorize(samples, min(N_max, 2 * factor.U.shape[1]))
        try:
            soe = esprit(samples, N, factor, method)
        except RankDeficiencyError:
            break
        err = float(np.sum(np.abs(eval_grid(soe, samples.times) - y)) * samples.dt)
        soe = soe.with_error("L1", err)
        if best is None or err < best.achieved_error[1]:
            best = soe
        if err <= eps:
            return N, soe
    if best is None:
        raise RankDeficiencyError("samples have zero numerical rank")
    flagged = SoeRepresentation(best.c, best.z, best.horizon, dict(best.meta, flagged=True),
                                best.achieved_error)
    return flagged.N, flagged


def compress(soe: SoeRepresentation, eps: float, T: float, dt: float = 0.01,
             method: str = "full") -> SoeRepresentation:
    """Re-fit an SOE with fewer terms through the ESPRIT protocol.

    The fit budget is ``eps`` minus the input's recorded error, so the
    result stays within ``eps`` of whatever the input approximated.  The
    input is returned unchanged when no smaller fit meets the budget.
    """
    prior = soe.achieved_error[1] if soe.achieved_error else 0.0
    budget = eps - prior
    if budget <= 0:
        raise ValueError("input error already exceeds eps")
    if soe.N == 1:
        return soe
    samples = SampleSet(eval_grid(soe, time_grid(T, dt)), dt, T)
    N, fit = minimal_modes(None, T, budget, dt, N_max=soe.N - 1, method=method, samples=samples)
    if fit.meta.get("flagged") or N >= soe.N:
        return soe
    meta = dict(fit.meta, compressed_from=soe.N)
    return SoeRepresentation(fit.c, fit.z, min(T, soe.horizon), meta,
                             ("L1", prior + fit.achieved_error[1]))
