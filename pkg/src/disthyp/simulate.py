"""Monte Carlo validation of quantize-then-test schemes.

The simulated scheme mirrors the achievability construction: the X side is
compressed blockwise by a deterministic encoder (scalar Lloyd-Max applied
per sample, or any explicit block map), the detector sees (code, Y-block)
pairs, and decides via the per-sample log-likelihood ratio statistic

    S = (1/n) * sum_blocks log( P_quant(u, y-block) / Q_quant(u, y-block) ),

accepting the dependent hypothesis on {S > t}.  The quantized pair
(P_quant, Q_quant) is computed exactly by pushing the true block laws
through the encoder, so simulation error is purely statistical.

Trials are driven by fixed-size chunks of counter-based random streams
(see rngstreams), making every estimate a pure function of (seed, config)
regardless of worker count.  Calibration and evaluation use disjoint
streams.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import reduce

import numpy as np

from .dist import JointPmf, divergence_stats, product_model
from . import rngstreams

MAX_BLOCK_LEN = 3
MAX_TABLE_CELLS = 50_000_000
WILSON_Z95 = 1.959963984540054
WILSON_Z99 = 2.5758293035489004


class SimulationError(ValueError):
    """Invalid simulator input."""


@dataclass(frozen=True)
class Encoder:
    """Deterministic block map from X^block_len to a finite code alphabet.

    ``table`` is flat over mixed-radix block indices (first symbol is the
    most significant digit).  ``levels_reduced`` flags a quantizer request
    that asked for more levels than there are source points.
    """

    nx: int
    block_len: int
    codebook_size: int
    table: np.ndarray
    levels_reduced: bool = False

    def __post_init__(self):
        if self.nx < 1 or self.block_len < 1 or self.codebook_size < 1:
            raise SimulationError("encoder dimensions must be positive")
        table = np.asarray(self.table, dtype=np.int64)
        if table.shape != (self.nx ** self.block_len,):
            raise SimulationError(
                f"table must be flat with {self.nx ** self.block_len} entries, "
                f"got shape {table.shape}")
        if np.any(table < 0) or np.any(table >= self.codebook_size):
            raise SimulationError("table entries must lie in [0, codebook_size)")
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @classmethod
    def identity(cls, nx: int) -> "Encoder":
        return cls(nx, 1, nx, np.arange(nx))

    @classmethod
    def random_map(cls, nx: int, block_len: int, codebook_size: int,
                   rng: np.random.Generator) -> "Encoder":
        table = rng.integers(0, codebook_size, size=nx ** block_len)
        return cls(nx, block_len, codebook_size, table)

    def blockwise(self, block_len: int) -> "Encoder":
        """Apply this scalar encoder independently to each symbol of a block."""
        if self.block_len != 1:
            raise SimulationError("blockwise composition needs a scalar encoder")
        if block_len == 1:
            return self
        codes = self.table
        out = codes
        for _ in range(block_len - 1):
            out = (out[:, None] * self.codebook_size + codes[None, :]).ravel()
        return Encoder(self.nx, block_len, self.codebook_size ** block_len, out,
                       self.levels_reduced)


def _optimal_split_cells(pts: np.ndarray, wts: np.ndarray, levels: int) -> np.ndarray:
    """Globally optimal contiguous partition by dynamic programming.

    cost(i, j) is the weighted squared deviation of points i..j-1 about
    their centroid, expressed through prefix sums so each transition is
    O(1).  dp[k, j] = best cost of cutting the first j points into k cells.
    """
    npts = len(pts)
    w0 = np.concatenate(([0.0], np.cumsum(wts)))
    w1 = np.concatenate(([0.0], np.cumsum(wts * pts)))
    w2 = np.concatenate(([0.0], np.cumsum(wts * pts * pts)))

    def seg_cost(i: np.ndarray, j: int) -> np.ndarray:
        dw = w0[j] - w0[i]
        return (w2[j] - w2[i]) - (w1[j] - w1[i]) ** 2 / dw

    dp = np.full(npts + 1, np.inf)
    for j in range(1, npts + 1):
        dp[j] = seg_cost(np.array([0]), j)[0]
    back = np.zeros((levels + 1, npts + 1), dtype=np.int64)
    for k in range(2, levels + 1):
        new = np.full(npts + 1, np.inf)
        for j in range(k, npts + 1):
            i = np.arange(k - 1, j)
            cand = dp[i] + seg_cost(i, j)
            pick = int(np.argmin(cand))
            new[j] = cand[pick]
            back[k, j] = i[pick]
        dp = new
    cells = np.zeros(npts, dtype=np.int64)
    j = npts
    for k in range(levels, 1, -1):
        i = back[k, j]
        cells[i:j] = k - 1
        j = int(i)
    return cells


def lloyd_max(points, weights, levels: int, tol: float = 1e-12,
              max_iters: int = 500) -> Encoder:
    """Scalar minimum-MSE quantizer on a weighted real grid.

    The optimal contiguous split is found exactly by dynamic programming,
    then polished with centroid/midpoint-boundary alternation (which leaves
    a global optimum untouched but normalizes boundary ties).  Grid points
    landing exactly on a boundary go to the left cell.  Requests for more
    levels than grid points are reduced to one cell per point and flagged.
    """
    pts = np.asarray(points, dtype=np.float64)
    wts = np.asarray(weights, dtype=np.float64)
    if pts.ndim != 1 or pts.shape != wts.shape or len(pts) < 1:
        raise SimulationError("points and weights must be matching 1-d arrays")
    if np.any(np.diff(pts) <= 0):
        raise SimulationError("points must be strictly increasing")
    if np.any(wts <= 0) or abs(wts.sum() - 1.0) > 1e-9:
        raise SimulationError("weights must be positive and sum to 1")
    if levels < 1:
        raise SimulationError("levels must be >= 1")
    npts = len(pts)
    if levels >= npts:
        return Encoder(npts, 1, npts, np.arange(npts), levels_reduced=levels > npts)

    cells = _optimal_split_cells(pts, wts, levels)
    prev_mse = np.inf
    for _ in range(max_iters):
        ids = np.unique(cells)
        centroids = np.array([np.average(pts[cells == j], weights=wts[cells == j])
                              for j in ids])
        boundaries = 0.5 * (centroids[:-1] + centroids[1:])
        new_cells = np.searchsorted(boundaries, pts, side="left")
        mse = float((wts * (pts - centroids[new_cells]) ** 2).sum())
        moved = not np.array_equal(new_cells, cells)
        cells = new_cells
        if not moved or prev_mse - mse < tol:
            break
        prev_mse = mse
    # relabel occupied cells consecutively
    _, cells = np.unique(cells, return_inverse=True)
    codebook = int(cells.max()) + 1
    return Encoder(npts, 1, codebook, cells, levels_reduced=levels > npts)


@dataclass(frozen=True)
class QuantizedModel:
    """Exact block laws of (code, Y-block) under both hypotheses."""

    h0: np.ndarray
    h1: np.ndarray
    log_ratios: np.ndarray
    block_len: int

    @property
    def n_codes(self) -> int:
        return self.h0.shape[0]

    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.h0.ravel(), self.h1.ravel(), self.log_ratios.ravel()


def quantized_model(p: JointPmf, enc: Encoder) -> QuantizedModel:
    """Push the exact block laws P^l and Q^l through the encoder.

    The alternative table is built by pushing the product model's block law
    through the same map (not by re-multiplying quantized marginals, though
    the two agree for deterministic encoders; tests assert that identity).
    Codes never produced by the encoder are dropped from both tables.
    """
    if enc.nx != p.nx:
        raise SimulationError(f"encoder expects |X| = {enc.nx}, model has {p.nx}")
    if enc.block_len > MAX_BLOCK_LEN:
        raise SimulationError(
            f"block length {enc.block_len} exceeds the exact-enumeration cap "
            f"{MAX_BLOCK_LEN}")
    l = enc.block_len
    n_yblocks = p.ny ** l
    if enc.codebook_size * n_yblocks > MAX_TABLE_CELLS or p.nx ** l > MAX_TABLE_CELLS:
        raise SimulationError("quantized table would exceed the enumeration cap")
    q = product_model(p)
    h0 = np.zeros((enc.codebook_size, n_yblocks))
    h1 = np.zeros((enc.codebook_size, n_yblocks))
    for flat_idx, xblock in enumerate(itertools.product(range(p.nx), repeat=l)):
        code = enc.table[flat_idx]
        h0[code] += reduce(np.kron, (p.probs[x] for x in xblock))
        h1[code] += reduce(np.kron, (q.probs[x] for x in xblock))
    used = h0.sum(axis=1) > 0
    h0, h1 = h0[used], h1[used]
    for name, table in (("H0", h0), ("H1", h1)):
        if abs(table.sum() - 1.0) > 1e-9:
            raise SimulationError(f"{name} quantized table sums to {table.sum()!r}")
    log_ratios = np.log(h0) - np.log(h1)
    for arr in (h0, h1, log_ratios):
        arr.setflags(write=False)
    return QuantizedModel(h0, h1, log_ratios, l)


def table_mutual_information(table: np.ndarray) -> float:
    """I between the row and column variables of a 2-d joint table (nats)."""
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = table * (np.log(table) - np.log(rows) - np.log(cols))
    return float(np.where(np.isfinite(term), term, 0.0).sum())


# --------------------------------------------------------------------------
# Sampling machinery
# --------------------------------------------------------------------------

def _chunk_stats(pmf: np.ndarray, lr: np.ndarray, k_blocks: int, n: int,
                 seed: int, purpose: int, span: tuple[int, int]) -> np.ndarray:
    idx, count = span
    rng = rngstreams.stream(seed, purpose, idx)
    counts = rng.multinomial(k_blocks, pmf, size=count)
    return counts @ lr / n


def _sample_stats(pmf: np.ndarray, lr: np.ndarray, k_blocks: int, n: int,
                  trials: int, seed: int, purpose: int,
                  workers: int = 1) -> np.ndarray:
    spans = rngstreams.chunk_spans(trials)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda span: _chunk_stats(pmf, lr, k_blocks, n, seed, purpose, span),
                spans))
    else:
        parts = [_chunk_stats(pmf, lr, k_blocks, n, seed, purpose, span)
                 for span in spans]
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass(frozen=True)
class ThresholdCalibration:
    t: float
    saturated: bool
    cal_trials: int


def calibrate_threshold(qm: QuantizedModel, n: int, eps: float, cal_trials: int,
                        seed: int, workers: int = 1) -> ThresholdCalibration:
    """Empirical eps-quantile from below of the statistic under the null.

    The returned t makes the deterministic region {S > t} have empirical
    Type I error at most eps on the calibration sample.  If even the
    smallest sample value overshoots the budget, t is placed one ulp below
    the minimum and flagged as saturated.
    """
    if not (0.0 < eps < 1.0):
        raise SimulationError(f"eps must lie in (0, 1), got {eps!r}")
    if cal_trials < 1:
        raise SimulationError("cal_trials must be >= 1")
    if n % qm.block_len:
        raise SimulationError(f"n = {n} is not a multiple of block length {qm.block_len}")
    if cal_trials < 100.0 / eps:
        warnings.warn(
            f"cal_trials = {cal_trials} is small for eps = {eps}; "
            f"recommend at least {math.ceil(100.0 / eps)}",
            stacklevel=2)
    pmf, _, lr = qm.flat()
    stats = np.sort(_sample_stats(pmf, lr, n // qm.block_len, n, cal_trials,
                                  seed, rngstreams.PURPOSE_CALIBRATE, workers))
    allowed = int(math.floor(eps * cal_trials + 1e-9))
    if allowed == 0:
        return ThresholdCalibration(float(np.nextafter(stats[0], -np.inf)), True, cal_trials)
    t = float(stats[allowed - 1])
    while int(np.searchsorted(stats, t, side="right")) > allowed:
        below = int(np.searchsorted(stats, t, side="left"))
        if below == 0:
            return ThresholdCalibration(float(np.nextafter(stats[0], -np.inf)),
                                        True, cal_trials)
        t = float(stats[below - 1])
    return ThresholdCalibration(t, False, cal_trials)


def wilson_interval(successes: int, trials: int,
                    z: float = WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval; zero and full counts use the rule of three."""
    if trials < 1:
        raise SimulationError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise SimulationError("successes must lie in [0, trials]")
    if successes == 0:
        return 0.0, min(1.0, 3.0 / trials)
    if successes == trials:
        return max(0.0, 1.0 - 3.0 / trials), 1.0
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class SimResult:
    """Estimated operating point of one simulated test."""

    n: int
    trials: int
    threshold_t: float
    type1_hat: float
    type2_hat: float
    type1_ci: tuple[float, float]
    type2_ci: tuple[float, float]
    seed: int
    eps_n: float = math.nan

    CSV_HEADER = "n,eps_n,t,type1_hat,type2_hat,ci_lo,ci_hi,seed"

    def csv_row(self) -> str:
        cells = [str(self.n), repr(float(self.eps_n)), repr(float(self.threshold_t)),
                 repr(float(self.type1_hat)), repr(float(self.type2_hat)),
                 repr(float(self.type2_ci[0])), repr(float(self.type2_ci[1])),
                 str(self.seed)]
        return ",".join(cells)

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "trials": self.trials, "threshold_t": self.threshold_t,
            "type1_hat": self.type1_hat, "type2_hat": self.type2_hat,
            "type1_ci": list(self.type1_ci), "type2_ci": list(self.type2_ci),
            "seed": self.seed,
            "eps_n": None if math.isnan(self.eps_n) else self.eps_n,
        }, indent=2)

    def with_eps(self, eps_n: float) -> "SimResult":
        return replace(self, eps_n=float(eps_n))


def estimate_errors(qm: QuantizedModel, n: int, t: float, trials: int,
                    seed: int, workers: int = 1) -> SimResult:
    """Monte Carlo Type I / Type II estimates for the region {S > t}.

    Type I counts null trials with S <= t; Type II counts alternative
    trials with S > t.  Both get Wilson 95% intervals.  Degenerate
    thresholds behave as expected: t = -inf accepts always (type2 = 1,
    type1 = 0), t = +inf never.
    """
    if trials < 1:
        raise SimulationError("trials must be >= 1")
    if n < 1 or n % qm.block_len:
        raise SimulationError(f"n = {n} must be a positive multiple of block "
                              f"length {qm.block_len}")
    pmf0, pmf1, lr = qm.flat()
    k = n // qm.block_len
    s0 = _sample_stats(pmf0, lr, k, n, trials, seed, rngstreams.PURPOSE_H0, workers)
    s1 = _sample_stats(pmf1, lr, k, n, trials, seed, rngstreams.PURPOSE_H1, workers)
    k1 = int((s0 <= t).sum())
    k2 = int((s1 > t).sum())
    return SimResult(
        n=n, trials=trials, threshold_t=float(t),
        type1_hat=k1 / trials, type2_hat=k2 / trials,
        type1_ci=wilson_interval(k1, trials),
        type2_ci=wilson_interval(k2, trials),
        seed=seed)


# --------------------------------------------------------------------------
# Second-order (centralized) reference
# --------------------------------------------------------------------------

# Rational approximation for the standard normal quantile (relative error
# below 1.15e-9 everywhere), then one Halley step against erfc sharpens it
# to machine precision.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF."""
    if not (0.0 < p < 1.0):
        raise SimulationError(f"quantile level must lie in (0, 1), got {p!r}")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    plow, phigh = 0.02425, 1.0 - 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    elif p <= phigh:
        q = p - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
              / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def centralized_second_order(p: JointPmf, eps: float, n: int) -> float:
    """Normal approximation of the optimal per-sample Type II exponent when
    the detector sees X losslessly: D + sqrt(V/n) * ppf(eps) + ln(n)/(2n).
    """
    if not (0.0 < eps < 1.0):
        raise SimulationError(f"eps must lie in (0, 1), got {eps!r}")
    if n < 1:
        raise SimulationError(f"n must be >= 1, got {n}")
    stats = divergence_stats(p)
    return stats.kl + math.sqrt(stats.var_div / n) * norm_ppf(eps) + math.log(n) / (2.0 * n)
