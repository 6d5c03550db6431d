"""Two-ion state detection: threshold optimization, the 3x3 state
preparation and measurement (SPAM) matrix with Dirichlet-resampled
uncertainties, Beta-posterior intervals, and the SPAM-corrected
maximum-likelihood parity fit.

Detection categories are ordered (both dark, one bright, both bright).
The SPAM matrix is column stochastic: column j holds the detection
probabilities of true category j, so modeled populations propagate
forward as p' = M p and data are never inverted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import beta as beta_dist
from scipy.stats import truncnorm

from ..rng import derived_stream

CONFIDENCE = 0.683
_QLO = (1.0 - CONFIDENCE) / 2.0
_QHI = 1.0 - _QLO


class DegenerateHistogramsError(ValueError):
    """No threshold pair separates the three count distributions."""


class FitError(RuntimeError):
    """The likelihood optimization failed."""


@dataclass(frozen=True)
class SpamMatrix:
    """Column-stochastic detection matrix with elementwise credible bounds."""

    matrix: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.shape != (3, 3):
            raise ValueError("SPAM matrix must be 3x3")
        if np.any(m < 0) or np.any(m > 1):
            raise ValueError("SPAM entries must be in [0, 1]")
        if np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("SPAM columns must sum to one")

    @classmethod
    def identity(cls) -> "SpamMatrix":
        return cls(matrix=np.eye(3))

    @property
    def sigma(self):
        if self.lower is None or self.upper is None:
            return None
        return 0.5 * (self.upper - self.lower)


@dataclass
class CountRecord:
    """Per-shot photon counts with a phase (or time) tag and the two
    detection thresholds: counts <= t1 are 'both dark', counts > t2
    'both bright', anything between 'one bright'."""

    tags: np.ndarray
    counts: np.ndarray
    t1: int
    t2: int

    def __post_init__(self):
        self.tags = np.asarray(self.tags, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)
        if self.tags.shape != self.counts.shape or self.tags.ndim != 1:
            raise ValueError("tags and counts must be aligned 1D arrays")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if not self.t1 < self.t2:
            raise ValueError("thresholds must satisfy t1 < t2")

    def classify(self) -> np.ndarray:
        """Category 0, 1, 2 per shot."""
        return np.where(self.counts <= self.t1, 0,
                        np.where(self.counts <= self.t2, 1, 2))

    def grouped(self):
        """(unique tags, category-count table of shape (n_tags, 3))."""
        cats = self.classify()
        tags = np.unique(self.tags)
        table = np.zeros((len(tags), 3), dtype=int)
        for i, tag in enumerate(tags):
            sel = cats[self.tags == tag]
            for c in range(3):
                table[i, c] = np.sum(sel == c)
        return tags, table


def save_count_record(path, record: CountRecord):
    with open(path, "w") as fh:
        fh.write("tag\tcounts\n")
        for tag, c in zip(record.tags, record.counts):
            fh.write(f"{tag:.12g}\t{c}\n")


def load_count_record(path, t1: int, t2: int) -> CountRecord:
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    return CountRecord(tags=data[:, 0], counts=data[:, 1].astype(int), t1=t1, t2=t2)


@dataclass(frozen=True)
class ThresholdResult:
    t1: int
    t2: int
    spam: SpamMatrix
    fidelity_product: float


def _classified_fractions(counts, t1, t2):
    c = np.asarray(counts)
    n = len(c)
    return np.array([np.sum(c <= t1), np.sum((c > t1) & (c <= t2)),
                     np.sum(c > t2)]) / n


def optimize_thresholds(counts_dark, counts_one, counts_both,
                        n_resamples: int = 10000, seed: int = 0) -> ThresholdResult:
    """Exhaustive threshold scan maximizing the product of the three
    diagonal detection fidelities.

    The inputs are raw photon counts recorded after preparing each of
    the three reference states.  Element uncertainties of the resulting
    SPAM matrix are central 68.3% intervals from seeded Dirichlet
    resampling of the classified fractions (one stream per column).
    """
    sets = [np.asarray(c, dtype=int) for c in (counts_dark, counts_one, counts_both)]
    if any(len(c) == 0 for c in sets):
        raise ValueError("all three count distributions must be non-empty")
    lo = min(int(c.min()) for c in sets)
    hi = max(int(c.max()) for c in sets)
    grid = np.arange(lo - 1, hi + 1)  # thresholds are inclusive upper edges
    # cumulative fraction <= t for each state on the common grid
    cdf = [np.searchsorted(np.sort(c), grid, side="right") / len(c) for c in sets]
    f0 = cdf[0][:, None]                    # dark classified dark at t1
    f1 = cdf[1][None, :] - cdf[1][:, None]  # one-bright between t1 and t2
    f2 = (1.0 - cdf[2])[None, :]            # both-bright above t2
    product = np.where(grid[:, None] < grid[None, :], f0 * f1 * f2, 0.0)
    i, j = np.unravel_index(np.argmax(product), product.shape)
    best = product[i, j]
    if best <= 0.0:
        raise DegenerateHistogramsError(
            "count distributions overlap completely: fidelity product is zero")
    t1, t2 = int(grid[i]), int(grid[j])
    cols = [_classified_fractions(c, t1, t2) for c in sets]
    matrix = np.stack(cols, axis=1)
    lower = np.empty((3, 3))
    upper = np.empty((3, 3))
    for j_col, c in enumerate(sets):
        cat_counts = _classified_fractions(c, t1, t2) * len(c)
        rng = derived_stream(seed, j_col)
        samples = rng.dirichlet(cat_counts + 1.0, size=n_resamples)
        lower[:, j_col] = np.quantile(samples, _QLO, axis=0)
        upper[:, j_col] = np.quantile(samples, _QHI, axis=0)
    spam = SpamMatrix(matrix=matrix, lower=lower, upper=upper)
    return ThresholdResult(t1=t1, t2=t2, spam=spam, fidelity_product=float(best))


def beta_interval(k: int, n: int):
    """Central 68.3% credible interval of a Beta(k+1, n-k+1) posterior.

    At the boundaries the interval is one sided: k = 0 pins the lower
    end to 0 and k = n pins the upper end to 1.
    """
    if not 0 <= k <= n or n < 1:
        raise ValueError("need 0 <= k <= n with n >= 1")
    a, b = k + 1.0, n - k + 1.0
    if k == 0:
        return 0.0, float(beta_dist.ppf(CONFIDENCE, a, b))
    if k == n:
        return float(beta_dist.ppf(1.0 - CONFIDENCE, a, b)), 1.0
    return (float(beta_dist.ppf(_QLO, a, b)), float(beta_dist.ppf(_QHI, a, b)))


@dataclass(frozen=True)
class ParityFit:
    """Sinusoidal parity-fringe fit: parity(phi) = contrast sin(2 phi +
    phase) + (2 offset - 1) with offset the mean even-population level."""

    contrast: float
    interval: tuple
    phase: float
    offset: float
    corrected: bool
    neg_log_likelihood: float


def _parity_populations(params, phis):
    c, phase, offset = params
    even = offset + 0.5 * c * np.sin(2.0 * phis + phase)
    return np.stack([0.5 * even, 1.0 - even, 0.5 * even], axis=1)


def _parity_nll(params, phis, table, matrix):
    c, phase, offset = params
    if not (0.0 <= c <= 1.0) or not (0.0 <= offset - 0.5 * c) \
            or not (offset + 0.5 * c <= 1.0):
        return 1e12
    p = _parity_populations(params, phis)
    if matrix is not None:
        p = p @ matrix.T
    return float(-np.sum(table * np.log(np.maximum(p, 1e-300))))


def mle_parity_fit(record: CountRecord, spam: SpamMatrix | None = None,
                   correct: bool = True, seed: int = 0,
                   n_restarts: int = 8) -> ParityFit:
    """Maximum-likelihood parity contrast from thresholded counts.

    The model parameterizes the even-parity population as
    offset + (contrast/2) sin(2 phi + phase), split evenly between the
    both-dark and both-bright categories.  With ``correct`` set, the
    modeled populations are propagated through the SPAM matrix before
    entering the multinomial likelihood (the data are never inverted).
    A derivative-free simplex with seeded restarts minimizes the
    negative log likelihood; the 68.3% interval comes from the inverse
    Hessian, truncated and renormalized at the physical bounds of the
    contrast, which makes it asymmetric near contrast = 1.
    """
    phis, table = record.grouped()
    if len(phis) < 3:
        raise ValueError("need at least three distinct phases")
    matrix = spam.matrix if (correct and spam is not None) else None

    # moment-based starting point from the measured parity curve
    totals = table.sum(axis=1)
    parity_data = (table[:, 0] + table[:, 2] - table[:, 1]) / np.maximum(totals, 1)
    sin_b = np.column_stack([np.sin(2 * phis), np.cos(2 * phis),
                             np.ones_like(phis)])
    coef, *_ = np.linalg.lstsq(sin_b, parity_data, rcond=None)
    c0 = min(float(np.hypot(coef[0], coef[1])), 1.0)
    phase0 = float(np.arctan2(coef[1], coef[0]))
    offset0 = float(np.clip((coef[2] + 1.0) / 2.0, c0 / 2, 1.0 - c0 / 2))

    rng = derived_stream(seed, 0)
    best = None
    for k in range(n_restarts):
        if k == 0:
            start = np.array([c0, phase0, offset0])
        else:
            start = np.array([
                rng.uniform(0.3, 1.0) * c0 + rng.uniform(0, 0.1),
                phase0 + rng.uniform(-np.pi, np.pi),
                np.clip(offset0 + rng.uniform(-0.05, 0.05), 0.05, 0.95),
            ])
            start[0] = np.clip(start[0], 0.0, min(2 * start[2], 2 - 2 * start[2]))
        res = minimize(_parity_nll, start, args=(phis, table, matrix),
                       method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise FitError("parity likelihood optimization failed")
    c_hat, phase_hat, offset_hat = best.x
    c_hat = float(np.clip(c_hat, 0.0, 1.0))

    sigma = _contrast_sigma(best.x, phis, table, matrix)
    interval = _truncated_interval(c_hat, sigma)
    return ParityFit(contrast=c_hat, interval=interval,
                     phase=float(np.mod(phase_hat + np.pi, 2 * np.pi) - np.pi),
                     offset=float(offset_hat), corrected=matrix is not None,
                     neg_log_likelihood=float(best.fun))


def _contrast_sigma(x_opt, phis, table, matrix):
    """Contrast standard error from the inverse Hessian of the negative
    log likelihood (finite differences, stencil kept inside bounds)."""
    h = np.array([1e-5, 1e-5, 1e-5])
    x0 = x_opt.copy()
    # keep the central-difference stencil inside the physical bounds
    x0[0] = np.clip(x0[0], h[0], 1.0 - h[0])
    hess = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            xpp = x0.copy(); xpp[i] += h[i]; xpp[j] += h[j]
            xpm = x0.copy(); xpm[i] += h[i]; xpm[j] -= h[j]
            xmp = x0.copy(); xmp[i] -= h[i]; xmp[j] += h[j]
            xmm = x0.copy(); xmm[i] -= h[i]; xmm[j] -= h[j]
            vals = [_parity_nll(x, phis, table, matrix)
                    for x in (xpp, xpm, xmp, xmm)]
            if any(v >= 1e12 for v in vals):
                return 0.0
            hess[i, j] = hess[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) \
                / (4 * h[i] * h[j])
    try:
        cov = np.linalg.inv(hess)
        var = cov[0, 0]
    except np.linalg.LinAlgError:
        return 0.0
    if not np.isfinite(var) or var <= 0:
        return 0.0
    return float(np.sqrt(var))


def _truncated_interval(c_hat, sigma):
    """68.3% interval of a normal truncated to the physical range [0, 1].

    When a bound sits within one sigma of the estimate the interval is
    one sided and ends exactly at the bound, mirroring the beta-interval
    convention at k = 0 or k = n.
    """
    if sigma == 0.0:
        return (c_hat, 1.0 if c_hat > 1.0 - 1e-9 else c_hat)
    a, b = (0.0 - c_hat) / sigma, (1.0 - c_hat) / sigma
    if 1.0 - c_hat <= sigma:
        lo = float(truncnorm.ppf(1.0 - CONFIDENCE, a, b, loc=c_hat, scale=sigma))
        return (lo, 1.0)
    if c_hat <= sigma:
        hi = float(truncnorm.ppf(CONFIDENCE, a, b, loc=c_hat, scale=sigma))
        return (0.0, hi)
    lo = float(truncnorm.ppf(_QLO, a, b, loc=c_hat, scale=sigma))
    hi = float(truncnorm.ppf(_QHI, a, b, loc=c_hat, scale=sigma))
    return (lo, hi)
