"""Coincidence counting, the g2 estimator and the peak-g2 versus ξ model."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .eit_medium import DegenerateFitError, FitConvergenceError
from .waveforms import G2Waveform

WINDOW_START = 700e-9
BIN_WIDTH = 5e-9
N_BINS = 100
FIBER_DELAY = 800e-9
N_FLOOR = 20
CLASSICAL_LIMIT = 2.0


@dataclass(frozen=True)
class DetectionParams:
    """Detection chain and backgrounds.

    ``leak_coeff`` is the coupling-leakage background in counts per trigger
    per detection window per unit ξ. ``fiber_delay`` shifts the signal
    waveform relative to the herald.
    """

    collection_eff: float = 0.25
    dark_rate: float = 0.0
    accidental_rate: float = 0.0
    leak_coeff: float = 0.0
    n_triggers: int = 30000
    fiber_delay: float = FIBER_DELAY
    window_start: float = WINDOW_START
    bin_width: float = BIN_WIDTH
    n_bins: int = N_BINS

    def __post_init__(self):
        if not 0 <= self.collection_eff <= 1:
            raise ValueError("collection_eff must lie in [0, 1]")
        for name in ("dark_rate", "accidental_rate", "leak_coeff"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if int(self.n_triggers) != self.n_triggers or self.n_triggers < 1:
            raise ValueError("n_triggers must be a positive integer")
        if self.bin_width <= 0 or self.n_bins < 1:
            raise ValueError("bad bin geometry")

    @property
    def window(self) -> float:
        return self.bin_width * self.n_bins

    @property
    def bin_edges(self) -> np.ndarray:
        return self.window_start + self.bin_width * np.arange(self.n_bins + 1)


@dataclass(frozen=True)
class CorrelationHistogram:
    bin_edges: np.ndarray  # [s] after the trigger
    counts: np.ndarray
    n_triggers: int
    sparse_warning: bool = False

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        if edges.ndim != 1 or edges.size != counts.size + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")
        w = np.diff(edges)
        if np.any(w <= 0) or np.max(np.abs(w - w[0])) > 1e-6 * w[0]:
            raise ValueError("bins must be uniform")
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def to_csv(self, path) -> None:
        from .io import write_csv

        write_csv(path, ["bin_start_ns", "count"], [self.bin_edges[:-1] * 1e9, self.counts])

    @classmethod
    def from_csv(cls, path, n_triggers: int) -> "CorrelationHistogram":
        from .io import read_csv

        cols = read_csv(path, ["bin_start_ns", "count"])
        starts = cols["bin_start_ns"] * 1e-9
        if starts.size < 2:
            raise ValueError("need at least two bins")
        edges = np.append(starts, starts[-1] + (starts[1] - starts[0]))
        return cls(edges, np.rint(cols["count"]).astype(np.int64), n_triggers)


def histogram_from_events(path, d: DetectionParams | None = None,
                          n_triggers: int | None = None) -> CorrelationHistogram:
    """Bin a time-tag CSV with columns ``trigger_id, detection_time_ns``.

    Detection times are measured from the herald. Without ``n_triggers`` the
    number of distinct trigger ids is used, which misses heralds that saw no
    detection.
    """
    from .io import read_csv

    d = d or DetectionParams()
    cols = read_csv(path, ["trigger_id", "detection_time_ns"])
    n = int(n_triggers) if n_triggers is not None else int(np.unique(cols["trigger_id"]).size)
    counts, _ = np.histogram(cols["detection_time_ns"] * 1e-9, bins=d.bin_edges)
    return CorrelationHistogram(d.bin_edges, counts, max(n, 1))


# ------------------------------------------------------------ Monte Carlo

def correlated_bin_probability(g2: G2Waveform, d: DetectionParams) -> np.ndarray:
    """Per-trigger probability that the heralded photon lands in each bin."""
    edges = d.bin_edges - d.fiber_delay
    t = g2.time_grid
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g2.value[1:] + g2.value[:-1]) * np.diff(t))])
    inside = np.interp(edges, t, cum)
    prob = d.collection_eff * np.diff(inside)
    if prob.sum() > 1 + 1e-9:
        raise ValueError("G2 integrates to more than one photon per trigger in the window")
    return np.clip(prob, 0.0, None)


def background_per_bin(d: DetectionParams, xi: float = 0.0) -> float:
    """Expected background counts per trigger in one bin."""
    per_window = (d.dark_rate + d.accidental_rate) * d.window + d.leak_coeff * xi
    return per_window / d.n_bins


def expected_histogram(g2: G2Waveform, d: DetectionParams, xi: float = 0.0) -> np.ndarray:
    """Mean counts per bin over ``n_triggers`` heralds."""
    return d.n_triggers * (correlated_bin_probability(g2, d) + background_per_bin(d, xi))


def monte_carlo_histogram(g2: G2Waveform, d: DetectionParams, xi: float = 0.0,
                          seed: int | None = None) -> CorrelationHistogram:
    """Simulate the coincidence histogram of ``n_triggers`` heralds.

    Each herald yields at most one correlated detection, in bin ``b`` with
    probability ``collection_eff * ∫_b G2``, so the correlated counts over
    all heralds are one multinomial draw. Backgrounds are independent
    Poisson counts, flat over the window.
    """
    if seed is None:
        raise ValueError("an explicit seed is required")
    if xi < 0:
        raise ValueError("xi must be >= 0")
    if g2.time_grid[0] > d.bin_edges[0] - d.fiber_delay or g2.time_grid[-1] < d.bin_edges[-1] - d.fiber_delay:
        raise ValueError("G2 waveform does not cover the detection window")
    rng = np.random.default_rng(seed)
    prob = correlated_bin_probability(g2, d)
    corr = rng.multinomial(d.n_triggers, np.append(prob, max(0.0, 1 - prob.sum())))[:-1]
    bg = background_per_bin(d, xi)
    noise = rng.poisson(d.n_triggers * bg, size=d.n_bins)
    sparse = bool(np.max(prob + bg) > 1)
    if sparse:
        warnings.warn("expected counts per bin per trigger exceed 1; estimator assumes a sparse regime")
    return CorrelationHistogram(d.bin_edges, corr + noise, d.n_triggers, sparse)


# --------------------------------------------------------------- estimator

@dataclass(frozen=True)
class G2Estimate:
    g2: float
    tau_d: float        # centre of the peak bin [s after trigger]
    uncertainty: float
    floor_mean: float
    peak_counts: int

    @property
    def above_classical_limit(self) -> bool:
        """Label only; exceeding 2 is not by itself a proof of nonclassicality."""
        return self.g2 > CLASSICAL_LIMIT


def floor_bins(n_bins: int, peak: int, n_floor: int = N_FLOOR) -> np.ndarray:
    """Indices of the ``n_floor`` bins farthest from ``peak`` (earlier bin wins ties)."""
    idx = np.arange(n_bins)
    order = np.lexsort((idx, -np.abs(idx - peak)))
    return np.sort(order[:min(n_floor, n_bins - 1)])


def _peak_and_floor(values):
    peak = int(np.argmax(values))  # first occurrence, i.e. earlier bin on ties
    return peak, floor_bins(len(values), peak)


def estimate_g2(h: CorrelationHistogram) -> G2Estimate:
    """Peak-bin counts over the mean of the far-from-peak floor bins."""
    if h.counts.size < 11:
        raise ValueError("need at least 10 floor bins besides the peak")
    peak, floor = _peak_and_floor(h.counts)
    n_floor = h.counts[floor]
    mean = float(n_floor.mean())
    if mean == 0:
        raise ZeroDivisionError("floor bins are empty; g2 undefined")
    n_peak = int(h.counts[peak])
    g = n_peak / mean
    rel = np.sqrt((1 / n_peak if n_peak else 0.0) + 1 / n_floor.sum())
    return G2Estimate(g, float(h.centers[peak]), g * rel, mean, n_peak)


def analytic_g2(g2: G2Waveform, d: DetectionParams, xi: float = 0.0) -> float:
    """The ratio :func:`estimate_g2` converges to for infinite statistics."""
    lam = expected_histogram(g2, d, xi)
    peak, floor = _peak_and_floor(lam)
    return float(lam[peak] / lam[floor].mean())


def background_for_g2(g2: G2Waveform, d: DetectionParams, target: float) -> float:
    """Flat background (counts per trigger per bin) that gives ``analytic_g2 == target``."""
    if target <= 1:
        raise ValueError("target g2 must exceed 1")
    sig = correlated_bin_probability(g2, d)
    peak, floor = _peak_and_floor(sig)
    b = (sig[peak] - target * sig[floor].mean()) / (target - 1)
    if b < 0:
        raise ValueError("target g2 exceeds the background-free ratio")
    return float(b)


def calibrate_accidental_rate(g2: G2Waveform, d: DetectionParams, target: float) -> float:
    """Accidental rate [1/s] that sets the source-only g2 (no leakage) to ``target``."""
    b = background_for_g2(g2, d, target)
    rate = b * d.n_bins / d.window - d.dark_rate
    if rate < 0:
        raise ValueError("dark counts alone already exceed the required background")
    return float(rate)


def calibrate_leak_coeff(g2: G2Waveform, d: DetectionParams, xi: float, target: float) -> float:
    """Leakage coefficient that brings the g2 at read/write ratio ``xi`` to ``target``."""
    b = background_for_g2(g2, d, target)
    rest = b * d.n_bins - (d.dark_rate + d.accidental_rate) * d.window
    if rest < 0:
        raise ValueError("static backgrounds already exceed the required background")
    return float(rest / xi)


# -------------------------------------------------------- peak-g2 model

@dataclass(frozen=True)
class G2Model:
    """``g2(ξ) = N_si √ξ exp(-γ_s ξ) / (leak_coeff ξ + N_b)``."""

    N_si: float
    gamma_s: float
    leak_coeff: float
    N_b: float

    def __post_init__(self):
        vals = (self.N_si, self.gamma_s, self.leak_coeff, self.N_b)
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise ValueError("model parameters must be finite and >= 0")

    def scaled_to(self, xi: float, g2: float) -> "G2Model":
        """Same shape, ``N_si`` rescaled so the model passes through ``(xi, g2)``."""
        unit = G2Model(1.0, self.gamma_s, self.leak_coeff, self.N_b)
        return G2Model(g2 / g2_peak_model(unit, xi), self.gamma_s, self.leak_coeff, self.N_b)

    def floor(self, xi):
        """Background counts per bin, ``leak_coeff ξ + N_b``."""
        return self.leak_coeff * np.asarray(xi, dtype=float) + self.N_b

    def as_array(self) -> np.ndarray:
        return np.array([self.N_si, self.gamma_s, self.leak_coeff, self.N_b])


def g2_peak_model(m: G2Model, xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi must be > 0")
    return m.N_si * np.sqrt(xi) * np.exp(-m.gamma_s * xi) / (m.leak_coeff * xi + m.N_b)


def model_maximum(m: G2Model, xi_max: float = 1e3) -> tuple[float, float]:
    """Location and value of the interior maximum of the model."""
    if m.gamma_s <= 0 and m.leak_coeff <= 0:
        raise ValueError("model increases without bound")
    res = minimize_scalar(lambda u: -float(g2_peak_model(m, np.exp(u))),
                          bounds=(np.log(1e-6), np.log(xi_max)), method="bounded",
                          options={"xatol": 1e-12})
    xs = float(np.exp(res.x))
    return xs, float(g2_peak_model(m, xs))


@dataclass(frozen=True)
class G2Fit:
    model: G2Model
    covariance: np.ndarray
    residual: float  # reduced chi-square
    fixed: tuple = field(default=())

    def to_json(self, path) -> None:
        from .io import write_json

        write_json(path, {
            "parameters": {"N_si": self.model.N_si, "gamma_s": self.model.gamma_s,
                           "leak_coeff": self.model.leak_coeff, "N_b": self.model.N_b},
            "parameter_order": ["N_si", "gamma_s", "leak_coeff", "N_b"],
            "covariance": self.covariance,
            "reduced_chi2": self.residual,
            "fixed": list(self.fixed),
        })


def fit_g2_model(xi, g2, sigma, floor=None, floor_sigma=None, N_b: float | None = None,
                 max_nfev: int = 5000) -> G2Fit:
    """Weighted fit of the peak-g2 model.

    The g2 values alone fix only the shape: scaling ``N_si``, ``leak_coeff``
    and ``N_b`` together leaves every g2 unchanged. Supply the measured floor
    counts (``floor``, optionally with ``floor_sigma``) to fit all four
    parameters, or hold ``N_b`` fixed.
    """
    xi = np.asarray(xi, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if xi.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(xi <= 0) or xi.max() / xi.min() < 4:
        raise ValueError("xi values must be positive and span a ratio of at least 4")
    if g2.shape != xi.shape or sigma.shape != xi.shape or np.any(sigma <= 0):
        raise ValueError("g2 and sigma must match xi, with sigma > 0")
    if floor is None and N_b is None:
        raise DegenerateFitError("g2 alone cannot fix the overall scale; give floor counts or N_b")
    if floor is not None:
        floor = np.asarray(floor, dtype=float)
        fs = np.sqrt(np.maximum(floor, 1.0)) if floor_sigma is None else np.asarray(floor_sigma, float)

    # start: background line from the floors, shape from a log-linear fit
    if floor is not None:
        lk, nb = np.polyfit(xi, floor, 1)
        lk, nb = max(lk, 1e-3 * abs(nb) + 1e-12), max(nb, 1e-6)
    else:
        nb, lk = float(N_b), 0.1 * float(N_b)
    y = np.log(np.maximum(g2, 1e-12) * (lk * xi + nb) / np.sqrt(xi))
    slope, icpt = np.polyfit(xi, y, 1)
    x0 = np.array([np.exp(icpt), max(-slope, 1e-4), lk, nb])

    free = [0, 1, 2] if floor is None else [0, 1, 2, 3]

    def unpack(v):
        full = x0.copy()
        full[free] = v
        if floor is None:
            full[3] = N_b
        return full

    def resid(v):
        m = G2Model(*np.maximum(unpack(v), 0.0))
        r = (g2_peak_model(m, xi) - g2) / sigma
        if floor is not None:
            r = np.concatenate([r, (m.floor(xi) - floor) / fs])
        return r

    sol = least_squares(resid, x0[free], bounds=(0.0, np.inf), method="trf",
                        x_scale="jac", max_nfev=max_nfev, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    model = G2Model(*np.maximum(unpack(sol.x), 0.0))
    dof = max(sol.fun.size - len(free), 1)
    chi2 = float(np.sum(sol.fun**2) / dof)
    if sol.status <= 0:
        raise FitConvergenceError("g2 model fit did not converge", best=model, residual=chi2)
    cov = np.full((4, 4), 0.0)
    try:
        sub = np.linalg.inv(sol.jac.T @ sol.jac)
    except np.linalg.LinAlgError:
        sub = np.full((len(free), len(free)), np.inf)
    if chi2 > 0 and np.isfinite(chi2):
        sub = sub * max(chi2, 1.0)
    cov[np.ix_(free, free)] = sub
    return G2Fit(model, cov, chi2, () if floor is not None else ("N_b",))
