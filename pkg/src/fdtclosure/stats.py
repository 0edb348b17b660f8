"""Long-run statistics of sampled trajectories.

Correlations here are raw second moments (no mean subtraction): the
rescaled variables are centred near zero by construction, and the lag
statistics compared between models are

* ``acf(s) = <x_i(t) x_i(t+s)> / <x_i**2>``
* ``ccf(s) = <x_i(t) x_{i+1}(t+s)> / <x_i**2>``
* ``K(s) = <x_i**2(t) x_i**2(t+s)> / (<x_i**2>**2 + 2 <x_i(t) x_i(t+s)>**2)``

each estimated per index ``i`` and averaged over ``i``. The moment at lag
``s`` averages over the ``n - s`` admissible sample pairs.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionError, GridMismatchError, InsufficientSamplesError

PDF_EDGES = np.linspace(-5.0, 5.0, 201)
LAG_STEP = 0.05
LAG_MAX = 50.0


@dataclass
class PdfCurve:
    bin_edges: np.ndarray
    density: np.ndarray
    count: int = 0
    overflow: int = 0

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    def integral(self):
        return float(np.sum(self.density * self.widths))


@dataclass
class LagCurve:
    lags: np.ndarray
    values: np.ndarray

    @property
    def spacing(self):
        return float(self.lags[1] - self.lags[0]) if len(self.lags) > 1 else 0.0


@dataclass
class StatisticsSummary:
    pdf: PdfCurve
    acf: LagCurve
    ccf: LagCurve
    kcf: LagCurve
    mean: float
    variance: float
    meta: dict = field(default_factory=dict)

    def curves(self):
        return {"pdf": self.pdf, "acf": self.acf, "ccf": self.ccf, "kcf": self.kcf}

    def to_files(self, directory, prefix=""):
        """One CSV per curve (grid, value) plus a JSON sidecar."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, curve in self.curves().items():
            path = directory / f"{prefix}{name}.csv"
            if isinstance(curve, PdfCurve):
                header, grid, vals = "x,density", curve.centers, curve.density
            else:
                header, grid, vals = "s,value", curve.lags, curve.values
            _write_columns(path, header, [grid, vals])
            paths[name] = str(path)
        sidecar = {"mean": self.mean, "variance": self.variance,
                   "pdf_count": self.pdf.count, "pdf_overflow": self.pdf.overflow,
                   "meta": self.meta}
        text = json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
        (directory / f"{prefix}summary.json").write_text(text)
        return paths

    @classmethod
    def from_files(cls, directory, prefix=""):
        directory = Path(directory)
        side = json.loads((directory / f"{prefix}summary.json").read_text())
        pdf_raw = np.loadtxt(directory / f"{prefix}pdf.csv", delimiter=",", skiprows=1, ndmin=2)
        centers = pdf_raw[:, 0]
        half = 0.5 * (centers[1] - centers[0])
        edges = np.concatenate([centers - half, [centers[-1] + half]])
        pdf = PdfCurve(edges, pdf_raw[:, 1], side["pdf_count"], side["pdf_overflow"])
        lag = {}
        for name in ("acf", "ccf", "kcf"):
            raw = np.loadtxt(directory / f"{prefix}{name}.csv", delimiter=",", skiprows=1, ndmin=2)
            lag[name] = LagCurve(raw[:, 0], raw[:, 1])
        return cls(pdf, lag["acf"], lag["ccf"], lag["kcf"], side["mean"], side["variance"],
                   side.get("meta", {}))


def _write_columns(path, header, columns):
    data = np.column_stack(columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


class PdfAccumulator:
    """Streaming bin-count histogram on fixed edges.

    Samples outside ``[edges[0], edges[-1]]`` are tallied in ``overflow`` and
    left out of the normalization.
    """

    def __init__(self, bin_edges=PDF_EDGES):
        edges = np.asarray(bin_edges, dtype=np.float64)
        if edges.ndim != 1 or len(edges) < 2 or not np.all(np.diff(edges) > 0):
            raise ValueError("bin_edges must be strictly increasing")
        self.bin_edges = edges
        self.counts = np.zeros(len(edges) - 1, dtype=np.int64)
        self.overflow = 0

    def update(self, samples):
        s = np.asarray(samples, dtype=np.float64).ravel()
        inside = (s >= self.bin_edges[0]) & (s <= self.bin_edges[-1])
        self.overflow += int(s.size - inside.sum())
        c, _ = np.histogram(s[inside], bins=self.bin_edges)
        self.counts += c

    def finalize(self):
        total = int(self.counts.sum())
        if total == 0:
            raise InsufficientSamplesError("no samples fell inside the histogram range")
        density = self.counts / (total * np.diff(self.bin_edges))
        return PdfCurve(self.bin_edges.copy(), density, total, self.overflow)


def pdf_accumulate(samples, bin_edges=PDF_EDGES):
    """Normalized histogram of ``samples`` (an array or an iterable of arrays)."""
    acc = PdfAccumulator(bin_edges)
    if isinstance(samples, np.ndarray):
        if samples.size == 0:
            raise InsufficientSamplesError("empty sample stream")
        acc.update(samples)
    else:
        seen = False
        for block in samples:
            acc.update(block)
            seen = True
        if not seen:
            raise InsufficientSamplesError("empty sample stream")
    return acc.finalize()


class MomentAccumulator:
    """Running mean and (optionally) covariance of a vector signal."""

    def __init__(self, dim, covariance=True):
        self.dim = int(dim)
        self.covariance = covariance
        self.count = 0
        self.s1 = np.zeros(self.dim)
        self.s2 = np.zeros((self.dim, self.dim)) if covariance else np.zeros(self.dim)
        self._shift = None

    def update(self, samples):
        s = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if s.shape[1] != self.dim:
            raise DimensionError(f"expected samples of dimension {self.dim}")
        if self._shift is None:
            # accumulate around the first sample to limit cancellation
            self._shift = s[0].copy()
        d = s - self._shift
        self.count += s.shape[0]
        self.s1 += d.sum(axis=0)
        if self.covariance:
            self.s2 += d.T @ d
        else:
            self.s2 += (d * d).sum(axis=0)

    def finalize(self):
        if self.count < 2:
            raise InsufficientSamplesError("need at least two samples")
        m = self.s1 / self.count
        mean = self._shift + m
        if self.covariance:
            cov = self.s2 / self.count - np.outer(m, m)
            cov = 0.5 * (cov + cov.T)
        else:
            cov = self.s2 / self.count - m * m
        return mean, cov


def _lag_count(s_max, ds, sample_dt):
    ratio = ds / sample_dt
    step = int(round(ratio))
    if step < 1 or abs(ratio - step) > 1e-9 * max(1.0, ratio):
        raise GridMismatchError(f"sample spacing {sample_dt} does not divide lag step {ds}")
    nl = int(round(s_max / ds))
    if abs(nl * ds - s_max) > 1e-9 * s_max:
        raise GridMismatchError(f"lag step {ds} does not divide s_max {s_max}")
    return nl, step


def lag_grid(s_max=LAG_MAX, ds=LAG_STEP):
    nl = int(round(s_max / ds))
    return np.arange(nl + 1) * ds


def lag_moments(a, b, nlags, method="direct"):
    """``out[s, k] = mean_t a[t, k] b[t+s, k]`` over the ``n - s`` valid ``t``.

    ``method`` is ``"direct"`` (explicit sums) or ``"fft"``.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
        b = b[:, None]
    if a.shape != b.shape:
        raise GridMismatchError("signals must share the same time grid")
    n = a.shape[0]
    if n <= nlags:
        raise InsufficientSamplesError(f"{n} samples cannot resolve {nlags} lags")
    if method == "direct":
        sums = kernels.lag_sums(a, b, nlags)
    elif method == "fft":
        nfft = 1 << int(np.ceil(np.log2(2 * n)))
        fa = np.fft.rfft(a, nfft, axis=0)
        fb = np.fft.rfft(b, nfft, axis=0)
        sums = np.fft.irfft(np.conj(fa) * fb, nfft, axis=0)[: nlags + 1]
    else:
        raise ValueError(f"unknown method {method!r}")
    counts = (n - np.arange(nlags + 1))[:, None]
    return sums / counts


class LagAccumulator:
    """Streaming ``<a(t) b(t+s)>`` per column with a ring buffer of past ``a``."""

    def __init__(self, nlags, ncols):
        self.nlags = int(nlags)
        self.ring = np.zeros((self.nlags + 1, ncols))
        self.sums = np.zeros((self.nlags + 1, ncols))
        self.n = 0

    def update(self, a_sample, b_sample):
        pos = self.n % (self.nlags + 1)
        kernels.ring_update(self.ring, pos, self.n, np.asarray(a_sample, dtype=np.float64),
                            np.asarray(b_sample, dtype=np.float64), self.sums)
        self.n += 1

    def finalize(self):
        if self.n <= self.nlags:
            raise InsufficientSamplesError(f"{self.n} samples cannot resolve {self.nlags} lags")
        counts = (self.n - np.arange(self.nlags + 1))[:, None]
        return self.sums / counts


def _subsample(signal, step):
    signal = np.asarray(signal, dtype=np.float64)
    return signal[::step] if step > 1 else signal


def lag_correlation(a, b, sample_dt, s_max=LAG_MAX, ds=LAG_STEP, method="direct"):
    """Normalized lag correlation ``<a(t) b(t+s)> / <a**2>``.

    2-D inputs are treated column by column and the normalized curves are
    averaged over columns.
    """
    nl, step = _lag_count(s_max, ds, sample_dt)
    a = _subsample(a, step)
    b = _subsample(b, step)
    if a.shape[0] * ds < s_max:
        raise InsufficientSamplesError("averaging window shorter than s_max")
    cross = lag_moments(a, b, nl, method)
    if a is b or np.array_equal(a, b):
        var = cross[0]
    else:
        var = lag_moments(a, a, 0, "direct")[0]
    vals = (cross / var).mean(axis=1)
    return LagCurve(lag_grid(s_max, ds), vals)


def energy_autocorrelation(signal, acf, sample_dt, s_max=LAG_MAX, ds=LAG_STEP, method="direct"):
    """``K(s)`` with ``<x(t)x(t+s)>`` rebuilt as ``acf * <x**2>``.

    ``acf`` must come from the same signal on the same grid; for a 2-D
    signal pass the per-column normalized autocorrelations of shape
    ``(n_lags, n_cols)``, or a :class:`LagCurve` for a 1-D signal.
    """
    nl, step = _lag_count(s_max, ds, sample_dt)
    x = _subsample(signal, step)
    if x.ndim == 1:
        x = x[:, None]
    rho = acf.values if isinstance(acf, LagCurve) else np.asarray(acf)
    if rho.ndim == 1:
        rho = rho[:, None]
    if rho.shape[0] != nl + 1:
        raise GridMismatchError("acf grid does not match the requested lag grid")
    if isinstance(acf, LagCurve) and not np.allclose(acf.lags, lag_grid(s_max, ds)):
        raise GridMismatchError("acf lags do not match the requested lag grid")
    x2 = x * x
    var = x2.mean(axis=0)
    num = lag_moments(x2, x2, nl, method)
    kvals = num / (var ** 2 + 2.0 * (rho * var) ** 2)
    return LagCurve(lag_grid(s_max, ds), kvals.mean(axis=1))


def _per_column_acf(x, nl, method):
    raw = lag_moments(x, x, nl, method)
    return raw / raw[0]


def slow_statistics(samples, sample_dt, bin_edges=PDF_EDGES, s_max=LAG_MAX, ds=LAG_STEP,
                    method="direct"):
    """PDF, acf, ccf and K(s) of slow samples pooled over the index ``i``.

    Parameters
    ----------
    samples : ndarray, shape (n, N_x)
        Slow variables on a uniform time grid of spacing ``sample_dt``.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InsufficientSamplesError("slow_statistics needs a non-empty (n, N_x) array")
    nl, step = _lag_count(s_max, ds, sample_dt)
    pdf = pdf_accumulate(x, bin_edges)
    xs = np.ascontiguousarray(_subsample(x, step))
    if xs.shape[0] * ds < s_max:
        raise InsufficientSamplesError("averaging window shorter than s_max")
    rho = _per_column_acf(xs, nl, method)
    var = lag_moments(xs, xs, 0, method)[0]
    raw_cc = lag_moments(xs, np.ascontiguousarray(np.roll(xs, -1, axis=1)), nl, method)
    ccf = (raw_cc / var).mean(axis=1)
    x2 = xs * xs
    num = lag_moments(x2, x2, nl, method)
    kvals = (num / (var ** 2 + 2.0 * (rho * var) ** 2)).mean(axis=1)
    acf_vals = rho.mean(axis=1)
    grid = lag_grid(s_max, ds)
    return StatisticsSummary(pdf=pdf, acf=LagCurve(grid, acf_vals), ccf=LagCurve(grid, ccf),
                             kcf=LagCurve(grid, kvals), mean=float(x.mean()),
                             variance=float(x.var()),
                             meta={"n_samples": int(x.shape[0]), "n_index": int(x.shape[1]),
                                   "sample_dt": float(sample_dt)})


class SlowStatisticsAccumulator:
    """Streaming counterpart of :func:`slow_statistics` for use as an observer.

    Feed ``update(x)`` with every sample on a grid of spacing ``sample_dt``;
    only every ``ds / sample_dt``-th sample enters the lag statistics.
    """

    def __init__(self, n_index, sample_dt, bin_edges=PDF_EDGES, s_max=LAG_MAX, ds=LAG_STEP):
        self.nl, self.step = _lag_count(s_max, ds, sample_dt)
        self.sample_dt = sample_dt
        self.s_max, self.ds = s_max, ds
        self.pdf = PdfAccumulator(bin_edges)
        self.auto = LagAccumulator(self.nl, n_index)
        self.cross = LagAccumulator(self.nl, n_index)
        self.energy = LagAccumulator(self.nl, n_index)
        self.moments = MomentAccumulator(1, covariance=False)
        self._k = 0
        self._pdf_buf = []

    def update(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._pdf_buf.append(x.copy())
        if len(self._pdf_buf) >= 4096:
            self._flush()
        if self._k % self.step == 0:
            self.auto.update(x, x)
            self.cross.update(x, np.roll(x, -1))
            x2 = x * x
            self.energy.update(x2, x2)
        self._k += 1

    def _flush(self):
        if self._pdf_buf:
            blk = np.vstack(self._pdf_buf)
            self.pdf.update(blk)
            self.moments.update(blk.reshape(-1, 1))
            self._pdf_buf = []

    def finalize(self):
        self._flush()
        raw = self.auto.finalize()
        var = raw[0]
        rho = raw / var
        ccf = (self.cross.finalize() / var).mean(axis=1)
        kvals = (self.energy.finalize() / (var ** 2 + 2.0 * (rho * var) ** 2)).mean(axis=1)
        mean, variance = self.moments.finalize()
        grid = lag_grid(self.s_max, self.ds)
        return StatisticsSummary(pdf=self.pdf.finalize(), acf=LagCurve(grid, rho.mean(axis=1)),
                                 ccf=LagCurve(grid, ccf), kcf=LagCurve(grid, kvals),
                                 mean=float(mean[0]), variance=float(variance[0]),
                                 meta={"n_samples": self._k, "n_index": int(var.shape[0]),
                                       "sample_dt": float(self.sample_dt)})


def _same_grid(ga, gb):
    return ga.shape == gb.shape and np.allclose(ga, gb, rtol=0, atol=1e-12)


def l2_distance(curve_a, curve_b):
    """L2 distance between two curves on the same grid.

    PDFs are weighted by bin width; lag curves use trapezoid weights (half
    weight on the two end points).
    """
    if isinstance(curve_a, PdfCurve) and isinstance(curve_b, PdfCurve):
        if not _same_grid(curve_a.bin_edges, curve_b.bin_edges):
            raise GridMismatchError("PDF bin edges differ")
        w = curve_a.widths
        diff = curve_a.density - curve_b.density
    elif isinstance(curve_a, LagCurve) and isinstance(curve_b, LagCurve):
        if not _same_grid(curve_a.lags, curve_b.lags):
            raise GridMismatchError("lag grids differ")
        w = trapezoid_weights(curve_a.lags)
        diff = curve_a.values - curve_b.values
    else:
        raise GridMismatchError("curves must be of the same kind")
    return float(np.sqrt(np.sum(diff * diff * w)))


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) < 2:
        return np.zeros_like(grid)
    w = np.empty_like(grid)
    h = np.diff(grid)
    w[0] = 0.5 * h[0]
    w[-1] = 0.5 * h[-1]
    w[1:-1] = 0.5 * (h[:-1] + h[1:])
    return w


def lag_integral(curve):
    """Trapezoid integral of a lag curve over its grid."""
    return float(np.sum(curve.values * trapezoid_weights(curve.lags)))


def moving_average(values, width=5):
    values = np.asarray(values, dtype=np.float64)
    if width <= 1:
        return values.copy()
    # centred window, shortened at the ends instead of zero-padded
    kernel = np.ones(width)
    sums = np.convolve(values, kernel, mode="same")
    counts = np.convolve(np.ones_like(values), kernel, mode="same")
    return sums / counts


def count_local_maxima(values, smooth=5, rel_height=0.0):
    """Number of strict interior local maxima after moving-average smoothing.

    Plateaus count once. Maxima lower than ``rel_height * max`` are ignored.
    """
    v = moving_average(values, smooth)
    # collapse plateaus
    keep = np.concatenate([[True], np.diff(v) != 0])
    v = v[keep]
    if len(v) < 3:
        return 0
    peaks = (v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])
    heights = v[1:-1][peaks]
    return int(np.sum(heights >= rel_height * v.max()))
