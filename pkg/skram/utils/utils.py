import csv
import hashlib
import inspect
import json
import os

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import bootstrap


def whichFunc():
    """Return the name of the current executing function.

        Returns
        -------
        str:
            the current function on the execution stack.
    """
    return inspect.stack()[1][3]


def configHash(config):
    """Hash of a JSON serializable configuration.

        Parameters
        ----------
        config: dict

        Returns
        -------
        str:
            hexadecimal sha256 digest of the canonical JSON dump.
    """
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def gaussLegendre(a, b, n):
    """Gauss-Legendre nodes and weights on [a, b].

        Parameters
        ----------
        a, b: float
            interval bounds.
        n: int
            number of nodes.

        Returns
        -------
        (np.ndarray, np.ndarray):
            nodes and weights.
    """
    x, w = leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def compositeGaussLegendre(func, a, b, rtol=1e-10, order=16, panels=1, maxPanels=8192):
    """Adaptive composite Gauss-Legendre quadrature of a vector valued integrand.

        The number of panels is doubled until two successive estimates agree to ``rtol``
        relative to the largest entry of the estimate.

        Parameters
        ----------
        func: callable
            maps an array of S nodes to an array of shape (S, ...).
        a, b: float
            integration bounds.
        rtol: float
            relative tolerance.

        Returns
        -------
        np.ndarray:
            the integral, of shape ``func(x).shape[1:]``.
    """
    xRef, wRef = leggauss(order)

    def estimate(m):
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(edges)
        nodes = (edges[:-1, None] + half[:, None] * (xRef[None, :] + 1.0)).ravel()
        weights = (half[:, None] * wRef[None, :]).ravel()
        values = np.asarray(func(nodes))
        return np.tensordot(weights, values, axes=(0, 0))

    if b == a:
        return 0.0 * estimate(1)
    current = estimate(panels)
    m = panels
    while m < maxPanels:
        m *= 2
        refined = estimate(m)
        scale = max(np.max(np.abs(refined)), np.finfo(float).tiny)
        if np.max(np.abs(refined - current)) <= rtol * scale:
            return refined
        current = refined
    return current


def bootstrapInterval(samples, statistic=np.mean, resamples=200, seed=0, level=0.95):
    """Percentile bootstrap confidence interval.

        Parameters
        ----------
        samples: np.ndarray
            one dimensional array of observations; NaN entries are dropped.
        statistic: callable
            reduces a one dimensional array to a scalar; an ``axis`` keyword makes the resampling vectorized.
        resamples: int
            number of bootstrap resamples.
        seed: int
            seed of the resampling generator.

        Returns
        -------
        (float, float):
            lower and upper bound, NaN if no finite sample is left and the statistic itself for one sample.
    """
    values = np.asarray(samples, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return float("nan"), float("nan")
    if values.size == 1:
        value = float(statistic(values))
        return value, value
    result = bootstrap((values,), statistic, n_resamples=resamples, confidence_level=level, method="percentile",
                       random_state=np.random.default_rng(seed))
    return float(result.confidence_interval.low), float(result.confidence_interval.high)


def integratedAutocorrTime(series, window=5.0):
    """Integrated autocorrelation time with Sokal's automatic window.

        Parameters
        ----------
        series: np.ndarray
            shape (n,) or (n, m); columns are independent chains of one observable.

        Returns
        -------
        float:
            the autocorrelation time in units of the sampling interval, at least 1.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    x = x - x.mean(axis=0)
    var = np.mean(x ** 2)
    if n < 4 or var <= 0.0:
        return 1.0
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(x, n=size, axis=0)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), n=size, axis=0)[:n]
    acf = acf.mean(axis=1)
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    lags = np.arange(n)
    cut = lags >= window * taus
    m = int(np.argmax(cut)) if np.any(cut) else n - 1
    return float(max(taus[m], 1.0))


def batchMeansError(series, batches=20):
    """Standard error of the mean of a correlated series by non overlapping batch means.

        Parameters
        ----------
        series: np.ndarray
            shape (n,) or (n, m); the error is computed per column.

        Returns
        -------
        np.ndarray or float:
            standard error per column.
    """
    x = np.asarray(series, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n = x.shape[0]
    batches = max(2, min(batches, n))
    size = n // batches
    means = x[:size * batches].reshape(batches, size, *x.shape[1:]).mean(axis=1)
    err = means.std(axis=0, ddof=1) / np.sqrt(batches)
    return float(err[0]) if squeeze else err


def formatValue(value):
    """Render a cell for CSV output with full float precision."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def writeCsv(path, header, rows):
    """Write a numeric table.

        Parameters
        ----------
        path: str
            target file.
        header: list[str]
            column names.
        rows: list[list]
            table rows.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(header)
        for row in rows:
            writer.writerow([formatValue(v) for v in row])


def toJsonable(obj):
    """Convert numpy values nested in dictionaries and lists to plain python values."""
    if isinstance(obj, dict):
        return {str(k): toJsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [toJsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return toJsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    return obj


def writeJson(path, obj):
    """Write a JSON record with sorted keys."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as stream:
        json.dump(toJsonable(obj), stream, indent=2, sort_keys=True)
