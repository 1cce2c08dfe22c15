"""Edge-preserving filter pipeline for 1-D aggregate power signals.

Stages run in a fixed order::

    median -> bilateral -> anisotropic diffusion -> domain transform -> sharpen

The goal is a signal whose steady states are flat and whose switching edges
are single-sample steps, so the event detector sees one clean delta per
appliance transition.  Every stage accepts either a raw array or a
:class:`~loadtrack.signal_io.PowerTrace` and returns the same kind.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import asdict, dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .signal_io import PowerTrace

STAGES = ("median", "bilateral", "anisotropic", "domain_transform", "sharpen")


class FilterError(ValueError):
    pass


class WindowTooLarge(FilterError):
    pass


class EvenWindow(FilterError):
    pass


class InvalidSigma(FilterError):
    pass


class InvalidLambda(FilterError):
    pass


@dataclass
class FilterConfig:
    median_window: int = 5
    bilateral_sigma_spatial: float = 3.0
    bilateral_sigma_range: float = 20.0
    bilateral_window: int = 15
    aniso_kappa: float = 20.0
    aniso_lambda: float = 0.1
    aniso_iters: int = 20
    dt_sigma_spatial: float = 60.0
    dt_sigma_range: float = 20.0
    dt_iters: int = 3
    sharpen_slope_min: float = 20.0
    sharpen_max_ramp: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise EvenWindow("median_window must be odd and >= 3")
        for name in ("bilateral_sigma_spatial", "bilateral_sigma_range", "aniso_kappa",
                     "dt_sigma_spatial", "dt_sigma_range", "sharpen_slope_min"):
            if not getattr(self, name) > 0:
                raise InvalidSigma(f"{name} must be positive")
        if not 0 < self.aniso_lambda <= 0.25:
            raise InvalidLambda("aniso_lambda must lie in (0, 0.25]")
        for name in ("aniso_iters", "dt_iters", "bilateral_window", "sharpen_max_ramp"):
            if getattr(self, name) < 1:
                raise FilterError(f"{name} must be >= 1")

    @classmethod
    def from_mapping(cls, values) -> "FilterConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                continue
            kwargs[key] = int(raw) if known[key] == "int" else float(raw)
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return asdict(self)


def _trace_aware(func):
    """Let an array filter accept and return PowerTrace objects too."""

    @functools.wraps(func)
    def wrapper(signal, *args, **kwargs):
        if isinstance(signal, PowerTrace):
            out = func(signal.samples, *args, **kwargs)
            # Convex combinations can dip a hair below zero in float arithmetic.
            return signal.replace(np.maximum(out, 0.0))
        return func(np.asarray(signal, dtype=float), *args, **kwargs)

    return wrapper


@_trace_aware
def median_filter(x, window):
    """Centered running median; the window shrinks symmetrically at the edges."""
    n = x.size
    if window % 2 == 0:
        raise EvenWindow(f"median window must be odd, got {window}")
    if window > n:
        raise WindowTooLarge(f"window {window} exceeds signal length {n}")
    half = window // 2
    out = np.empty(n)
    if n >= window:
        out[half:n - half] = np.median(sliding_window_view(x, window), axis=1)
    for i in list(range(half)) + list(range(n - half, n)):
        h = min(half, i, n - 1 - i)
        out[i] = np.median(x[i - h:i + h + 1])
    return out


@_trace_aware
def bilateral_filter(x, sigma_spatial, sigma_range, window=15):
    """Bilateral smoothing over a ``window``-sample neighbourhood.

    Weights are the product of a spatial Gaussian on the sample offset and a
    range Gaussian on the power difference, so levels separated by many
    ``sigma_range`` barely mix.  Boundaries are mirrored.
    """
    if not (sigma_spatial > 0 and sigma_range > 0):
        raise InvalidSigma("bilateral sigmas must be positive")
    half = max(int(window) // 2, 1)
    padded = np.pad(x, half, mode="symmetric")
    win = sliding_window_view(padded, 2 * half + 1)
    offsets = np.arange(-half, half + 1)
    spatial = np.exp(-(offsets ** 2) / (2.0 * sigma_spatial ** 2))
    rng = np.exp(-((win - x[:, None]) ** 2) / (2.0 * sigma_range ** 2))
    w = spatial[None, :] * rng
    return (w * win).sum(axis=1) / w.sum(axis=1)


@_trace_aware
def anisotropic_diffusion(x, kappa, lam, iters):
    """Explicit Perona-Malik diffusion with conduction exp(-(d/kappa)^2).

    Zero-flux (reflective) ends make the scheme conserve the sample sum.
    """
    if not 0 < lam <= 0.25:
        raise InvalidLambda("lambda must lie in (0, 0.25]")
    if not kappa > 0:
        raise InvalidSigma("kappa must be positive")
    x = x.copy()
    for _ in range(int(iters)):
        grad = np.diff(x)
        flux = np.exp(-((grad / kappa) ** 2)) * grad
        x[:-1] += lam * flux
        x[1:] -= lam * flux
    return x


@_trace_aware
def domain_transform_filter(x, sigma_spatial, sigma_range, iters=3):
    """Recursive edge-aware smoothing in the transformed (geodesic) domain."""
    if not (sigma_spatial > 0 and sigma_range > 0):
        raise InvalidSigma("domain transform sigmas must be positive")
    if iters < 1:
        raise FilterError("iters must be >= 1")
    n = x.size
    if n < 2:
        return x.copy()
    dist = 1.0 + (sigma_spatial / sigma_range) * np.abs(np.diff(x))
    out = x.astype(float).tolist()
    norm = math.sqrt(4.0 ** iters - 1.0)
    for k in range(iters):
        sigma_h = sigma_spatial * math.sqrt(3.0) * 2.0 ** (iters - k - 1) / norm
        a = math.exp(-math.sqrt(2.0) / sigma_h)
        coef = np.power(a, dist).tolist()
        for i in range(1, n):
            out[i] += coef[i - 1] * (out[i - 1] - out[i])
        for i in range(n - 2, -1, -1):
            out[i] += coef[i] * (out[i + 1] - out[i])
    return np.array(out)


@_trace_aware
def edge_sharpen(x, slope_min, max_ramp):
    """Collapse short monotone ramps into single-sample steps.

    A ramp is a maximal run of at least two consecutive same-sign deltas,
    each at least ``slope_min`` in magnitude, spanning at most ``max_ramp``
    deltas.  Interior samples are snapped to the ramp's start or end level,
    with the step placed where the ramp's sample sum is best preserved.
    """
    if not slope_min > 0:
        raise InvalidSigma("slope_min must be positive")
    out = x.copy()
    d = np.diff(x)
    sign = np.where(d >= slope_min, 1, np.where(d <= -slope_min, -1, 0))
    i = 0
    m = d.size
    while i < m:
        if sign[i] == 0:
            i += 1
            continue
        j = i
        while j + 1 < m and sign[j + 1] == sign[i]:
            j += 1
        run = j - i + 1
        if 2 <= run <= max_ramp:
            # deltas i..j move sample i -> sample j+1; samples i+1..j are interior
            lo, hi = x[i], x[j + 1]
            interior = x[i + 1:j + 1]
            target = interior.sum()
            k_count = interior.size
            # number of interior samples already at the new level
            best = min(range(k_count + 1),
                       key=lambda k: abs((k_count - k) * lo + k * hi - target))
            out[i + 1:j + 1 - best] = lo
            out[j + 1 - best:j + 1] = hi
        i = j + 1
    return out


def run_pipeline(signal, config: FilterConfig | None = None, skip=(), timings=None):
    """Apply the five stages in order; ``skip`` names stages to bypass.

    When ``timings`` is a dict it receives wall-clock seconds per stage.
    """
    config = config or FilterConfig()
    unknown = set(skip) - set(STAGES)
    if unknown:
        raise FilterError(f"unknown stage(s): {sorted(unknown)}")
    stages = {
        "median": lambda s: median_filter(s, config.median_window),
        "bilateral": lambda s: bilateral_filter(
            s, config.bilateral_sigma_spatial, config.bilateral_sigma_range, config.bilateral_window),
        "anisotropic": lambda s: anisotropic_diffusion(
            s, config.aniso_kappa, config.aniso_lambda, config.aniso_iters),
        "domain_transform": lambda s: domain_transform_filter(
            s, config.dt_sigma_spatial, config.dt_sigma_range, config.dt_iters),
        "sharpen": lambda s: edge_sharpen(s, config.sharpen_slope_min, config.sharpen_max_ramp),
    }
    out = signal
    for name in STAGES:
        t0 = time.perf_counter()
        if name not in skip:
            out = stages[name](out)
        if timings is not None:
            timings[name] = time.perf_counter() - t0
    return out


def read_config(path) -> FilterConfig:
    """Parse a flat ``key = value`` file; unknown keys are ignored."""
    return FilterConfig.from_mapping(read_flat_config(path))


def read_flat_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FilterError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def write_config(config: FilterConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in config.to_mapping().items():
            fh.write(f"{key} = {value}\n")
