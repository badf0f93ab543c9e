"""Stochastic rough-surface reflection model.

A surface is a set of N planar reflectors whose heights follow a Gaussian
distribution. On reflection each height h_i turns into a round-trip time
shift t_i = t0 + 2 h_i cos(theta) / c, and the reflected waveform is the
average of the N delayed copies scaled by a global factor S. Equivalently
the surface is a linear channel with transfer function
h(f) = (S/N) * sum_i exp(-2j pi f t_i).

Delays are applied exactly (not rounded to the sample grid) through the
frequency-domain shift theorem; sub-sample shifts are the whole point at
millimeter wavelengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import speed_of_light as C0

from .errors import GridMismatchError, InvalidInputError, RecordOverflowError
from .spectral import Waveform, _freeze

__all__ = [
    "SurfaceDistribution",
    "SurfaceRealization",
    "ChannelResponse",
    "sample_surface",
    "reflect_waveform",
    "transfer_function",
    "cascade",
    "save_delays",
    "load_delays",
    "TABLE1_DISTRIBUTIONS",
]


@dataclass(frozen=True)
class SurfaceDistribution:
    """Gaussian roughness parameters for one scattering surface.

    Attributes
    ----------
    mean_height : float
        Mean reflector height in meters.
    std_height : float
        Height standard deviation (roughness) in meters, >= 0.
    n_reflectors : int
        Number of reflectors in the set, >= 1.
    incidence_angle : float
        Angle from surface normal in radians, in [0, pi/2).
    scale : float
        Global amplitude factor S applied to the averaged reflection, > 0.
    base_delay : float
        Common delay t0 in seconds added to every reflector.
    """

    mean_height: float
    std_height: float
    n_reflectors: int = 100
    incidence_angle: float = 0.0
    scale: float = 1.0
    base_delay: float = 0.0

    def __post_init__(self):
        if not (self.std_height >= 0.0 and np.isfinite(self.std_height)):
            raise InvalidInputError("std_height must be >= 0")
        if self.n_reflectors < 1:
            raise InvalidInputError("n_reflectors must be >= 1")
        if not (0.0 <= self.incidence_angle < np.pi / 2):
            raise InvalidInputError("incidence_angle must lie in [0, pi/2)")
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise InvalidInputError("scale must be > 0")
        if not (np.isfinite(self.mean_height) and np.isfinite(self.base_delay)):
            raise InvalidInputError("mean_height and base_delay must be finite")


#: Roughness parameter pairs (mean, std) in meters for the four measured
#: sample areas used throughout the ensemble experiments.
TABLE1_DISTRIBUTIONS: dict[str, tuple[float, float]] = {
    "C1": (150e-6, 140e-6),
    "C2": (225e-6, 160e-6),
    "C3": (175e-6, 175e-6),
    "C4": (275e-6, 125e-6),
}


@dataclass(frozen=True)
class SurfaceRealization:
    """One concrete draw of reflector delays.

    Attributes
    ----------
    delays : ndarray
        N reflector delays t_i in seconds.
    scale : float
        Global amplitude factor S.
    seed : int
        Seed the draw was made with; recreating from the same distribution
        and seed reproduces the delays bit-exactly.
    """

    delays: np.ndarray
    scale: float
    seed: int

    def __post_init__(self):
        delays = _freeze(self.delays, np.float64)
        object.__setattr__(self, "delays", delays)
        if delays.ndim != 1 or delays.size < 1:
            raise InvalidInputError("delays must be a non-empty 1-D array")
        if not np.all(np.isfinite(delays)):
            raise InvalidInputError("delays must be finite")
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise InvalidInputError("scale must be > 0")

    @property
    def n(self) -> int:
        return self.delays.size

    def spread(self) -> float:
        """Delay spread max(t_i) - min(t_i) in seconds."""
        return float(self.delays.max() - self.delays.min())


@dataclass(frozen=True)
class ChannelResponse:
    """Channel transfer function sampled on a uniform frequency grid.

    Attributes
    ----------
    grid : ndarray
        Ascending uniform frequencies in Hz.
    h : ndarray
        Complex transfer values, one per grid point.
    provenance : tuple
        Seeds of the surface realizations that produced this response.
    """

    grid: np.ndarray
    h: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        grid = _freeze(self.grid, np.float64)
        h = _freeze(self.h, np.complex128)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if grid.ndim != 1 or grid.size < 1 or grid.shape != h.shape:
            raise InvalidInputError("grid and h must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(h))):
            raise InvalidInputError("grid and h must be finite")
        _check_uniform(grid)

    @property
    def df(self) -> float:
        if self.grid.size < 2:
            raise InvalidInputError("grid spacing undefined for a single bin")
        return float(self.grid[1] - self.grid[0])

    def magnitude(self) -> np.ndarray:
        return np.abs(self.h)


def _check_uniform(grid: np.ndarray) -> None:
    if grid.size < 2:
        return
    steps = np.diff(grid)
    step = steps[0]
    if step <= 0 or np.max(np.abs(steps - step)) > 1e-9 * abs(step):
        raise InvalidInputError("frequency grid must be uniform and ascending")


def sample_surface(dist: SurfaceDistribution, seed: int) -> SurfaceRealization:
    """Draw one surface realization.

    Heights are drawn i.i.d. from Gaussian(mean_height, std_height^2) and
    mapped to delays t_i = base_delay + 2 h_i cos(incidence_angle) / c.
    The draw is deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    heights = rng.normal(dist.mean_height, dist.std_height, dist.n_reflectors)
    delays = dist.base_delay + (2.0 * np.cos(dist.incidence_angle) / C0) * heights
    return SurfaceRealization(delays=delays, scale=dist.scale, seed=int(seed))


def reflect_waveform(a0: Waveform, r: SurfaceRealization) -> Waveform:
    """Reflect a waveform off a surface realization.

    Returns the average of the N delayed copies scaled by S, i.e. the
    time-domain samples of (S/N) * sum_i a0(t - t_i). Delays are exact
    (applied in the frequency domain), which makes the operation circular
    over the record; the delay spread must therefore fit in the record
    with at least 10% margin.
    """
    spread = r.spread()
    if spread > 0.9 * a0.duration:
        raise RecordOverflowError(
            f"delay spread {spread:.3e} s exceeds 90% of the record "
            f"({a0.duration:.3e} s); enlarge the record to avoid wraparound"
        )
    x = a0.samples
    if np.iscomplexobj(x):
        freqs = np.fft.fftfreq(a0.n, a0.dt)
        spec = np.fft.fft(x)
        out = np.fft.ifft(spec * _phasor_mean(freqs, r))
    else:
        freqs = np.fft.rfftfreq(a0.n, a0.dt)
        spec = np.fft.rfft(x)
        factors = _phasor_mean(freqs, r)
        if a0.n % 2 == 0:
            # fractional delays leave the Nyquist factor complex; keep the
            # real part so the reflected signal stays real
            factors[-1] = factors[-1].real
        out = np.fft.irfft(spec * factors, a0.n)
    return Waveform(samples=out, dt=a0.dt, t0=a0.t0)


def _phasor_mean(freqs: np.ndarray, r: SurfaceRealization, chunk: int = 65536) -> np.ndarray:
    """(S/N) * sum_i exp(-2j pi f t_i) evaluated in frequency chunks."""
    out = np.empty(freqs.shape, dtype=np.complex128)
    for start in range(0, freqs.size, chunk):
        f = freqs[start : start + chunk]
        out[start : start + chunk] = np.exp(
            -2j * np.pi * np.multiply.outer(f, r.delays)
        ).mean(axis=1)
    return r.scale * out


def transfer_function(r: SurfaceRealization, grid: np.ndarray) -> ChannelResponse:
    """Evaluate the surface's transfer function on a uniform grid.

    h(f) = (S/N) * sum_i exp(-2j pi f t_i). At f = 0 all phasors align, so
    h(0) = S exactly; the triangle inequality bounds |h| <= S everywhere.
    Consistent with :func:`reflect_waveform` through the DFT.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise InvalidInputError("grid must be a non-empty 1-D array")
    _check_uniform(grid)
    h = _phasor_mean(grid, r)
    return ChannelResponse(grid=grid, h=h, provenance=(r.seed,))


def cascade(responses) -> ChannelResponse:
    """Bin-wise product of channel responses sharing one grid.

    Models consecutive reflections: the compound channel is the product of
    the individual transfer functions. Provenance lists concatenate.
    """
    responses = list(responses)
    if not responses:
        raise InvalidInputError("cascade needs at least one response")
    first = responses[0]
    h = first.h.copy()
    provenance = list(first.provenance)
    for r in responses[1:]:
        if r.grid.shape != first.grid.shape or not np.array_equal(r.grid, first.grid):
            raise GridMismatchError("all responses must share one frequency grid")
        h *= r.h
        provenance.extend(r.provenance)
    return ChannelResponse(grid=first.grid, h=h, provenance=tuple(provenance))


def save_delays(path, r: SurfaceRealization) -> None:
    """Write a realization's delay list as one-column text."""
    np.savetxt(
        path,
        r.delays,
        fmt="%.17e",
        header=f"delay_s (scale={r.scale!r}, seed={r.seed})",
    )


def load_delays(path, scale: float = 1.0, seed: int = 0) -> SurfaceRealization:
    """Read a delay list written by :func:`save_delays`."""
    delays = np.atleast_1d(np.loadtxt(path))
    return SurfaceRealization(delays=delays, scale=scale, seed=seed)
