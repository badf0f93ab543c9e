"""Time/frequency signal containers, transforms, and reference pulse synthesis.

Conventions
-----------
A :class:`Waveform` is a uniformly sampled time-domain signal; a
:class:`Spectrum` is its discrete Fourier transform with the physicist's
scaling ``X(f_k) = dt * sum_m x_m exp(-2j pi f_k m dt)``, so that the
time-domain energy ``sum |x|^2 dt`` equals the frequency-domain energy
``sum |X|^2 df`` (Parseval). The spectrum's phase is referenced to the
first sample of the record; the record start time ``t0`` is carried as
metadata and does not enter the transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PhaseUndefinedError

__all__ = [
    "Waveform",
    "Spectrum",
    "dft",
    "idft",
    "unwrap_phase",
    "synth_reference_pulse",
    "save_waveform",
    "load_waveform",
    "save_spectrum",
    "load_spectrum",
]


def _freeze(a, dtype=None) -> np.ndarray:
    """Copy to an owned, read-only array so values stay immutable."""
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled time-domain signal.

    Attributes
    ----------
    samples : ndarray
        Real or complex amplitudes (arbitrary units).
    dt : float
        Sample interval in seconds, > 0.
    t0 : float
        Time of the first sample in seconds.
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples)
        dtype = np.complex128 if samples.dtype.kind == "c" else np.float64
        samples = _freeze(samples, dtype)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidInputError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("samples must be finite")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidInputError("dt must be positive and finite")
        if not np.isfinite(self.t0):
            raise InvalidInputError("t0 must be finite")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Record length n*dt in seconds."""
        return self.n * self.dt

    def times(self) -> np.ndarray:
        """Sample times t0 + k*dt."""
        return self.t0 + self.dt * np.arange(self.n)

    def energy(self) -> float:
        """Signal energy sum(|a|^2) * dt."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.dt)


@dataclass(frozen=True)
class Spectrum:
    """Complex amplitudes on a uniform frequency grid.

    Attributes
    ----------
    values : ndarray
        Complex spectral amplitudes.
    df : float
        Frequency step in Hz, > 0.
    f0 : float
        Frequency of the first bin in Hz.
    """

    values: np.ndarray
    df: float
    f0: float = 0.0

    def __post_init__(self):
        values = _freeze(self.values, np.complex128)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInputError("values must be a non-empty 1-D array")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("values must be finite")
        if not (self.df > 0 and np.isfinite(self.df)):
            raise InvalidInputError("df must be positive and finite")
        if not np.isfinite(self.f0):
            raise InvalidInputError("f0 must be finite")

    @property
    def n(self) -> int:
        return self.values.size

    def frequencies(self) -> np.ndarray:
        """Bin frequencies f0 + k*df.

        For a full-length transform of a real waveform the upper half of
        this grid represents negative frequencies in the usual DFT wrap.
        """
        return self.f0 + self.df * np.arange(self.n)

    def energy(self) -> float:
        """Spectral energy sum(|X|^2) * df."""
        return float(np.sum(np.abs(self.values) ** 2) * self.df)

    def one_sided(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies and values from DC up to Nyquist (inclusive).

        Only meaningful for spectra with f0 = 0 produced by :func:`dft`.
        """
        half = self.n // 2 + 1
        return self.frequencies()[:half], self.values[:half]


def dft(w: Waveform) -> Spectrum:
    """Forward discrete Fourier transform of a waveform.

    Returns a full-length spectrum with ``df = 1/(n*dt)`` and ``f0 = 0``;
    bin k holds ``dt * sum_m x_m exp(-2j pi k m / n)``. Energy is preserved
    (``w.energy() == dft(w).energy()`` up to rounding). The phase is
    referenced to the record start, not to absolute time ``t0``.
    """
    if not isinstance(w, Waveform):
        raise InvalidInputError("dft expects a Waveform")
    values = np.fft.fft(w.samples) * w.dt
    return Spectrum(values=values, df=1.0 / (w.n * w.dt), f0=0.0)


def idft(s: Spectrum, t0: float = 0.0) -> Waveform:
    """Inverse transform; exact inverse of :func:`dft`.

    The returned waveform has ``dt = 1/(n*df)`` and the given start time
    ``t0`` (metadata only). Requires ``f0 = 0``.
    """
    if not isinstance(s, Spectrum):
        raise InvalidInputError("idft expects a Spectrum")
    if s.f0 != 0.0:
        raise InvalidInputError("idft requires a spectrum starting at DC (f0 = 0)")
    dt = 1.0 / (s.n * s.df)
    samples = np.fft.ifft(s.values) / dt
    return Waveform(samples=samples, dt=dt, t0=t0)


def unwrap_phase(s: Spectrum, band: tuple[float, float] | None = None) -> np.ndarray:
    """Continuous spectral phase over the requested band.

    Adjacent-bin differences of the result lie in (-pi, pi]; the first
    in-band bin keeps its principal value. Bins whose magnitude is exactly
    zero have no defined phase and raise :class:`PhaseUndefinedError`
    naming the bin; callers that need to tolerate nulls should mask them
    first (the dispersion module owns that policy).

    Parameters
    ----------
    s : Spectrum
    band : (f_lo, f_hi), optional
        Inclusive frequency range on the stored grid; default is the full
        grid.
    """
    freqs = s.frequencies()
    if band is not None:
        lo, hi = band
        sel = (freqs >= lo) & (freqs <= hi)
        if not np.any(sel):
            raise InvalidInputError("band selects no bins")
        idx = np.flatnonzero(sel)
    else:
        idx = np.arange(s.n)
    vals = s.values[idx]
    zero = np.flatnonzero(np.abs(vals) == 0.0)
    if zero.size:
        k = int(zero[0])
        raise PhaseUndefinedError(k, freqs[idx[k]])
    return np.unwrap(np.angle(vals))


def synth_reference_pulse(
    bandwidth_lo: float = 60e9,
    bandwidth_hi: float = 2.5e12,
    n: int = 8192,
    dt: float = 50e-15,
) -> Waveform:
    """Synthesize a broadband single-cycle pulse with a controlled band.

    The magnitude spectrum rises fourth-order below ``bandwidth_lo``,
    decays sixth-order above ``bandwidth_hi``, and carries a gentle
    exponential tilt that places the spectral peak in the low-hundreds of
    GHz, emulating the band occupancy of a time-domain spectrometer's
    mirror reflection. The pulse is real, centered at one quarter of the
    record (leaving room for reflection delays), and normalized to unit
    energy ``sum |a|^2 dt = 1``.
    """
    if not (0 < bandwidth_lo < bandwidth_hi):
        raise InvalidInputError("need 0 < bandwidth_lo < bandwidth_hi")
    nyquist = 0.5 / dt
    if bandwidth_hi >= nyquist:
        raise InvalidInputError(
            f"bandwidth_hi {bandwidth_hi:.3g} Hz must lie below Nyquist {nyquist:.3g} Hz"
        )
    if n < 16:
        raise InvalidInputError("n must be at least 16")
    f = np.fft.rfftfreq(n, dt)
    lo2 = bandwidth_lo**2
    highpass = f**4 / (lo2 + f**2) ** 2
    lowpass = 1.0 / (1.0 + (f / bandwidth_hi) ** 6)
    tilt = np.exp(-f / (0.8 * bandwidth_hi))
    mag = highpass * lowpass * tilt
    t_center = 0.25 * n * dt
    spec = mag * np.exp(-2j * np.pi * f * t_center)
    a = np.fft.irfft(spec, n)
    a = a / np.sqrt(np.sum(a**2) * dt)
    return Waveform(samples=a, dt=dt, t0=0.0)


_WAVEFORM_HEADER = "time_s\tamplitude_arb"
_SPECTRUM_HEADER = "freq_hz\tre_arb\tim_arb"


def save_waveform(path, w: Waveform) -> None:
    """Write a real waveform as two-column text: time_s, amplitude."""
    if np.iscomplexobj(w.samples) and np.any(w.samples.imag != 0.0):
        raise InvalidInputError("two-column waveform format holds real signals only")
    data = np.column_stack([w.times(), np.real(w.samples)])
    np.savetxt(path, data, fmt="%.17e", delimiter="\t", header=_WAVEFORM_HEADER)


def load_waveform(path) -> Waveform:
    """Read a two-column waveform written by :func:`save_waveform`."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InvalidInputError("expected two columns (time_s, amplitude) and >= 2 rows")
    t = data[:, 0]
    steps = np.diff(t)
    dt = steps[0]
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise InvalidInputError("time column must be uniformly increasing")
    return Waveform(samples=data[:, 1], dt=float(dt), t0=float(t[0]))


def save_spectrum(path, s: Spectrum) -> None:
    """Write a spectrum as three-column text: freq_hz, re, im."""
    data = np.column_stack([s.frequencies(), s.values.real, s.values.imag])
    np.savetxt(path, data, fmt="%.17e", delimiter="\t", header=_SPECTRUM_HEADER)


def load_spectrum(path) -> Spectrum:
    """Read a three-column spectrum written by :func:`save_spectrum`."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 3 or data.shape[0] < 2:
        raise InvalidInputError("expected three columns (freq_hz, re, im) and >= 2 rows")
    f = data[:, 0]
    steps = np.diff(f)
    df = steps[0]
    if df <= 0 or not np.allclose(steps, df, rtol=1e-9, atol=0.0):
        raise InvalidInputError("frequency column must be uniformly increasing")
    return Spectrum(values=data[:, 1] + 1j * data[:, 2], df=float(df), f0=float(f[0]))
