"""Group delay, group delay dispersion, and interference-null analysis.

Group delay is gd = -d(phi)/d(omega) so that a causal pure delay t0 comes
out as gd = +t0; group delay dispersion is the raw phase curvature
gdd = d^2(phi)/d(omega)^2 in s^2 (equivalently ps^2/rad when scaled).
Both are computed by finite differences on the unwrapped spectral phase.

Phase is numerically meaningless at deep interference nulls, so bins whose
magnitude falls below 1e-3 of the in-band median are masked (with a
two-bin guard on each side) before differentiation. Masked bins keep
their computed values but are flagged; consumers must honor the mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import find_peaks

from .errors import InvalidInputError
from .spectral import Spectrum, _freeze
from .surface import ChannelResponse

__all__ = [
    "DispersionProfile",
    "Null",
    "group_delay",
    "group_delay_dispersion",
    "find_nulls",
    "save_profile",
    "NULL_MASK_RATIO",
    "NULL_GUARD_BINS",
]

NULL_MASK_RATIO = 1e-3
NULL_GUARD_BINS = 2


@dataclass(frozen=True)
class DispersionProfile:
    """Per-bin group delay and dispersion with a validity mask.

    Attributes
    ----------
    grid : ndarray
        Frequencies in Hz.
    gd : ndarray
        Group delay in seconds per bin.
    gdd : ndarray or None
        Group delay dispersion in s^2 per bin; None when only the group
        delay was requested.
    mask : ndarray of bool
        True marks bins inside the null-exclusion zone; gd/gdd there are
        not trustworthy.
    """

    grid: np.ndarray
    gd: np.ndarray
    gdd: np.ndarray | None
    mask: np.ndarray

    def __post_init__(self):
        grid = _freeze(self.grid, np.float64)
        gd = _freeze(self.gd, np.float64)
        mask = _freeze(self.mask, np.bool_)
        gdd = None if self.gdd is None else _freeze(self.gdd, np.float64)
        for name, arr in (("grid", grid), ("gd", gd), ("mask", mask)):
            if arr.shape != grid.shape:
                raise InvalidInputError(f"{name} shape mismatch")
        if gdd is not None and gdd.shape != grid.shape:
            raise InvalidInputError("gdd shape mismatch")
        if not np.all(np.isfinite(gd[~mask])):
            raise InvalidInputError("gd must be finite at unmasked bins")
        if gdd is not None and not np.all(np.isfinite(gdd[~mask])):
            raise InvalidInputError("gdd must be finite at unmasked bins")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "gd", gd)
        object.__setattr__(self, "gdd", gdd)
        object.__setattr__(self, "mask", mask)

    @property
    def n(self) -> int:
        return self.grid.size


class Null(NamedTuple):
    """One interference null: center frequency, depth below the in-band
    median in dB (positive), and width at 3 dB above the minimum."""

    center_hz: float
    depth_db: float
    width_hz: float


def _extract_grid_values(obj, band):
    if isinstance(obj, ChannelResponse):
        freqs, values = obj.grid, obj.h
    elif isinstance(obj, Spectrum):
        freqs, values = obj.frequencies(), obj.values
    else:
        raise InvalidInputError("expected a Spectrum or ChannelResponse")
    if band is not None:
        lo, hi = band
        sel = (freqs >= lo) & (freqs <= hi)
        if not np.any(sel):
            raise InvalidInputError("band selects no bins")
        freqs, values = freqs[sel], values[sel]
    return np.asarray(freqs, dtype=float), np.asarray(values)


def _null_mask(mag: np.ndarray) -> np.ndarray:
    """Mask bins below NULL_MASK_RATIO of the in-band median, dilated by
    NULL_GUARD_BINS on each side."""
    med = np.median(mag)
    below = mag < NULL_MASK_RATIO * med
    if not np.any(below):
        return below
    mask = below.copy()
    for k in range(1, NULL_GUARD_BINS + 1):
        mask[k:] |= below[:-k]
        mask[:-k] |= below[k:]
    return mask


def _phase_derivatives(h: ChannelResponse, band, want_gdd: bool) -> DispersionProfile:
    freqs, values = _extract_grid_values(h, band)
    if freqs.size < 3:
        raise InvalidInputError("need at least 3 bins to differentiate the phase")
    mask = _null_mask(np.abs(values))
    phase = np.unwrap(np.angle(values))
    omega = 2.0 * np.pi * freqs
    gd = -np.gradient(phase, omega)
    gdd = None
    if want_gdd:
        dw = omega[1] - omega[0]
        gdd = np.empty_like(phase)
        gdd[1:-1] = (phase[2:] - 2.0 * phase[1:-1] + phase[:-2]) / dw**2
        gdd[0] = gdd[1]
        gdd[-1] = gdd[-2]
    return DispersionProfile(grid=freqs, gd=gd, gdd=gdd, mask=mask)


def group_delay(h: ChannelResponse, band: tuple[float, float] | None = None) -> DispersionProfile:
    """Group delay profile of a channel response.

    Central differences on the unwrapped phase; one-sided at the ends.
    Bins in the null-exclusion zone come back masked, never as silent
    values.
    """
    return _phase_derivatives(h, band, want_gdd=False)


def group_delay_dispersion(
    h: ChannelResponse, band: tuple[float, float] | None = None
) -> DispersionProfile:
    """Group delay and dispersion profile of a channel response.

    The dispersion is the second central difference of the unwrapped
    phase over angular frequency; for a pure delay it vanishes to
    discretization tolerance. Endpoint bins copy their neighbors.
    """
    return _phase_derivatives(h, band, want_gdd=True)


def find_nulls(obj, floor_db: float = 10.0, band: tuple[float, float] | None = None) -> list[Null]:
    """Locate interference nulls in a magnitude spectrum.

    A null is a local minimum whose magnitude lies more than ``floor_db``
    below the in-band median. Width is measured where the magnitude rises
    3 dB above the minimum, linearly interpolated between bins.

    Parameters
    ----------
    obj : Spectrum or ChannelResponse
    floor_db : float
        Required depth below the median, in positive dB.
    band : (f_lo, f_hi), optional
        Restrict the search; pass the one-sided band for full spectra of
        real waveforms.
    """
    freqs, values = _extract_grid_values(obj, band)
    mag = np.abs(values)
    if not np.any(mag > 0):
        raise InvalidInputError("magnitude is zero everywhere in the band")
    if freqs.size < 3:
        raise InvalidInputError("need at least 3 bins")
    med_db = 20.0 * np.log10(np.median(mag[mag > 0]))
    mag_db = 20.0 * np.log10(np.maximum(mag, 1e-300))
    dip = med_db - mag_db  # positive at dips
    peaks, _ = find_peaks(dip, height=floor_db)
    nulls = []
    for p in peaks:
        level = dip[p] - 3.0  # 3 dB above the minimum
        left = p
        while left > 0 and dip[left - 1] >= level:
            left -= 1
        if left > 0:
            f_left = np.interp(
                level, [dip[left - 1], dip[left]], [freqs[left - 1], freqs[left]]
            )
        else:
            f_left = freqs[0]
        right = p
        while right < dip.size - 1 and dip[right + 1] >= level:
            right += 1
        if right < dip.size - 1:
            f_right = np.interp(
                level, [dip[right + 1], dip[right]], [freqs[right + 1], freqs[right]]
            )
        else:
            f_right = freqs[-1]
        nulls.append(Null(float(freqs[p]), float(dip[p]), float(f_right - f_left)))
    return nulls


def save_profile(path, profile: DispersionProfile) -> None:
    """Write a profile as delimited text: freq_Hz, gd_s, gdd_s2, masked."""
    gdd = np.zeros_like(profile.gd) if profile.gdd is None else profile.gdd
    data = np.column_stack([profile.grid, profile.gd, gdd, profile.mask.astype(int)])
    np.savetxt(
        path,
        data,
        fmt=("%.17e", "%.17e", "%.17e", "%d"),
        delimiter="\t",
        header="freq_Hz\tgd_s\tgdd_s2\tmasked",
    )
