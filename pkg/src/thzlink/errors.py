"""Exception types shared across the library."""


class ThzLinkError(Exception):
    """Base class for all library errors."""


class InvalidInputError(ThzLinkError, ValueError):
    """An argument violates a documented precondition."""


class PhaseUndefinedError(ThzLinkError):
    """Phase requested at a bin with exactly zero magnitude.

    Attributes:
        bin_index: index of the offending bin within the requested band.
        frequency_hz: frequency of that bin.
    """

    def __init__(self, bin_index, frequency_hz):
        self.bin_index = int(bin_index)
        self.frequency_hz = float(frequency_hz)
        super().__init__(
            f"phase undefined at bin {self.bin_index} "
            f"(f = {self.frequency_hz:.6g} Hz): magnitude is exactly zero"
        )


class RecordOverflowError(ThzLinkError, ValueError):
    """Delay spread too large for the waveform record (would wrap around)."""


class GridMismatchError(ThzLinkError, ValueError):
    """Operation requires responses sharing one frequency grid."""


class ChannelConfigError(ThzLinkError, ValueError):
    """Channel delay spread exceeds the block-processing overlap budget."""


class SyncFailureError(ThzLinkError):
    """Preamble correlation peak below the acceptance threshold.

    Carries the best-effort estimates so a caller may proceed and count
    the failure separately from symbol errors.

    Attributes:
        delay_s: best-effort bulk delay estimate (seconds).
        phase_rad: best-effort carrier phase estimate (radians).
        peak_ratio: normalized correlation peak that failed the threshold.
    """

    def __init__(self, delay_s, phase_rad, peak_ratio):
        self.delay_s = float(delay_s)
        self.phase_rad = float(phase_rad)
        self.peak_ratio = float(peak_ratio)
        super().__init__(
            f"synchronization failed: normalized correlation peak "
            f"{self.peak_ratio:.3f} < 0.5"
        )


class ConfigError(ThzLinkError, ValueError):
    """A run configuration file is missing a field or holds a bad value.

    Attributes:
        field: dotted section.key name of the offending entry, or None.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
