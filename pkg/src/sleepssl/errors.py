"""Exception types shared across the package."""


class SleepSSLError(Exception):
    """Base class for all package errors."""


class ParseError(SleepSSLError):
    """Malformed or truncated binary stream.

    ``offset`` is the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class HeaderFieldError(SleepSSLError):
    """A header field could not be interpreted."""

    def __init__(self, name: str, value: str):
        super().__init__(f"header field {name!r}: cannot interpret {value!r}")
        self.name = name
        self.value = value


class DegenerateCalibration(SleepSSLError):
    """digital_min == digital_max, so the affine calibration is undefined."""


class CoverageGap(SleepSSLError):
    """Stage annotations leave part of the recording unlabeled."""

    def __init__(self, start_sec: float, end_sec: float):
        super().__init__(f"no stage annotation covering [{start_sec}, {end_sec}) s")
        self.interval = (start_sec, end_sec)


class UnknownStage(SleepSSLError):
    """Annotation token outside the recognised stage vocabulary."""

    def __init__(self, token: str):
        super().__init__(f"unknown stage token {token!r}")
        self.token = token


class UnsupportedRate(SleepSSLError):
    """Source sampling rate below 100 Hz (Nyquist under the 50 Hz band edge)."""


class DegenerateSignal(SleepSSLError):
    """Zero-variance signal cannot be z-normalized."""


class ConfigError(SleepSSLError):
    """Invalid configuration value or combination."""


class ShapeError(SleepSSLError):
    """Array arguments have incompatible shapes."""


class NumericalError(SleepSSLError):
    """Non-finite value produced during computation."""


class IoError(SleepSSLError):
    """Missing or unwritable file-system artifact."""
