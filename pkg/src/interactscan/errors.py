"""Exception hierarchy shared by all stages."""

from __future__ import annotations


class ScanError(Exception):
    """Base class for every error raised by this package."""


class InvalidDepthError(ScanError, ValueError):
    pass


class BehindCameraError(ScanError, ValueError):
    pass


class InvalidParameterError(ScanError, ValueError):
    pass


class EmptyCloudError(ScanError, ValueError):
    pass


class DegenerateGeometryError(ScanError, ValueError):
    pass


class DatasetNotFoundError(ScanError, FileNotFoundError):
    pass


class InconsistentDatasetError(ScanError, ValueError):
    pass


class InvalidPoseError(ScanError, ValueError):
    pass


class InvalidConfigError(ScanError, ValueError):
    pass


class DatasetWriteError(ScanError, OSError):
    pass


class NoStaticPhaseError(ScanError):
    """The arm is already visible in the first frame."""


class NoInteractionPhaseError(ScanError):
    """The arm never appears, so nothing was manipulated."""


class NoStablePeriodError(ScanError):
    """No consecutive candidate masks reach the IoU stability threshold."""


class InvalidScenarioError(ScanError, ValueError):
    pass
