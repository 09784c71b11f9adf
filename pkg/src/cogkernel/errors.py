"""Exception hierarchy for the kernel."""


class CogKernelError(Exception):
    """Base class for all kernel errors."""


class VocabularyCollisionError(CogKernelError):
    """A user symbol tried to claim an innate vocabulary text."""


class HeterogeneousNodeError(CogKernelError):
    pass


class EmptyChunkError(CogKernelError):
    pass


class PlacementError(CogKernelError):
    """An ACT-R mode element does not belong to any buffer."""


class WallViolationError(CogKernelError):
    """Agent data tried to write module status or touch metadata."""


class UnknownElementError(CogKernelError):
    pass


class UnsupportedModeError(CogKernelError):
    pass


class CannotRemoveError(CogKernelError):
    pass


class LinkageError(CogKernelError):
    """Soar mode element with a dangling node reference."""


class RunawayElaborationError(CogKernelError):
    pass


class UnknownEnvironmentResponse(CogKernelError):
    pass


class HaltedError(CogKernelError):
    """Stepping a runtime that has already stopped."""


class ChecksumError(CogKernelError):
    pass


class ModelError(CogKernelError):
    """A model failed to parse or validate; carries the diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
