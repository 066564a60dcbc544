"""Exception hierarchy shared by every structure in the package."""


class WirsError(Exception):
    """Base class for all library errors."""


class EmptyInput(WirsError, ValueError):
    pass


class NonPositiveWeight(WirsError, ValueError):
    pass


class BadInterval(WirsError, IndexError):
    pass


class BadInput(WirsError, ValueError):
    pass


class VerticalQuery(WirsError, ValueError):
    pass


class NotFound(WirsError, LookupError):
    pass


class EmptyRange(WirsError, LookupError):
    """The query range contains no point."""


class ConstructionFailed(WirsError, RuntimeError):
    pass


class LevelOverflow(WirsError, LookupError):
    """The query point lies above the topmost approximate level (or outside its domain)."""


class NoCandidates(WirsError, LookupError):
    pass


class TooLarge(WirsError, ValueError):
    pass


class DegenerateBins(WirsError, ValueError):
    pass
