"""Exception types raised by the library."""


class DmesiError(Exception):
    pass


class DegenerateLattice(DmesiError, ValueError):
    """Encoding was requested on a zero-spacing lattice."""


class ConditionViolated(DmesiError, ValueError):
    """A quantizer precondition failed.

    ``which`` names the failing inequality.
    """

    def __init__(self, which: str, detail: str = ""):
        self.which = which
        super().__init__(f"{which}: {detail}" if detail else which)


class DimensionError(DmesiError, ValueError):
    pass


class BudgetTooSmall(DmesiError, ValueError):
    pass


class ConstraintViolation(DmesiError, ValueError):
    """An instance breaks one of its declared distance bounds."""

    def __init__(self, pair, slack: float):
        self.pair = pair
        self.slack = slack
        super().__init__(f"distance constraint {pair} violated by {slack:.6g}")


class OrderViolation(DmesiError, ValueError):
    pass
