"""Exception hierarchy for the engine, harness and gateway."""


class CapsuleError(Exception):
    """Base class for every error raised by this package."""


class UnknownPlayer(CapsuleError, KeyError):
    def __init__(self, player):
        super().__init__(player)
        self.player = player

    def __str__(self):
        return f"no local storage for player {self.player!r}"


class DuplicatePlayer(CapsuleError):
    pass


class StaleEntity(CapsuleError, KeyError):
    def __str__(self):
        return f"entity {self.args[0]!r} is not live"


class ScopeViolation(CapsuleError):
    """A reference would leak local state into another scope."""


class ComponentSizeError(CapsuleError, ValueError):
    pass


class SizeMismatch(CapsuleError, ValueError):
    pass


class NotHeld(CapsuleError, KeyError):
    pass


class CapacityExceeded(CapsuleError):
    def __init__(self, predicted_ms: float, budget_ms: float):
        super().__init__(f"predicted tick {predicted_ms:.3f} ms exceeds budget {budget_ms:.3f} ms")
        self.predicted_ms = predicted_ms
        self.budget_ms = budget_ms


class EngineDown(CapsuleError):
    pass


class InvalidScenario(CapsuleError, ValueError):
    pass


class IncompatibleScenario(InvalidScenario):
    pass


class ModeMismatch(CapsuleError, ValueError):
    pass


class Unsatisfiable(CapsuleError):
    pass


class NotJoined(CapsuleError):
    pass


class ProtocolError(CapsuleError):
    pass


class BindFailure(CapsuleError, OSError):
    pass
