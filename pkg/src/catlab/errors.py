"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class CatlabError(Exception):
    exit_code = 1
    kind = "error"

    def to_json(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ConfigError(CatlabError, ValueError):
    exit_code = 2
    kind = "config"


class CollisionError(CatlabError):
    """Two tuples in X^k have the same spaced sum, so the sum map is not injective."""

    exit_code = 3
    kind = "collision"

    def __init__(self, message: str, first=None, second=None, point=None):
        super().__init__(message)
        self.first = first
        self.second = second
        self.point = point

    def to_json(self) -> dict:
        out = super().to_json()
        out["witnesses"] = [
            [list(v) for v in self.first] if self.first is not None else None,
            [list(v) for v in self.second] if self.second is not None else None,
        ]
        return out


class HorizonError(CatlabError):
    exit_code = 3
    kind = "horizon"


class AperiodicityError(ConfigError):
    """Raised when a command needs an aperiodic T and did not get one."""

    kind = "aperiodicity"


class PrecisionExhausted(CatlabError, ArithmeticError):
    exit_code = 4
    kind = "precision"


class IndeterminateError(PrecisionExhausted):
    """A numeric decision fell inside its own error radius."""

    kind = "indeterminate"


class BudgetExhausted(CatlabError):
    exit_code = 5
    kind = "budget"


class ConsistencyError(CatlabError, AssertionError):
    """Two independent computations of the same quantity disagree."""

    kind = "consistency"
