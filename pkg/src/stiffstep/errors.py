"""Exception hierarchy shared by the integrators and the harness."""

from __future__ import annotations


class StiffStepError(Exception):
    """Base class. ``stage`` and ``step_index`` are filled in as the error propagates."""

    def __init__(self, message: str, *, stage: int | None = None, step_index: int | None = None):
        super().__init__(message)
        self.message = message
        self.stage = stage
        self.step_index = step_index

    def __str__(self) -> str:
        where = []
        if self.step_index is not None:
            where.append(f"step {self.step_index}")
        if self.stage is not None:
            where.append(f"stage {self.stage}")
        if where:
            return f"{self.message} ({', '.join(where)})"
        return self.message


class SingularMatrix(StiffStepError):
    pass


class DomainError(StiffStepError):
    """A non-finite value showed up in a state, residual or derivative."""


class NewtonDiverged(StiffStepError):
    pass


class PoleEvaluation(StiffStepError):
    pass


class CacheCorrupt(StiffStepError):
    pass
