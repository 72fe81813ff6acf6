from __future__ import annotations

from dataclasses import dataclass


@dataclass
class StepCounters:
    """Forward/backward pass tallies.

    Conventions: one loss+gradient evaluation (single or batched) is one
    forward and one backward; a bare loss or inference evaluation is one
    forward; an LII evaluation is two forwards.
    """

    forwards: int = 0
    backwards: int = 0

    def add(self, forwards: int = 0, backwards: int = 0) -> None:
        self.forwards += forwards
        self.backwards += backwards

    def as_dict(self) -> dict:
        return {"forwards": self.forwards, "backwards": self.backwards}
