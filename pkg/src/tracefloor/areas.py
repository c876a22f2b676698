"""The four area-of-interest classes a floor-plan block can take."""
from enum import IntEnum


class AreaClass(IntEnum):
    """Block classes, in fixed ordinal order (used for all tie-breaking)."""

    OFFICE = 0
    CORRIDOR = 1
    ELEVATOR = 2
    STAIRS = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, label: str) -> "AreaClass":
        return cls[label.upper()]
