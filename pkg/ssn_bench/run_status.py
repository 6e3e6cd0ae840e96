"""Module containing RunStatus enum"""
from enum import auto as enum_auto, Enum


class RunStatus(Enum):
    """Denotes how a benchmark cell ended."""

    Success = enum_auto()
    Fail = enum_auto()
    Diverged = enum_auto()
    Unknown = enum_auto()

    def __bool__(self) -> bool:
        return self == RunStatus.Success

    def __str__(self) -> str:
        return self.name.lower()
