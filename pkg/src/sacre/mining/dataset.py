from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

ACTIVE = "active"
INACTIVE = "inactive"
CLASS_VALUES = (ACTIVE, INACTIVE)
CLASS_NAME = "class"

Value = Union[float, str]


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Attribute:
    """A column. ``values`` is None for numeric attributes, else the nominal labels."""

    name: str
    values: Optional[tuple[str, ...]] = None

    @property
    def numeric(self) -> bool:
        return self.values is None

    @classmethod
    def nominal(cls, name: str, values: Sequence[str]) -> "Attribute":
        return cls(name, tuple(values))


@dataclass
class Dataset:
    """Rows of attribute values whose last attribute is the active/inactive class."""

    attributes: list[Attribute]
    records: list[tuple] = field(default_factory=list)
    relation_name: str = "context"

    def __post_init__(self):
        if not self.attributes:
            raise DatasetError("dataset needs at least the class attribute")
        cls_attr = self.attributes[-1]
        if cls_attr.numeric or set(cls_attr.values) != set(CLASS_VALUES) or len(cls_attr.values) != 2:
            raise DatasetError("last attribute must be nominal {active,inactive}")
        self.records = [tuple(r) for r in self.records]
        for i, row in enumerate(self.records):
            self._check_row(row, i)

    def _check_row(self, row, index):
        if len(row) != len(self.attributes):
            raise DatasetError(f"row {index} has {len(row)} values, expected {len(self.attributes)}")
        for attr, v in zip(self.attributes, row):
            if attr.numeric:
                if isinstance(v, str):
                    raise DatasetError(f"row {index}: numeric {attr.name} got {v!r}")
            elif v not in attr.values:
                raise DatasetError(f"row {index}: {v!r} not a value of {attr.name}")

    def append(self, row) -> None:
        row = tuple(row)
        self._check_row(row, len(self.records))
        self.records.append(row)

    def __len__(self):
        return len(self.records)

    @property
    def feature_attributes(self) -> list[Attribute]:
        return self.attributes[:-1]

    @property
    def feature_names(self) -> list[str]:
        return [a.name for a in self.attributes[:-1]]

    def labels(self) -> np.ndarray:
        """Boolean class vector, True for active."""
        return np.array([r[-1] == ACTIVE for r in self.records], dtype=bool)

    def matrix(self) -> np.ndarray:
        """Feature matrix as floats; nominal labels must parse as numbers."""
        n, d = len(self.records), len(self.attributes) - 1
        X = np.empty((n, d), dtype=float)
        for j, attr in enumerate(self.attributes[:-1]):
            col = [r[j] for r in self.records]
            try:
                X[:, j] = np.asarray(col, dtype=float)
            except ValueError as exc:
                raise DatasetError(f"attribute {attr.name} has non-numeric labels") from exc
        return X

    def columns(self) -> dict[str, np.ndarray]:
        X = self.matrix()
        return {name: X[:, j] for j, name in enumerate(self.feature_names)}

    def nominal_indices(self) -> list[int]:
        return [j for j, a in enumerate(self.attributes[:-1]) if not a.numeric]

    def subset(self, indices) -> "Dataset":
        return Dataset(list(self.attributes), [self.records[i] for i in indices], self.relation_name)

    def class_counts(self) -> tuple[int, int]:
        y = self.labels()
        return int(y.sum()), int((~y).sum())
