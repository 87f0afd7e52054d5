"""Voting field-experiment loader and the biased study/target split.

Only the Control (w=0) and Neighbors (w=1) arms are kept, giving a design
propensity of 1/6. The 2004 primary turnout flag plays the role of the
unobserved ``u`` that drives the study/target shift. See
``docs/voting-schema.md`` for the expected columns.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Tuple

import numpy as np

from .core import ObservedData
from .synthetic import stream_rng

VOTING_E = 1.0 / 6.0
ELECTION_YEAR = 2006
HISTORY_FLAGS = ("p2000", "p2002", "g2000", "g2002", "g2004")
FEATURES = ("hh_size", "age", "sex") + HISTORY_FLAGS

_TRUE = {"1", "yes", "y", "true", "t", "1.0"}
_FALSE = {"0", "no", "n", "false", "f", "0.0"}
_SEX = {"male": 1, "m": 1, "female": 0, "f": 0, "1": 1, "0": 0}


class VotingSchemaError(ValueError):
    """A required column is missing from the input file."""


@dataclass(frozen=True)
class VotingColumns:
    """Mapping from record fields to CSV column names.

    ``age`` takes precedence over ``yob``; when only ``yob`` is given the age
    is ``2006 - yob``.
    """

    sex: str = "sex"
    yob: Optional[str] = "yob"
    age: Optional[str] = None
    hh_size: str = "hh_size"
    p2000: str = "p2000"
    p2002: str = "p2002"
    g2000: str = "g2000"
    g2002: str = "g2002"
    g2004: str = "g2004"
    u: str = "p2004"
    treatment: str = "treatment"
    outcome: str = "voted"
    control_label: str = "Control"
    treated_label: str = "Neighbors"

    @classmethod
    def from_mapping(cls, mapping) -> "VotingColumns":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown voting column keys: {sorted(unknown)}")
        return cls(**{k: (v if v != "" else None) for k, v in mapping.items()})

    def required(self) -> list:
        cols = [self.sex, self.hh_size, *(getattr(self, f) for f in HISTORY_FLAGS),
                self.u, self.treatment, self.outcome]
        if self.age:
            cols.append(self.age)
        elif self.yob:
            cols.append(self.yob)
        else:
            raise VotingSchemaError("either an age or a year-of-birth column is required")
        return cols


@dataclass(frozen=True)
class VotingRecord:
    hh_size: int
    age: float
    sex: int
    p2000: int
    p2002: int
    g2000: int
    g2002: int
    g2004: int
    u: int
    treatment: str
    w: int
    voted: int

    def features(self) -> tuple:
        return tuple(float(getattr(self, f)) for f in FEATURES)


@dataclass
class VotingData:
    records: List[VotingRecord]
    rejects: List[Tuple[int, str]] = field(default_factory=list)
    excluded: int = 0
    e: float = VOTING_E

    def arrays(self, index=None):
        """``(X, y, w, u)`` arrays over all records or the given indices."""
        recs = self.records if index is None else [self.records[i] for i in index]
        X = np.array([r.features() for r in recs], dtype=np.float64).reshape(len(recs), len(FEATURES))
        y = np.array([r.voted for r in recs], dtype=np.float64)
        w = np.array([r.w for r in recs], dtype=np.int64)
        u = np.array([r.u for r in recs], dtype=np.int64)
        return X, y, w, u

    def observed(self, index=None) -> ObservedData:
        X, y, w, _ = self.arrays(index)
        return ObservedData(X, y, w)


def _flag(token: str, name: str) -> int:
    t = token.strip().lower()
    if t in _TRUE:
        return 1
    if t in _FALSE:
        return 0
    raise ValueError(f"{name}: expected a binary value, got {token!r}")


def _parse_row(row: dict, cols: VotingColumns, label_map: dict):
    label = row[cols.treatment].strip().lower()
    if label not in label_map:
        return None
    sex_token = row[cols.sex].strip().lower()
    if sex_token not in _SEX:
        raise ValueError(f"sex: unrecognized value {row[cols.sex]!r}")
    if cols.age:
        age = float(row[cols.age])
    else:
        age = float(ELECTION_YEAR - int(float(row[cols.yob])))
    if not age > 0:
        raise ValueError(f"age must be positive, got {age}")
    hh = float(row[cols.hh_size])
    if hh < 1 or hh != int(hh):
        raise ValueError(f"hh_size must be a positive integer, got {row[cols.hh_size]!r}")
    return VotingRecord(
        hh_size=int(hh),
        age=age,
        sex=_SEX[sex_token],
        **{f: _flag(row[getattr(cols, f)], f) for f in HISTORY_FLAGS},
        u=_flag(row[cols.u], "u"),
        treatment=row[cols.treatment].strip(),
        w=label_map[label],
        voted=_flag(row[cols.outcome], "outcome"),
    )


def load_voting(path, columns: Optional[VotingColumns] = None) -> VotingData:
    """Parse the voting CSV, keeping only the control and neighbors arms.

    Rows that fail validation are collected in ``rejects`` as
    ``(line_number, reason)``; a missing required column raises
    :class:`VotingSchemaError`.
    """
    cols = columns or VotingColumns()
    label_map = {cols.control_label.strip().lower(): 0, cols.treated_label.strip().lower(): 1}
    records, rejects, excluded = [], [], 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        missing = [c for c in cols.required() if c not in header]
        if missing:
            raise VotingSchemaError(f"{path}: missing required columns {missing}")
        for row in reader:
            line = reader.line_num
            if None in row or any(v is None for v in row.values()):
                rejects.append((line, "wrong number of fields"))
                continue
            try:
                rec = _parse_row(row, cols, label_map)
            except ValueError as exc:
                rejects.append((line, str(exc)))
                continue
            if rec is None:
                excluded += 1
            else:
                records.append(rec)
    return VotingData(records, rejects, excluded)


def semisynthetic_split(data: VotingData, seed: int, u1_share: float = 0.75,
                        u0_share: float = 0.25, train_share: float = 0.6):
    """Biased study/target split; returns index arrays ``(train, val, test)``.

    A random ``u1_share`` of units with ``u=1`` and ``u0_share`` of units with
    ``u=0`` form the study pool, which is shuffled and cut ``train_share`` :
    ``1 - train_share`` into train and validation. Everything else is test.
    """
    if not data.records:
        raise ValueError("no records to split")
    rng = stream_rng(seed, "voting-split")
    u = np.array([r.u for r in data.records])
    pool = []
    for flag, share in ((1, u1_share), (0, u0_share)):
        idx = np.flatnonzero(u == flag)
        k = int(round(share * len(idx)))
        pool.append(rng.choice(idx, size=k, replace=False))
    pool = rng.permutation(np.concatenate(pool))
    n_train = int(np.floor(train_share * len(pool)))
    train = np.sort(pool[:n_train])
    val = np.sort(pool[n_train:])
    test = np.setdiff1d(np.arange(len(u)), pool)
    return train, val, test


def write_splits(path, data: VotingData, splits) -> None:
    """Cache the split as CSV: record fields plus a ``split`` column."""
    names = [f.name for f in fields(VotingRecord)]
    label = np.empty(len(data.records), dtype=object)
    for name, idx in zip(("train", "val", "test"), splits):
        label[idx] = name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ["split"])
        for rec, s in zip(data.records, label):
            d = asdict(rec)
            writer.writerow([d[n] for n in names] + [s])
