"""Classical core of the protocol: sifting, sequential matching and XOR processing.

Event data is columnar (one :class:`EventLog` of numpy arrays per pair stream)
so that multi-million-pulse Monte-Carlo runs stay fast. :class:`PairEvent` and
:class:`MatchedGroup` are the row views for small, hand-built cases.

Encoding: basis ``0`` is Z, ``1`` is X, ``-1`` means no detection; bits are
``0``/``1`` or ``-1`` when absent.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

NO_DETECTION = -1


class Basis(IntEnum):
    Z = 0
    X = 1


_BASIS_LABEL = {0: "Z", 1: "X", NO_DETECTION: ""}
_BASIS_CODE = {"Z": 0, "X": 1, "": NO_DETECTION, None: NO_DETECTION}


@dataclass(frozen=True)
class PairEvent:
    """One pulse slot of pair stream ``stream`` (1-based). ``None`` basis means no detection."""

    stream: int
    slot: int
    alice_basis: Basis | None
    bob_basis: Basis | None
    alice_bit: int | None = None
    bob_bit: int | None = None

    def __post_init__(self):
        if (self.alice_basis is None) != (self.alice_bit is None):
            raise ValueError("alice_bit must be present exactly when alice_basis is")
        if (self.bob_basis is None) != (self.bob_bit is None):
            raise ValueError("bob_bit must be present exactly when bob_basis is")


@dataclass
class EventLog:
    """All recorded pulses of one pair stream, ordered by slot."""

    stream: int
    slot: np.ndarray
    alice_basis: np.ndarray
    alice_bit: np.ndarray
    bob_basis: np.ndarray
    bob_bit: np.ndarray

    def __len__(self) -> int:
        return len(self.slot)

    @classmethod
    def from_events(cls, events: Sequence[PairEvent], stream: int | None = None) -> "EventLog":
        if stream is None:
            if not events:
                raise ValueError("cannot infer the stream index of an empty event list")
            stream = events[0].stream
        if any(ev.stream != stream for ev in events):
            raise ValueError("events from several streams mixed in one log")

        def code(b):
            return NO_DETECTION if b is None else int(b)

        return cls(
            stream=stream,
            slot=np.array([ev.slot for ev in events], dtype=np.int64),
            alice_basis=np.array([code(ev.alice_basis) for ev in events], dtype=np.int8),
            alice_bit=np.array([code(ev.alice_bit) for ev in events], dtype=np.int8),
            bob_basis=np.array([code(ev.bob_basis) for ev in events], dtype=np.int8),
            bob_bit=np.array([code(ev.bob_bit) for ev in events], dtype=np.int8),
        )

    def events(self) -> Iterator[PairEvent]:
        for s, ab, abit, bb, bbit in zip(self.slot, self.alice_basis, self.alice_bit, self.bob_basis, self.bob_bit):
            yield PairEvent(
                stream=self.stream,
                slot=int(s),
                alice_basis=None if ab < 0 else Basis(int(ab)),
                bob_basis=None if bb < 0 else Basis(int(bb)),
                alice_bit=None if abit < 0 else int(abit),
                bob_bit=None if bbit < 0 else int(bbit),
            )


@dataclass
class ValidEvents:
    """Same-basis coincidences of one stream in one basis, in arrival order."""

    stream: int
    basis: Basis
    slot: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __len__(self) -> int:
        return len(self.slot)


def sift_valid(logs: Sequence[EventLog]) -> list[dict[Basis, ValidEvents]]:
    """Keep pulses where both ends detected in the same basis, split by basis."""
    out = []
    for log in logs:
        both = (log.alice_basis >= 0) & (log.alice_basis == log.bob_basis)
        per_basis = {}
        for basis in Basis:
            mask = both & (log.alice_basis == basis)
            per_basis[basis] = ValidEvents(
                stream=log.stream,
                basis=basis,
                slot=log.slot[mask],
                a=log.alice_bit[mask].astype(np.uint8),
                b=log.bob_bit[mask].astype(np.uint8),
            )
        out.append(per_basis)
    return out


@dataclass(frozen=True)
class MatchedGroup:
    """The j-th matched group of one basis; processed fields are ``None`` until set."""

    basis: Basis
    index: int
    a_bits: tuple[int, ...]
    b_bits: tuple[int, ...]
    slots: tuple[int, ...] = ()
    c_bits: tuple[int, ...] | None = None
    b_prime: tuple[int, ...] | None = None
    a_prime_x: int | None = None


@dataclass
class GroupBatch:
    """Matched groups of one basis stored column-wise: row j is group j, column i is stream i+1."""

    basis: Basis
    a: np.ndarray
    b: np.ndarray
    slots: np.ndarray
    c: np.ndarray | None = None
    b_prime: np.ndarray | None = None
    a_prime_x: np.ndarray | None = None

    def __len__(self) -> int:
        return self.a.shape[0]

    @property
    def n_streams(self) -> int:
        return self.a.shape[1]

    def __getitem__(self, j: int) -> MatchedGroup:
        return MatchedGroup(
            basis=self.basis,
            index=j,
            a_bits=tuple(int(v) for v in self.a[j]),
            b_bits=tuple(int(v) for v in self.b[j]),
            slots=tuple(int(v) for v in self.slots[j]),
            c_bits=None if self.c is None else tuple(int(v) for v in self.c[j]),
            b_prime=None if self.b_prime is None else tuple(int(v) for v in self.b_prime[j]),
            a_prime_x=None if self.a_prime_x is None else int(self.a_prime_x[j]),
        )

    def __iter__(self) -> Iterator[MatchedGroup]:
        for j in range(len(self)):
            yield self[j]


def match_groups(sifted: Sequence[dict[Basis, ValidEvents]]) -> dict[Basis, GroupBatch]:
    """Pair the j-th valid event of every stream, per basis; surplus events are dropped."""
    if not sifted:
        raise ValueError("no streams to match")
    out = {}
    for basis in Basis:
        lists = [s[basis] for s in sifted]
        g = min(len(v) for v in lists)
        out[basis] = GroupBatch(
            basis=basis,
            a=np.stack([v.a[:g] for v in lists], axis=1),
            b=np.stack([v.b[:g] for v in lists], axis=1),
            slots=np.stack([v.slot[:g] for v in lists], axis=1),
        )
    return out


def process_z(batch: GroupBatch) -> GroupBatch:
    """Alice announces c^i = a^1 xor a^i; Bob_i flips his bit by it: b'^i = c^i xor b^i."""
    if batch.basis != Basis.Z:
        raise ValueError(f"process_z needs Z-basis groups, got {batch.basis.name}")
    c = batch.a[:, :1] ^ batch.a
    batch.c = c
    batch.b_prime = c ^ batch.b
    return batch


def process_x(batch: GroupBatch) -> GroupBatch:
    """Alice folds her X outcomes into one parity bit a'^1 = xor_i a^i."""
    if batch.basis != Basis.X:
        raise ValueError(f"process_x needs X-basis groups, got {batch.basis.name}")
    batch.a_prime_x = np.bitwise_xor.reduce(batch.a, axis=1) if len(batch) else np.zeros(0, np.uint8)
    return batch


def z_group_consistent(batch: GroupBatch) -> np.ndarray:
    """Per group: every b'^i equals a^1."""
    return np.all(batch.b_prime == batch.a[:, :1], axis=1)


def x_group_consistent(batch: GroupBatch) -> np.ndarray:
    """Per group: Alice's parity equals the parity of the Bobs' bits."""
    return batch.a_prime_x == np.bitwise_xor.reduce(batch.b, axis=1)


@dataclass
class ErrorTally:
    """Error counts over processed groups. Adding two tallies merges them."""

    groups_z: int = 0
    groups_x: int = 0
    z_any: int = 0
    x_parity: int = 0
    z_marginal: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __add__(self, other: "ErrorTally") -> "ErrorTally":
        if len(self.z_marginal) == 0:
            zm = other.z_marginal.copy()
        elif len(other.z_marginal) == 0:
            zm = self.z_marginal.copy()
        else:
            zm = self.z_marginal + other.z_marginal
        return ErrorTally(
            self.groups_z + other.groups_z,
            self.groups_x + other.groups_x,
            self.z_any + other.z_any,
            self.x_parity + other.x_parity,
            zm,
        )

    @property
    def e_z_n(self) -> float:
        return self.z_any / self.groups_z

    @property
    def e_x_n(self) -> float:
        return self.x_parity / self.groups_x

    @property
    def e_z_marginal(self) -> np.ndarray:
        return self.z_marginal / self.groups_z


def tally_errors(z_batch: GroupBatch, x_batch: GroupBatch) -> ErrorTally:
    """Count marginal and total Z disagreements and X parity violations."""
    if len(z_batch) == 0 and len(x_batch) == 0:
        raise ValueError("no matched groups to tally")
    if z_batch.b_prime is None and len(z_batch):
        process_z(z_batch)
    if x_batch.a_prime_x is None and len(x_batch):
        process_x(x_batch)
    if len(z_batch):
        wrong = z_batch.b_prime != z_batch.a[:, :1]
        z_marginal = wrong.sum(axis=0).astype(np.int64)
        z_any = int(np.any(wrong, axis=1).sum())
    else:
        z_marginal = np.zeros(z_batch.n_streams, np.int64)
        z_any = 0
    x_parity = int((~x_group_consistent(x_batch)).sum()) if len(x_batch) else 0
    return ErrorTally(len(z_batch), len(x_batch), z_any, x_parity, z_marginal)


def run_pipeline(logs: Sequence[EventLog]) -> tuple[dict[Basis, GroupBatch], ErrorTally]:
    """Sift, match, process and tally in one call."""
    groups = match_groups(sift_valid(logs))
    process_z(groups[Basis.Z])
    process_x(groups[Basis.X])
    return groups, tally_errors(groups[Basis.Z], groups[Basis.X])


# --- event-log CSV ------------------------------------------------------------

EVENT_CSV_HEADER = ("stream", "slot", "alice_basis", "alice_bit", "bob_basis", "bob_bit")


def write_event_csv(logs: Iterable[EventLog], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_CSV_HEADER)
        for log in logs:
            for s, ab, abit, bb, bbit in zip(log.slot, log.alice_basis, log.alice_bit, log.bob_basis, log.bob_bit):
                writer.writerow((
                    log.stream,
                    int(s),
                    _BASIS_LABEL[int(ab)],
                    "" if abit < 0 else int(abit),
                    _BASIS_LABEL[int(bb)],
                    "" if bbit < 0 else int(bbit),
                ))


def read_event_csv(path: str | Path) -> list[EventLog]:
    by_stream: dict[int, list[PairEvent]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EVENT_CSV_HEADER:
            raise ValueError(f"unexpected event-log header {reader.fieldnames}")
        for row in reader:
            ab = _BASIS_CODE[row["alice_basis"]]
            bb = _BASIS_CODE[row["bob_basis"]]
            ev = PairEvent(
                stream=int(row["stream"]),
                slot=int(row["slot"]),
                alice_basis=None if ab < 0 else Basis(ab),
                bob_basis=None if bb < 0 else Basis(bb),
                alice_bit=int(row["alice_bit"]) if row["alice_bit"] != "" else None,
                bob_bit=int(row["bob_bit"]) if row["bob_bit"] != "" else None,
            )
            by_stream.setdefault(ev.stream, []).append(ev)
    return [EventLog.from_events(evs, s) for s, evs in sorted(by_stream.items())]
