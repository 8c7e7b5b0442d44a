"""Reading transaction and label files, plus the preprocessing filters.

Transactions are comma-separated with a ``tx,from,to,value[,timestamp]``
header. Labels are ``address,category`` pairs.
"""
from __future__ import annotations

import csv
import io
import os
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

CATEGORIES = (
    "ico-wallet",
    "converter",
    "mining",
    "exchange",
    "gambling",
    "phish-hack",
    "licit-other",
)
ILLICIT = "phish-hack"

DEFAULT_COLUMNS = {
    "tx": "tx",
    "payer": "from",
    "payee": "to",
    "value": "value",
    "timestamp": "timestamp",
}
_REQUIRED = ("tx", "payer", "payee", "value")


class IngestError(ValueError):
    """Fatal problem with an input file (bad header, unknown category...)."""


def normalize_address(addr: str) -> str:
    return addr.strip().lower()


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    tx_id: str
    payer: str
    payee: str
    value: int
    timestamp: int | None = None

    def __post_init__(self):
        if not self.payer or not self.payee:
            raise ValueError("payer and payee must be non-empty")
        if self.value < 0:
            raise ValueError(f"negative value {self.value}")


@dataclass
class LabelTable:
    """Address -> category map. Only ``phish-hack`` counts as illicit."""

    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for addr, cat in self.entries.items():
            if cat not in CATEGORIES:
                raise IngestError(f"unknown category {cat!r} for {addr}")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, addr):
        return addr in self.entries

    def get(self, addr, default=None):
        return self.entries.get(addr, default)

    def is_illicit(self, addr: str) -> bool:
        return self.entries.get(addr) == ILLICIT

    def illicit(self) -> set[str]:
        return {a for a, c in self.entries.items() if c == ILLICIT}

    def licit(self) -> set[str]:
        return {a for a, c in self.entries.items() if c != ILLICIT}

    def restricted_to(self, addresses: Iterable[str]) -> "LabelTable":
        keep = set(addresses)
        return LabelTable({a: c for a, c in self.entries.items() if a in keep})


class RowError(NamedTuple):
    line: int
    message: str


class ParsedTransactions(NamedTuple):
    records: list[TransactionRecord]
    errors: list[RowError]


def _text_stream(source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_transactions(source, columns: Mapping[str, str] | None = None) -> ParsedTransactions:
    """Parse a delimited transactions file.

    ``source`` may be a path, raw bytes, or a binary/text stream. ``columns``
    maps the logical fields (tx, payer, payee, value, timestamp) to header
    names. Rows that cannot be parsed are skipped and reported with their
    1-based line number; a missing required column raises ``IngestError``.
    """
    colmap = dict(DEFAULT_COLUMNS)
    if columns:
        colmap.update(columns)
    fh = _text_stream(source)
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("transactions file is empty (no header row)") from None
    header = [h.strip() for h in header]
    pos = {}
    for key in _REQUIRED:
        try:
            pos[key] = header.index(colmap[key])
        except ValueError:
            raise IngestError(f"missing required column {colmap[key]!r} in header {header}") from None
    ts_pos = header.index(colmap["timestamp"]) if colmap["timestamp"] in header else None

    records, errors = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            payer = normalize_address(row[pos["payer"]])
            payee = normalize_address(row[pos["payee"]])
            value = int(row[pos["value"]].strip(), 10)
            ts = None
            if ts_pos is not None and ts_pos < len(row) and row[ts_pos].strip():
                ts = int(row[ts_pos].strip(), 10)
                if ts < 0:
                    raise ValueError(f"negative timestamp {ts}")
            records.append(TransactionRecord(row[pos["tx"]].strip(), payer, payee, value, ts))
        except (ValueError, IndexError) as exc:
            errors.append(RowError(lineno, str(exc)))
    return ParsedTransactions(records, errors)


def write_transactions(records: Iterable[TransactionRecord], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["tx", "from", "to", "value", "timestamp"])
    for r in records:
        w.writerow([r.tx_id, r.payer, r.payee, r.value, "" if r.timestamp is None else r.timestamp])


def parse_labels(source) -> LabelTable:
    """Parse an ``address,category`` file.

    Duplicate addresses keep the last row and emit a ``UserWarning``.
    An unknown category is fatal.
    """
    fh = _text_stream(source)
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise IngestError("labels file is empty (no header row)") from None
    if header[:2] != ["address", "category"]:
        raise IngestError(f"labels header must be 'address,category', got {header}")
    entries: dict[str, str] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise IngestError(f"line {lineno}: expected 2 columns, got {row}")
        addr = normalize_address(row[0])
        cat = row[1].strip().lower()
        if cat not in CATEGORIES:
            raise IngestError(f"line {lineno}: unknown category {cat!r}")
        if addr in entries:
            warnings.warn(f"line {lineno}: duplicate label for {addr}, keeping {cat!r}", stacklevel=2)
        entries[addr] = cat
    return LabelTable(entries)


def write_labels(labels: LabelTable, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["address", "category"])
    for addr in sorted(labels.entries):
        w.writerow([addr, labels.entries[addr]])


def filter_zero_value(records: Sequence[TransactionRecord]) -> list[TransactionRecord]:
    return [r for r in records if r.value > 0]


def extract_largest_wcc(records: Sequence[TransactionRecord]) -> list[TransactionRecord]:
    """Keep the records inside the largest weakly connected component.

    Equal-size components are ranked by their smallest member address.
    """
    if not records:
        raise ValueError("extract_largest_wcc needs at least one record")
    ends = np.array([(r.payer, r.payee) for r in records], dtype=object)
    accounts, codes = np.unique(ends.ravel().astype(str), return_inverse=True)
    codes = codes.reshape(-1, 2)
    n = len(accounts)
    adj = coo_matrix((np.ones(len(codes), dtype=np.int8), (codes[:, 0], codes[:, 1])), shape=(n, n))
    _, comp = connected_components(adj, directed=True, connection="weak")
    sizes = np.bincount(comp)
    # accounts are sorted, so the first index seen per component is its min address
    first = np.full(len(sizes), n, dtype=np.int64)
    np.minimum.at(first, comp, np.arange(n))
    winner = min(range(len(sizes)), key=lambda c: (-sizes[c], first[c]))
    keep = comp[codes[:, 0]] == winner
    return [r for r, k in zip(records, keep) if k]
