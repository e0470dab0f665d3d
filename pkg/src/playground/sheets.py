"""Tabular text data access: load tables from a sheet backend, validate gold
labels against a task schema, and write result columns back.

The CSV backend (RFC-4180 quoting, UTF-8, comma separator, header row) is the
reference implementation; the remote backend is a thin adapter over a client
interface with the same contract, so everything here runs offline.
"""

from __future__ import annotations

import csv
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from playground.domain import InputArity, LabelSpec, SheetRef
from playground.errors import PlaygroundError

CSV_BACKEND = "csv_file"
REMOTE_BACKEND = "remote_sheet"
CREDENTIAL_ENV = "SHEET_CREDENTIAL_PATH"


class Unreachable(PlaygroundError):
    pass


class MalformedTable(PlaygroundError):
    pass


class EmptyTable(PlaygroundError):
    pass


class MissingColumn(PlaygroundError):
    pass


class MismatchError(PlaygroundError):
    """Gold cells that match no schema value, by 1-based data row index."""

    def __init__(self, indices: Sequence[int]):
        super().__init__(f"label mismatch at rows {list(indices)}")
        self.indices = sorted(indices)


class EmptyTextRows(PlaygroundError):
    def __init__(self, indices: Sequence[int]):
        super().__init__(f"empty text cells at rows {list(indices)}")
        self.indices = sorted(indices)


class WriteConflict(PlaygroundError):
    pass


@dataclass
class SheetTable:
    """Header plus data rows; row indices reported to users are 1-based."""

    columns: list[str]
    rows: list[list[str]]

    def __post_init__(self) -> None:
        names = [c for c in self.columns]
        if any(not c for c in names):
            raise MalformedTable("empty column name in header")
        if len(set(names)) != len(names):
            raise MalformedTable("duplicate column names in header")
        for i, row in enumerate(self.rows, start=1):
            if len(row) != len(names):
                raise MalformedTable(
                    f"row {i} has {len(row)} cells, expected {len(names)}"
                )

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise MissingColumn(f"column {name!r} not in table")

    def column_values(self, name: str) -> list[str]:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]


@dataclass(frozen=True)
class ColumnBinding:
    text: str
    text2: str | None = None
    gold: str | None = None
    metadata: tuple[str, ...] = ()

    def validate(self, table: SheetTable, arity: InputArity) -> None:
        for name in (self.text, self.text2, self.gold, *self.metadata):
            if name is not None:
                table.column_index(name)
        if arity is InputArity.PAIR and self.text2 is None:
            raise MissingColumn("pair task requires a second text column")


@dataclass(frozen=True)
class InputRecord:
    index: int  # 1-based data row
    text: str
    text2: str | None = None


# ---------------------------------------------------------------------------
# Backends

_locks_guard = threading.Lock()
_ref_locks: dict[tuple[str, str, str], threading.Lock] = {}


def _ref_lock(ref: SheetRef) -> threading.Lock:
    key = (ref.backend, str(ref.locator), ref.worksheet or "")
    with _locks_guard:
        if key not in _ref_locks:
            _ref_locks[key] = threading.Lock()
        return _ref_locks[key]


class RemoteSheetClient(Protocol):
    """Minimal wire contract for a hosted spreadsheet service."""

    def load(self, document_id: str, worksheet: str | None) -> tuple[list[list[str]], int]:
        """Returns (raw rows incl. header, revision)."""
        ...

    def write_range(
        self,
        document_id: str,
        worksheet: str | None,
        rows: list[list[str]],
        expected_revision: int,
    ) -> None:
        """Replaces the sheet contents; raises WriteConflict on a stale revision."""
        ...


class CsvSheetBackend:
    def _read_raw(self, ref: SheetRef) -> list[list[str]]:
        path = Path(ref.locator)
        if not path.exists():
            raise Unreachable(f"csv file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8-sig", newline="") as fh:
                return [list(row) for row in csv.reader(fh)]
        except OSError as exc:
            raise Unreachable(f"cannot read {path}: {exc}")
        except csv.Error as exc:
            raise MalformedTable(f"csv parse error: {exc}")

    def load(self, ref: SheetRef) -> SheetTable:
        return _table_from_raw(self._read_raw(ref))

    def write_column(self, ref: SheetRef, column: str, values: Sequence[str]) -> None:
        with _ref_lock(ref):
            raw = self._read_raw(ref)
            updated = _splice_column(raw, column, values)
            path = Path(ref.locator)
            tmp = path.with_suffix(path.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                csv.writer(fh).writerows(updated)
            os.replace(tmp, path)


class RemoteSheetBackend:
    """Adapter for a remote spreadsheet; a stale-revision write is retried once."""

    def __init__(self, client: RemoteSheetClient):
        self.client = client

    def load(self, ref: SheetRef) -> SheetTable:
        raw, _ = self.client.load(ref.locator, ref.worksheet)
        return _table_from_raw(raw)

    def write_column(self, ref: SheetRef, column: str, values: Sequence[str]) -> None:
        with _ref_lock(ref):
            for attempt in range(2):
                raw, revision = self.client.load(ref.locator, ref.worksheet)
                updated = _splice_column(raw, column, values)
                try:
                    self.client.write_range(ref.locator, ref.worksheet, updated, revision)
                    return
                except WriteConflict:
                    if attempt == 1:
                        raise


def _table_from_raw(raw: list[list[str]]) -> SheetTable:
    if not raw:
        raise MalformedTable("file has no header row")
    header = [c.strip() for c in raw[0]]
    rows = [[cell.strip() for cell in row] for row in raw[1:]]
    table = SheetTable(columns=header, rows=rows)
    if not table.rows:
        raise EmptyTable("table has a header but no data rows")
    return table


def _splice_column(raw: list[list[str]], column: str, values: Sequence[str]) -> list[list[str]]:
    """Replace or append a column in raw rows, leaving every other cell as-is."""
    if not column:
        raise PlaygroundError("target column name must be non-empty")
    if not raw:
        raise MalformedTable("file has no header row")
    header = list(raw[0])
    data = [list(row) for row in raw[1:]]
    if len(values) != len(data):
        raise PlaygroundError(
            f"got {len(values)} values for {len(data)} data rows"
        )
    trimmed = [c.strip() for c in header]
    if column in trimmed:
        idx = trimmed.index(column)
        header[idx] = column
        for row, value in zip(data, values):
            row[idx] = value
    else:
        header.append(column)
        for row, value in zip(data, values):
            row.append(value)
    return [header, *data]


_default_remote_client: RemoteSheetClient | None = None


def set_remote_client(client: RemoteSheetClient | None) -> None:
    """Install the process-wide remote sheet client (tests inject a fake)."""
    global _default_remote_client
    _default_remote_client = client


def _resolve_backend(ref: SheetRef):
    if ref.backend == CSV_BACKEND:
        return CsvSheetBackend()
    if ref.backend == REMOTE_BACKEND:
        if _default_remote_client is None:
            if not os.environ.get(CREDENTIAL_ENV):
                raise Unreachable(
                    f"remote sheet backend needs {CREDENTIAL_ENV} or an injected client"
                )
            raise Unreachable("no remote sheet client wired for this deployment")
        return RemoteSheetBackend(_default_remote_client)
    raise Unreachable(f"unknown sheet backend {ref.backend!r}")


# ---------------------------------------------------------------------------
# Operations


def load_table(ref: SheetRef) -> SheetTable:
    """Header plus all data rows; cells are whitespace-trimmed at both ends."""
    return _resolve_backend(ref).load(ref)


def validate_labels(
    table: SheetTable, gold: str, schema: Sequence[LabelSpec]
) -> None:
    """Every non-empty gold cell must equal some schema storage value; empty
    cells are unlabeled, not mismatches."""
    allowed = {l.value for l in schema}
    bad = [
        i
        for i, cell in enumerate(table.column_values(gold), start=1)
        if cell != "" and cell not in allowed
    ]
    if bad:
        raise MismatchError(bad)


def extract_inputs(
    table: SheetTable, binding: ColumnBinding, arity: InputArity
) -> list[InputRecord]:
    """One record per row in order, carrying the 1-based row index."""
    binding.validate(table, arity)
    text_values = table.column_values(binding.text)
    text2_values = (
        table.column_values(binding.text2) if arity is InputArity.PAIR else None
    )
    empty = [i for i, v in enumerate(text_values, start=1) if v == ""]
    if text2_values is not None:
        empty.extend(i for i, v in enumerate(text2_values, start=1) if v == "")
    if empty:
        raise EmptyTextRows(sorted(set(empty)))
    records = []
    for i, text in enumerate(text_values, start=1):
        text2 = text2_values[i - 1] if text2_values is not None else None
        records.append(InputRecord(index=i, text=text, text2=text2))
    return records


def write_column(ref: SheetRef, column: str, values: Sequence[str]) -> None:
    """Create or overwrite one column, leaving all others untouched; writing
    the same values twice leaves the stored bytes unchanged."""
    _resolve_backend(ref).write_column(ref, column, values)


def table_to_csv_bytes(table: SheetTable) -> bytes:
    """Serialize a table in the canonical CSV dialect (job attachments)."""
    import io

    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow(table.columns)
    writer.writerows(table.rows)
    return buf.getvalue().encode("utf-8")
