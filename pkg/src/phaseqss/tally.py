"""Per-phase-triple detection tallies and their CSV form.

A tally maps ``(phi_a, phi_b, phi_c)`` (quarter turns) to four counts:
D1 only, D2 only, both, none.  Simulated and measured data share this
format, and the CSV schema is::

    phase_a,phase_b,phase_c,d1,d2[,both,none]

with phase tokens ``0``, ``pi/2``, ``pi`` or ``3pi/2``.  Lines starting with
``#`` are comments.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Iterator, Mapping
from typing import NamedTuple, TextIO

from phaseqss.protocol import parse_phase_token, phase_token

REQUIRED_COLUMNS = ("phase_a", "phase_b", "phase_c", "d1", "d2")
OPTIONAL_COLUMNS = ("both", "none")

Triple = tuple[int, int, int]


class CountsFormatError(ValueError):
    """Malformed counts CSV; the message names the offending line."""


class Counts(NamedTuple):
    d1: int = 0
    d2: int = 0
    both: int = 0
    none: int = 0

    def __add__(self, other: "Counts") -> "Counts":  # type: ignore[override]
        return Counts(*(a + b for a, b in zip(self, other)))

    @property
    def clicks(self) -> int:
        return self.d1 + self.d2 + self.both

    @property
    def total(self) -> int:
        return self.d1 + self.d2 + self.both + self.none


class TallyTable(Mapping[Triple, Counts]):
    """Immutable mapping from phase triple to :class:`Counts`."""

    def __init__(self, entries: Mapping[Triple, Iterable[int]] | None = None):
        self._entries: dict[Triple, Counts] = {}
        for triple, counts in (entries or {}).items():
            counts = Counts(*(int(c) for c in counts))
            if min(counts) < 0:
                raise ValueError(f"negative count for triple {triple}: {counts}")
            self._entries[tuple(int(p) for p in triple)] = counts

    def __getitem__(self, triple: Triple) -> Counts:
        return self._entries[tuple(triple)]

    def __iter__(self) -> Iterator[Triple]:
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TallyTable):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        return f"TallyTable({len(self)} triples, {self.total_rounds} rounds)"

    def merge(self, other: "TallyTable") -> "TallyTable":
        merged = dict(self._entries)
        for triple, counts in other.items():
            merged[triple] = merged.get(triple, Counts()) + counts
        return TallyTable(merged)

    __add__ = merge

    @property
    def total_rounds(self) -> int:
        return sum(c.total for c in self._entries.values())

    @property
    def total_clicks(self) -> int:
        return sum(c.clicks for c in self._entries.values())

    def to_csv(self, out: TextIO | None = None, header: Iterable[str] = ()) -> str:
        """Write the tally as counts CSV; returns the text written."""
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS + OPTIONAL_COLUMNS)
        for triple in self:
            c = self[triple]
            writer.writerow([*(phase_token(p) for p in triple), c.d1, c.d2, c.both, c.none])
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


def parse_counts_csv(stream: TextIO | str) -> TallyTable:
    """Read a counts CSV into a :class:`TallyTable`.

    ``both`` and ``none`` columns are optional and default to zero.  Errors
    raise :class:`CountsFormatError` naming the 1-based line number.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header: list[str] | None = None
    entries: dict[Triple, Counts] = {}
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if header is None:
            header = [f.lower() for f in fields]
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            unknown = [c for c in header if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
            if missing or unknown:
                raise CountsFormatError(
                    f"line {lineno}: bad header (missing {missing}, unknown {unknown})"
                )
            continue
        if len(fields) != len(header):
            raise CountsFormatError(
                f"line {lineno}: expected {len(header)} fields, got {len(fields)}"
            )
        row = dict(zip(header, fields))
        try:
            triple = tuple(parse_phase_token(row[c]) for c in REQUIRED_COLUMNS[:3])
        except ValueError as exc:
            raise CountsFormatError(f"line {lineno}: {exc}") from None
        values = []
        for column in ("d1", "d2", "both", "none"):
            token = row.get(column, "0")
            try:
                value = int(token)
            except ValueError:
                raise CountsFormatError(f"line {lineno}: {column}={token!r} is not an integer") from None
            if value < 0:
                raise CountsFormatError(f"line {lineno}: negative count {column}={value}")
            values.append(value)
        if triple in entries:
            raise CountsFormatError(
                f"line {lineno}: duplicate triple {','.join(row[c] for c in REQUIRED_COLUMNS[:3])}"
            )
        entries[triple] = Counts(*values)
    return TallyTable(entries)
