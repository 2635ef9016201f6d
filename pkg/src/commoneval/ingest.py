"""Readers and writers for run, qrels, category, ratings and report files.

Run files use the TREC layout ``user Q0 item rank score tag``; qrels use
``user 0 item grade``; categories are ``item<TAB>category`` TSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from array import array
from collections import defaultdict
from typing import IO, Iterable, Iterator, Optional, Union

from .errors import ParseError
from .model import CategoryIndex, MetricReport, Qrels, Ranking, ReportRow, RunSet

TextSource = Union[IO[str], Iterable[str], str]

REPORT_HEADER = ("system", "metric", "category", "value", "log_value")


def atomic_write(path: str, text: Union[str, Iterable[str]]) -> None:
    """Write ``text`` (a string or an iterable of chunks) via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            if isinstance(text, str):
                fh.write(text)
            else:
                fh.writelines(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _lines(source: TextSource) -> Iterator[tuple[int, str]]:
    if isinstance(source, str):
        source = io.StringIO(source)
    for lineno, line in enumerate(source, start=1):
        yield lineno, line.rstrip("\r\n")


def _name(source) -> Optional[str]:
    return getattr(source, "name", None)


def _number(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("nan")
    return value


class _UserRecords:
    """Column store for one (tag, user): about 32 bytes per record."""

    __slots__ = ("items", "scores", "ranks", "lines")

    def __init__(self):
        self.items: list[str] = []
        self.scores = array("d")
        self.ranks = array("q")
        self.lines = array("q")

    def order(self) -> list[int]:
        s = self.scores
        if all(s[j] > s[j + 1] for j in range(len(s) - 1)):
            return list(range(len(s)))
        items, ranks = self.items, self.ranks
        return sorted(range(len(s)), key=lambda j: (-s[j], ranks[j], items[j]))

    def first_duplicate(self) -> Optional[tuple[str, int]]:
        if len(set(self.items)) == len(self.items):
            return None
        seen = set()
        for item, line in zip(self.items, self.lines):
            if item in seen:
                return item, line
            seen.add(item)
        return None  # unreachable


def parse_run_file(source: TextSource) -> list[RunSet]:
    """Parse a TREC run file into one :class:`RunSet` per tag, sorted by tag.

    Within a user, items are ordered by descending score, then ascending rank
    field, then item id. The rank field is otherwise ignored.
    """
    name = _name(source)
    records: dict[str, dict[str, _UserRecords]] = defaultdict(lambda: defaultdict(_UserRecords))
    strings: dict[str, str] = {}
    for lineno, line in _lines(source):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", lineno, name)
        user, _q0, item, rank, score, tag = fields
        try:
            rank_value = int(rank)
        except ValueError:
            raise ParseError(f"non-integer rank {rank!r}", lineno, name) from None
        try:
            score_value = _number(score)
        except ValueError:
            raise ParseError(f"non-numeric score {score!r}", lineno, name) from None
        rec = records[tag][user]
        rec.items.append(strings.setdefault(item, item))
        rec.scores.append(score_value)
        rec.ranks.append(rank_value)
        rec.lines.append(lineno)

    duplicates = []
    for tag, users in records.items():
        for user, rec in users.items():
            dup = rec.first_duplicate()
            if dup:
                duplicates.append((dup[1], tag, user, dup[0]))
    if duplicates:
        lineno, tag, user, item = min(duplicates)
        raise ParseError(f"duplicate record for tag {tag} user {user} item {item}", lineno, name)

    runs = []
    for tag in sorted(records):
        rankings = {}
        for user, rec in records[tag].items():
            items = rec.items
            rankings[user] = Ranking(user, tuple(items[j] for j in rec.order()))
        records[tag] = {}
        runs.append(RunSet(tag, rankings))
    return runs


def iter_run_file(runs: Iterable[RunSet]) -> Iterator[str]:
    """Run-file text in chunks of one user's ranking."""
    for run in sorted(runs, key=lambda r: r.system_name):
        tag = run.system_name
        for user in run.users:
            items = run.rankings[user].items
            depth = len(items)
            yield "".join(
                f"{user} Q0 {item} {rank} {depth - rank + 1} {tag}\n" for rank, item in enumerate(items, start=1)
            )


def write_run_file(runs: Iterable[RunSet]) -> str:
    """Serialize runs so that :func:`parse_run_file` recovers the same item order.

    The score column is ``depth - rank + 1``, so scores strictly decrease down
    each ranking.
    """
    return "".join(iter_run_file(runs))


def parse_qrels(source: TextSource) -> Qrels:
    """Parse ``user 0 item grade`` lines. A repeated ``(user, item)`` keeps the last grade."""
    name = _name(source)
    judgments: dict[tuple[str, str], int] = {}
    for lineno, line in _lines(source):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", lineno, name)
        user, _iter, item, grade = fields
        try:
            value = int(grade)
        except ValueError:
            raise ParseError(f"non-integer grade {grade!r}", lineno, name) from None
        if value < 0:
            raise ParseError(f"negative grade {value}", lineno, name)
        judgments[(user, item)] = value
    return Qrels(judgments)


def write_qrels(qrels: Qrels) -> str:
    out = io.StringIO()
    for (user, item), grade in sorted(qrels.judgments.items()):
        out.write(f"{user} 0 {item} {grade}\n")
    return out.getvalue()


def binarize(qrels: Qrels, threshold: int) -> Qrels:
    """Map grades to 1 when ``grade >= threshold`` and to 0 otherwise."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    return Qrels({key: int(grade >= threshold) for key, grade in qrels.judgments.items()})


def parse_categories(source: TextSource, catalog=None) -> CategoryIndex:
    """Parse ``item<TAB>category`` lines into a :class:`CategoryIndex`."""
    name = _name(source)
    cats: dict[str, set[str]] = defaultdict(set)
    for lineno, line in _lines(source):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise ParseError("expected 'item<TAB>category'", lineno, name)
        item, label = fields[0].strip(), fields[1].strip()
        if any(ch.isspace() for ch in item):
            raise ParseError(f"item id contains whitespace: {item!r}", lineno, name)
        cats[label].add(item)
    if not cats:
        raise ParseError("no categories", None, name)
    return CategoryIndex({label: frozenset(items) for label, items in cats.items()}, catalog)


def write_categories(index: CategoryIndex) -> str:
    out = io.StringIO()
    for label in index.labels:
        for item in sorted(index[label]):
            out.write(f"{item}\t{label}\n")
    return out.getvalue()


def parse_ratings(source: TextSource) -> list[tuple[str, str, int, Optional[int]]]:
    """Parse rating triples, ``user::item::rating::timestamp`` or CSV.

    The separator is detected from the first data line. A CSV header whose
    rating column is non-numeric is skipped. Repeated ``(user, item)`` pairs
    keep the last occurrence, at the position of the first.
    """
    name = _name(source)
    ratings: dict[tuple[str, str], tuple[int, Optional[int]]] = {}
    sep = None
    for lineno, line in _lines(source):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if sep is None:
            sep = "::" if "::" in stripped else ","
            if sep == ",":
                head = next(csv.reader([stripped]))
                if len(head) >= 3 and not head[2].strip().lstrip("-").isdigit():
                    continue
        fields = stripped.split("::") if sep == "::" else next(csv.reader([stripped]))
        fields = [f.strip() for f in fields]
        if len(fields) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(fields)}", lineno, name)
        user, item, grade = fields[:3]
        if not user or not item:
            raise ParseError("empty user or item id", lineno, name)
        try:
            value = int(float(grade)) if "." in grade else int(grade)
        except ValueError:
            raise ParseError(f"non-numeric rating {grade!r}", lineno, name) from None
        if not 1 <= value <= 5:
            raise ParseError(f"rating {value} outside [1, 5]", lineno, name)
        stamp = None
        if len(fields) == 4 and fields[3]:
            try:
                stamp = int(fields[3])
            except ValueError:
                raise ParseError(f"non-integer timestamp {fields[3]!r}", lineno, name) from None
        ratings[(user, item)] = (value, stamp)
    return [(u, i, g, t) for (u, i), (g, t) in ratings.items()]


def ratings_to_qrels(ratings: Iterable[tuple]) -> Qrels:
    return Qrels({(r[0], r[1]): int(r[2]) for r in ratings})


# -- reports -----------------------------------------------------------------


def format_value(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == 0:
        return "0"
    return f"{value:.6g}"


def format_log(value: Optional[float]) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.4f}"
    return "0.0000" if text == "-0.0000" else text


def _metadata_lines(meta: dict) -> list[str]:
    return [f"# {key}={json.dumps(meta[key], sort_keys=True)}" for key in sorted(meta)]


def write_report(report: MetricReport, fmt: str = "csv") -> str:
    """Serialize a report deterministically as CSV or JSON.

    Rows are sorted by (metric, system, category). CSV prefixes metadata as
    ``# key=<json>`` comment lines; an empty report with no metadata is the
    header line alone.
    """
    rows = sorted(report.rows, key=ReportRow.sort_key)
    fmt = fmt.lower()
    if fmt == "csv":
        out = io.StringIO()
        for line in _metadata_lines(report.metadata):
            out.write(line + "\n")
        out.write(",".join(REPORT_HEADER) + "\n")
        for row in rows:
            out.write(
                ",".join(
                    [
                        row.system,
                        row.metric,
                        row.category or "",
                        format_value(row.value),
                        format_log(row.log_value),
                    ]
                )
                + "\n"
            )
        return out.getvalue()
    if fmt == "json":
        payload = {
            "metadata": report.metadata,
            "rows": [
                {
                    "system": row.system,
                    "metric": row.metric,
                    "category": row.category,
                    "value": format_value(row.value),
                    "log_value": format_log(row.log_value) or None,
                    **({"underflow": True} if row.underflow else {}),
                }
                for row in rows
            ],
            "orderings": {m: report.orderings[m] for m in sorted(report.orderings)},
            "correlations": [
                {"a": a, "b": b, "tau": round(t, 6), "p_value": round(p, 6)}
                for (a, b), (t, p) in sorted(report.correlations.items())
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def _parse_float(text: str) -> float:
    return float(text)


def parse_report(source: TextSource) -> MetricReport:
    """Read a report written by :func:`write_report` (CSV or JSON, auto-detected)."""
    if not isinstance(source, str):
        source = "".join(source)
    name = None
    if source.lstrip().startswith("{"):
        payload = json.loads(source)
        rows = [
            ReportRow(
                r["system"],
                r["metric"],
                r.get("category"),
                _parse_float(r["value"]),
                None if r.get("log_value") in (None, "") else _parse_float(r["log_value"]),
            )
            for r in payload.get("rows", [])
        ]
        return MetricReport(rows=rows, metadata=payload.get("metadata", {}))
    meta = {}
    rows = []
    header_seen = False
    for lineno, line in _lines(source):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            try:
                meta[key] = json.loads(value)
            except json.JSONDecodeError:
                raise ParseError(f"bad metadata line {line!r}", lineno, name) from None
            continue
        fields = line.split(",")
        if not header_seen:
            if tuple(fields) != REPORT_HEADER:
                raise ParseError(f"expected header {','.join(REPORT_HEADER)}", lineno, name)
            header_seen = True
            continue
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", lineno, name)
        system, metric, category, value, log_value = fields
        try:
            rows.append(
                ReportRow(
                    system,
                    metric,
                    category or None,
                    _parse_float(value),
                    _parse_float(log_value) if log_value else None,
                )
            )
        except ValueError:
            raise ParseError("non-numeric value", lineno, name) from None
    if not header_seen:
        raise ParseError("missing report header", None, name)
    return MetricReport(rows=rows, metadata=meta)
