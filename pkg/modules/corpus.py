"""
Bibliographic corpus: AMiner parsing, cleaning, frozen snapshots and temporal splits
"""
import gzip
import io
import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules import storage
from modules.config import CASES, CaseWindow
from modules.errors import ConfigError, DataError, ParseError, UnknownPaperError

MISSING_AFFILIATION = "NaN"
DEFAULT_PRODUCTIVITY_CAP = 1000
SNAPSHOT_KIND = "corpus-snapshot"

_PREFIXES = ("#index", "#*", "#@", "#o", "#t", "#c", "#%", "#!")


@dataclass(frozen=True)
class PaperRecord:
    id: str
    title: str = ""
    abstract: str = ""
    authors: Tuple[str, ...] = ()
    affiliations: Tuple[str, ...] = ()
    venue: str = ""
    year: int = 0
    references: Tuple[str, ...] = ()


def record_to_dict(record: PaperRecord) -> dict:
    data = asdict(record)
    for key in ("authors", "affiliations", "references"):
        data[key] = list(data[key])
    return data


def record_from_dict(data: dict) -> PaperRecord:
    return PaperRecord(
        id=str(data["id"]),
        title=data.get("title") or "",
        abstract=data.get("abstract") or "",
        authors=tuple(data.get("authors") or ()),
        affiliations=tuple(data.get("affiliations") or ()),
        venue=data.get("venue") or "",
        year=int(data["year"]),
        references=tuple(str(r) for r in data.get("references") or ()),
    )


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    record_index: int
    kind: str
    message: str
    skipped: bool = False

    def __str__(self) -> str:
        action = " (record skipped)" if self.skipped else ""
        return f"line {self.line}: {self.message}{action}"


@dataclass
class ParseResult:
    records: List[PaperRecord] = field(default_factory=list)
    diagnostics: List[ParseDiagnostic] = field(default_factory=list)
    skipped: int = 0


@dataclass
class _Block:
    """Raw fields of one record block while it is being read"""

    index: int
    start_line: int
    paper_id: Optional[str] = None
    title: str = ""
    abstract: str = ""
    authors: str = ""
    affiliations: Optional[str] = None
    venue: str = ""
    year_text: Optional[str] = None
    year_line: int = 0
    references: List[Tuple[str, int]] = field(default_factory=list)
    last_prefix: str = ""


def _iter_text_lines(stream: Union[BinaryIO, bytes]) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    try:
        for raw in stream:
            if isinstance(raw, bytes):
                raw = raw.decode("utf-8", errors="replace")
            yield raw.rstrip("\r\n")
    except OSError as e:
        raise ParseError(f"stream read failure: {e}") from e


def _add_line(block: _Block, line: str, lineno: int, diagnostics: List[ParseDiagnostic]):
    for prefix in _PREFIXES:
        if line.startswith(prefix):
            value = line[len(prefix):].strip()
            break
    else:
        if block.last_prefix == "#!":
            block.abstract = f"{block.abstract} {line.strip()}".strip()
        else:
            diagnostics.append(ParseDiagnostic(lineno, block.index, "unknown_line", f"unrecognised line {line[:40]!r}"))
        return
    block.last_prefix = prefix
    if prefix == "#index":
        block.paper_id = value
    elif prefix == "#*":
        block.title = value
    elif prefix == "#@":
        block.authors = value
    elif prefix == "#o":
        block.affiliations = value
    elif prefix == "#t":
        block.year_text = value
        block.year_line = lineno
    elif prefix == "#c":
        block.venue = value
    elif prefix == "#%":
        if value:
            block.references.append((value, lineno))
    elif prefix == "#!":
        block.abstract = value


def _split_names(value: str) -> Tuple[str, ...]:
    return tuple(name.strip() for name in value.split(";") if name.strip())


def _finish_block(block: _Block, seen: set, result: ParseResult):
    def skip(line: int, kind: str, message: str):
        result.diagnostics.append(ParseDiagnostic(line, block.index, kind, message, skipped=True))
        result.skipped += 1

    if not block.paper_id:
        skip(block.start_line, "missing_id", "record has no #index line")
        return
    if block.year_text is None:
        skip(block.start_line, "missing_year", f"record {block.paper_id} has no #t line")
        return
    try:
        year = int(block.year_text)
    except ValueError:
        year = 0
    if year <= 0:
        skip(block.year_line, "malformed_year", f"record {block.paper_id} has malformed year {block.year_text!r}")
        return
    if block.paper_id in seen:
        skip(block.start_line, "duplicate_id", f"duplicate paper id {block.paper_id}")
        return

    references: List[str] = []
    duplicate_line = 0
    for ref, lineno in block.references:
        if ref == block.paper_id:
            result.diagnostics.append(
                ParseDiagnostic(lineno, block.index, "self_reference", f"record {ref} cites itself; reference dropped")
            )
        elif ref in references:
            duplicate_line = duplicate_line or lineno
        else:
            references.append(ref)
    if duplicate_line:
        result.diagnostics.append(
            ParseDiagnostic(
                duplicate_line, block.index, "duplicate_reference",
                f"record {block.paper_id} lists a reference more than once; deduplicated",
            )
        )

    affiliations = () if block.affiliations is None else tuple(a.strip() for a in block.affiliations.split(";"))
    seen.add(block.paper_id)
    result.records.append(
        PaperRecord(
            id=block.paper_id,
            title=block.title,
            abstract=block.abstract,
            authors=_split_names(block.authors),
            affiliations=affiliations,
            venue=block.venue,
            year=year,
            references=tuple(references),
        )
    )


def parse_aminer(stream: Union[BinaryIO, bytes]) -> ParseResult:
    """Parse AMiner v1 line-prefixed records

    Args:
        stream: binary stream (or bytes) of UTF-8 text; blank lines separate records
    """
    result = ParseResult()
    seen: set = set()
    block: Optional[_Block] = None
    blocks = 0
    for lineno, line in enumerate(_iter_text_lines(stream), start=1):
        if not line.strip():
            if block is not None:
                _finish_block(block, seen, result)
                block = None
            continue
        if block is None:
            block = _Block(index=blocks, start_line=lineno)
            blocks += 1
        _add_line(block, line, lineno, result.diagnostics)
    if block is not None:
        _finish_block(block, seen, result)
    return result


def parse_jsonl(stream: Union[BinaryIO, bytes]) -> ParseResult:
    """Parse the JSON-Lines mirror: one object per line with PaperRecord field names"""
    result = ParseResult()
    seen: set = set()
    index = 0
    for lineno, line in enumerate(_iter_text_lines(stream), start=1):
        if not line.strip():
            continue
        block = _Block(index=index, start_line=lineno, year_line=lineno)
        index += 1
        try:
            data = json.loads(line)
            block.paper_id = str(data["id"]) if data.get("id") not in (None, "") else None
            block.title = data.get("title") or ""
            block.abstract = data.get("abstract") or ""
            block.authors = ";".join(data.get("authors") or [])
            if data.get("affiliations") is not None:
                block.affiliations = ";".join(data["affiliations"])
            block.venue = data.get("venue") or ""
            block.year_text = None if data.get("year") is None else str(data["year"])
            block.references = [(str(r), lineno) for r in data.get("references") or []]
        except (ValueError, TypeError, AttributeError) as e:
            result.diagnostics.append(ParseDiagnostic(lineno, block.index, "malformed_json", str(e), skipped=True))
            result.skipped += 1
            continue
        _finish_block(block, seen, result)
    return result


def open_corpus(path: Path) -> ParseResult:
    """Read an AMiner or JSON-Lines corpus file, gzip-compressed or not"""
    path = Path(path)
    suffixes = [s for s in path.suffixes if s != ".gz"]
    is_jsonl = bool(suffixes) and suffixes[-1] in (".jsonl", ".json")
    try:
        with open(path, "rb") as f:
            head = f.read(2)
            f.seek(0)
            stream = gzip.GzipFile(fileobj=f) if head == b"\x1f\x8b" else f
            return parse_jsonl(stream) if is_jsonl else parse_aminer(stream)
    except OSError as e:
        raise DataError(f"cannot read corpus {path}: {e}") from e


def serialize_aminer(records: Iterable[PaperRecord]) -> str:
    blocks = []
    for r in records:
        lines = [f"#index {r.id}", f"#* {r.title}", f"#@ {';'.join(r.authors)}"]
        if r.affiliations:
            lines.append(f"#o {';'.join(r.affiliations)}")
        lines.append(f"#t {r.year}")
        lines.append(f"#c {r.venue}")
        lines.extend(f"#% {ref}" for ref in r.references)
        lines.append(f"#! {' '.join(r.abstract.split())}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


@dataclass
class CleanReport:
    total: int = 0
    kept: int = 0
    missing_author: int = 0
    missing_venue: int = 0
    anomalous_productivity: int = 0
    affiliations_filled: int = 0

    @property
    def dropped(self) -> int:
        return self.missing_author + self.missing_venue + self.anomalous_productivity

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _fill_affiliations(record: PaperRecord) -> PaperRecord:
    n = len(record.authors)
    current = list(record.affiliations[:n])
    filled = [a if a and a.strip() else MISSING_AFFILIATION for a in current]
    filled += [MISSING_AFFILIATION] * (n - len(filled))
    if tuple(filled) == record.affiliations:
        return record
    return replace(record, affiliations=tuple(filled))


def clean(records: Sequence[PaperRecord], productivity_cap: int = DEFAULT_PRODUCTIVITY_CAP) -> Tuple[List[PaperRecord], CleanReport]:
    """Apply the data-preparation rules; cleaning never fails

    Rows without authors or venue are dropped, missing affiliations become the
    NaN marker, and every record of an author-year above the productivity cap
    is removed. Each dropped record is counted once, under the first rule it
    fails in the order missing_author, missing_venue, anomalous_productivity,
    so kept + dropped always equals total.
    """
    report = CleanReport(total=len(records))
    present: List[PaperRecord] = []
    for r in records:
        if not r.authors:
            report.missing_author += 1
        elif not r.venue.strip():
            report.missing_venue += 1
        else:
            present.append(r)

    per_author_year: Counter = Counter()
    for r in present:
        for author in set(r.authors):
            per_author_year[(author, r.year)] += 1
    offending = {key for key, n in per_author_year.items() if n > productivity_cap}

    kept: List[PaperRecord] = []
    for r in present:
        if offending and any((a, r.year) in offending for a in r.authors):
            report.anomalous_productivity += 1
            continue
        filled = _fill_affiliations(r)
        if filled is not r:
            report.affiliations_filled += 1
        kept.append(filled)
    report.kept = len(kept)
    return kept, report


@dataclass(frozen=True)
class AuthorEntry:
    paper_id: str
    year: int
    position: int


@dataclass(frozen=True)
class CorpusSnapshot:
    """Cleaned corpus frozen at a cutoff year; read-only after construction"""

    papers: Dict[str, PaperRecord]
    cutoff_year: int
    citers: Dict[str, FrozenSet[str]]
    author_index: Dict[str, Tuple[AuthorEntry, ...]]
    venue_index: Dict[str, Tuple[str, ...]]

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers

    def __len__(self) -> int:
        return len(self.papers)

    def record(self, paper_id: str) -> PaperRecord:
        try:
            return self.papers[paper_id]
        except KeyError:
            raise UnknownPaperError(paper_id) from None

    def restrict(self, cutoff_year: int) -> "CorpusSnapshot":
        return build_snapshot(list(self.papers.values()), cutoff_year)

    @cached_property
    def _counts(self) -> Dict[str, int]:
        return {pid: len(c) for pid, c in self.citers.items()}

    def citation_counts(self) -> Dict[str, int]:
        """Citation count of every paper at the cutoff"""
        return self._counts


def build_snapshot(records: Sequence[PaperRecord], cutoff_year: int) -> CorpusSnapshot:
    records = list(records)
    if records and cutoff_year < min(r.year for r in records):
        raise ConfigError(f"cutoff year {cutoff_year} precedes every paper in the corpus")

    papers: Dict[str, PaperRecord] = {}
    for r in records:
        if r.year > cutoff_year:
            continue
        if r.id in papers:
            raise DataError(f"duplicate paper id {r.id} in snapshot input")
        papers[r.id] = r

    citing: Dict[str, List[str]] = {pid: [] for pid in papers}
    author_index: Dict[str, List[AuthorEntry]] = defaultdict(list)
    venue_index: Dict[str, List[str]] = defaultdict(list)
    for pid, r in papers.items():
        for ref in r.references:
            if ref in citing and ref != pid:
                citing[ref].append(pid)
        seen_authors = set()
        for position, author in enumerate(r.authors):
            if author in seen_authors:
                continue
            seen_authors.add(author)
            author_index[author].append(AuthorEntry(pid, r.year, position))
        if r.venue:
            venue_index[r.venue].append(pid)

    return CorpusSnapshot(
        papers=papers,
        cutoff_year=cutoff_year,
        citers={pid: frozenset(c) for pid, c in citing.items()},
        author_index={a: tuple(entries) for a, entries in author_index.items()},
        venue_index={v: tuple(ids) for v, ids in venue_index.items()},
    )


def citation_count(snapshot: CorpusSnapshot, paper_id: str, from_year: int, to_year: int) -> int:
    """Number of citers of paper_id published within [from_year, to_year]"""
    if paper_id not in snapshot.papers:
        raise UnknownPaperError(paper_id)
    if not from_year <= to_year <= snapshot.cutoff_year:
        raise ConfigError(
            f"window [{from_year}, {to_year}] must be ordered and end by the cutoff {snapshot.cutoff_year}"
        )
    papers = snapshot.papers
    return sum(1 for citer in snapshot.citers[paper_id] if from_year <= papers[citer].year <= to_year)


@dataclass(frozen=True)
class SplitSpec:
    case_label: str
    publication_window: Tuple[int, int]
    horizon_years: int
    train_ids: Tuple[str, ...]
    test_ids: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "case_label": self.case_label,
            "publication_window": list(self.publication_window),
            "horizon_years": self.horizon_years,
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
        }


TEST_FRACTION = 0.1


def temporal_split(
    snapshot: CorpusSnapshot, case_label: str, seed: int, window: Optional[CaseWindow] = None
) -> SplitSpec:
    """Shuffle the papers of a case's publication window and split them 90/10"""
    if window is None:
        if case_label not in CASES:
            raise ConfigError(f"unknown case {case_label!r}; choose from {sorted(CASES)}")
        window = CASES[case_label]
    in_window = sorted(
        (r.year, pid) for pid, r in snapshot.papers.items() if window.year_start <= r.year <= window.year_end
    )
    if not in_window:
        raise DataError(f"no papers published in {window.year_start}-{window.year_end} for case {case_label}")
    ids = [pid for _, pid in in_window]
    n = len(ids)
    n_test = int(np.floor(n * TEST_FRACTION + 0.5))
    if n_test == 0 and n >= 2:
        n_test = 1
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    return SplitSpec(
        case_label=case_label,
        publication_window=(window.year_start, window.year_end),
        horizon_years=window.horizon_years,
        train_ids=tuple(shuffled[n_test:]),
        test_ids=tuple(shuffled[:n_test]),
    )


def save_snapshot(snapshot: CorpusSnapshot, path: Path, report: Optional[CleanReport] = None) -> str:
    payload = {
        "cutoff_year": snapshot.cutoff_year,
        "records": [record_to_dict(r) for r in snapshot.papers.values()],
        "clean_report": report.to_dict() if report is not None else None,
    }
    return storage.write_artifact(path, SNAPSHOT_KIND, payload)


def load_snapshot(path: Path) -> Tuple[CorpusSnapshot, Optional[CleanReport]]:
    payload = storage.read_artifact(path, SNAPSHOT_KIND)
    records = [record_from_dict(d) for d in payload["records"]]
    report = CleanReport(**payload["clean_report"]) if payload.get("clean_report") else None
    return build_snapshot(records, payload["cutoff_year"]), report
