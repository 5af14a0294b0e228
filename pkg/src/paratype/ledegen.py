"""Crime-story lede generation: parse police-report records, resolve MO codes
against a code table, bin codes into semantic clusters, fill per-crime-type
templates, and score generated ledes by n-gram overlap."""

from __future__ import annotations

import csv
import datetime
import json
import re
from dataclasses import dataclass

from .corpus import tokenize
from .errors import ParseError, ValidationError

CODE_RE = re.compile(r"^[0-9]{4}$")
SLOT_RE = re.compile(r"<([^<>]+)>")

RECOGNIZED_SLOTS = frozenset(
    {
        "suspect description",
        "crime type verb",
        "victim description",
        "location indicator",
        "location description",
        "other details",
        "damage-value bracket",
    }
)

CLUSTER_NAMES = (
    "suspect behavior",
    "suspect details",
    "victim details",
    "bias",
    "action",
    "other",
)


@dataclass(frozen=True)
class CrimeReport:
    """One police-report record; optional fields are None when absent."""

    id: str
    crime_type: str
    location: str = ""
    codes: tuple[str, ...] = ()
    victim_age: int | None = None
    victim_descent: str | None = None
    victim_sex: str | None = None
    date: datetime.date | None = None
    damage_value: str | None = None

    def __post_init__(self) -> None:
        if not self.crime_type:
            raise ValidationError(f"report {self.id!r} has empty crime_type")
        for code in self.codes:
            if not CODE_RE.match(code):
                raise ValidationError(
                    f"report {self.id!r} has malformed code {code!r}"
                )


@dataclass(frozen=True)
class CodeEntry:
    description: str
    category: str = ""


@dataclass(frozen=True)
class CodeTable:
    """MO code -> (description, category) reference."""

    entries: dict[str, CodeEntry]

    def __contains__(self, code: str) -> bool:
        return code in self.entries

    def get(self, code: str) -> CodeEntry | None:
        return self.entries.get(code)


@dataclass(frozen=True)
class ClusterRule:
    name: str
    keywords: tuple[str, ...]


@dataclass(frozen=True)
class CodeClusterConfig:
    """Ordered keyword rules binning codes into named clusters; matching is
    first rule whose any keyword substring-matches the lowercased
    description or category."""

    rules: tuple[ClusterRule, ...]

    def __post_init__(self) -> None:
        seen = set()
        for rule in self.rules:
            if rule.name not in CLUSTER_NAMES:
                raise ValidationError(f"unknown cluster name {rule.name!r}")
            if rule.name in seen:
                raise ValidationError(f"duplicate cluster name {rule.name!r}")
            seen.add(rule.name)
            for kw in rule.keywords:
                if kw != kw.lower():
                    raise ValidationError(f"keyword {kw!r} is not lowercase")

    @property
    def cluster_names(self) -> tuple[str, ...]:
        names = [r.name for r in self.rules]
        if "other" not in names:
            names.append("other")
        return tuple(names)


@dataclass(frozen=True)
class TemplateSet:
    """crime_type -> template text with <slot-name> markers."""

    by_type: dict[str, str]

    def __post_init__(self) -> None:
        for crime_type, text in self.by_type.items():
            residue = SLOT_RE.sub("", text)
            if "<" in residue or ">" in residue:
                raise ValidationError(
                    f"template for {crime_type!r} has malformed slot markers"
                )
            for slot in SLOT_RE.findall(text):
                if slot not in RECOGNIZED_SLOTS:
                    raise ValidationError(
                        f"template for {crime_type!r} uses unknown slot {slot!r}"
                    )

    def text_for(self, crime_type: str) -> str:
        try:
            return self.by_type[crime_type]
        except KeyError:
            raise ValidationError(
                f"no template for crime type {crime_type!r}"
            ) from None


@dataclass(frozen=True)
class LedeResult:
    """A generated lede: text, what filled each slot, what could not be
    filled (markers left in place), and any warnings hit on the way."""

    text: str
    filled: dict[str, str]
    unfilled: tuple[str, ...]
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class ParsedReports:
    reports: tuple[CrimeReport, ...]
    errors: tuple[tuple[int, str], ...]  # (file line number, message)


REPORT_COLUMNS = (
    "id",
    "crime_type",
    "location",
    "codes",
    "victim_age",
    "victim_descent",
    "victim_sex",
    "date",
    "damage_value",
)


def parse_reports(path: str) -> ParsedReports:
    """Read crime reports from CSV. Malformed rows are skipped and collected
    as (line number, message) pairs rather than aborting the batch."""
    reports: list[CrimeReport] = []
    errors: list[tuple[int, str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"reports file {path} is empty")
        missing = [c for c in REPORT_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"reports file {path} lacks columns: {', '.join(missing)}")
        for row in reader:
            lineno = reader.line_num
            try:
                reports.append(_parse_report_row(row))
            except ValidationError as exc:
                errors.append((lineno, str(exc)))
    return ParsedReports(reports=tuple(reports), errors=tuple(errors))


def _parse_report_row(row: dict[str, str]) -> CrimeReport:
    def opt(name: str) -> str | None:
        value = (row.get(name) or "").strip()
        return value or None

    report_id = (row.get("id") or "").strip()
    if not report_id:
        raise ValidationError("missing id")
    crime_type = (row.get("crime_type") or "").strip()
    if not crime_type:
        raise ValidationError("missing crime_type")
    codes = tuple((row.get("codes") or "").split())
    for code in codes:
        if not CODE_RE.match(code):
            raise ValidationError(f"malformed code {code!r}")
    age = None
    if opt("victim_age") is not None:
        try:
            age = int(opt("victim_age"))
        except ValueError:
            raise ValidationError(f"invalid victim_age {opt('victim_age')!r}") from None
        if age < 0:
            raise ValidationError(f"negative victim_age {age}")
    date = None
    if opt("date") is not None:
        try:
            date = datetime.date.fromisoformat(opt("date"))
        except ValueError:
            raise ValidationError(f"invalid date {opt('date')!r}") from None
    return CrimeReport(
        id=report_id,
        crime_type=crime_type,
        location=(row.get("location") or "").strip(),
        codes=codes,
        victim_age=age,
        victim_descent=opt("victim_descent"),
        victim_sex=opt("victim_sex"),
        date=date,
        damage_value=opt("damage_value"),
    )


def load_code_table(path: str) -> CodeTable:
    """CSV columns: code, description, category. Duplicate codes are an error."""
    entries: dict[str, CodeEntry] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"code table {path} is empty")
        for col in ("code", "description"):
            if col not in reader.fieldnames:
                raise ParseError(f"code table {path} lacks column {col!r}")
        for row in reader:
            code = (row.get("code") or "").strip()
            if not code:
                raise ParseError(f"code table {path} line {reader.line_num}: empty code")
            if code in entries:
                raise ValidationError(f"duplicate code {code!r} in table")
            entries[code] = CodeEntry(
                description=(row.get("description") or "").strip(),
                category=(row.get("category") or "").strip(),
            )
    return CodeTable(entries=entries)


@dataclass(frozen=True)
class CodeClusters:
    """cluster name -> ordered (code, description) entries, plus warnings
    for codes the table could not resolve."""

    by_cluster: dict[str, tuple[tuple[str, str], ...]]
    warnings: tuple[str, ...]


def cluster_codes(
    report: CrimeReport, table: CodeTable, config: CodeClusterConfig
) -> CodeClusters:
    """Assign each report code to the first cluster whose keyword matches the
    code's description or category; unknown codes land in "other" with a
    warning."""
    buckets: dict[str, list[tuple[str, str]]] = {
        name: [] for name in config.cluster_names
    }
    warnings: list[str] = []
    for code in report.codes:
        entry = table.get(code)
        if entry is None:
            buckets["other"].append((code, ""))
            warnings.append(f"unknown code {code}")
            continue
        desc = entry.description.lower()
        cat = entry.category.lower()
        for rule in config.rules:
            if any(kw in desc or kw in cat for kw in rule.keywords):
                buckets[rule.name].append((code, entry.description))
                break
        else:
            buckets["other"].append((code, entry.description))
    return CodeClusters(
        by_cluster={name: tuple(v) for name, v in buckets.items()},
        warnings=tuple(warnings),
    )


def _victim_description(report: CrimeReport, clusters: CodeClusters) -> str:
    # "the {age}-year-old {descent} {disabled} {sex} victim", absent parts
    # elided; the disability marker comes from the victim-details cluster
    parts = []
    if report.victim_age is not None:
        parts.append(f"{report.victim_age}-year-old")
    if report.victim_descent:
        parts.append(report.victim_descent)
    victim_details = clusters.by_cluster.get("victim details", ())
    if any(
        "handicap" in desc.lower() or "disabilit" in desc.lower()
        for _, desc in victim_details
    ):
        parts.append("disabled")
    if report.victim_sex:
        parts.append(report.victim_sex)
    parts.append("victim")
    return "the " + " ".join(parts)


_SPACE_RUN_RE = re.compile(r"\s+")
_SPACE_BEFORE_PUNCT_RE = re.compile(r"\s+([,.;:!?])")


def _normalize(text: str) -> str:
    text = _SPACE_RUN_RE.sub(" ", text).strip()
    return _SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)


def fill_slots(
    report: CrimeReport,
    template: TemplateSet,
    table: CodeTable,
    config: CodeClusterConfig,
    verb_lookup: dict[str, str],
    fallback_spans: dict[tuple[str, str], str],
) -> LedeResult:
    """Fill the crime type's template from the report.

    Slot sources: crime type verb from verb_lookup; victim description
    composed from age/descent/disability/sex; location description from the
    report's location; other details joined from the suspect-behavior
    cluster descriptions; damage-value bracket from the report. A slot with
    no source falls back to fallback_spans[(crime_type, slot)]; still-empty
    slots stay as markers and are listed unfilled.
    """
    text = template.text_for(report.crime_type)
    clusters = cluster_codes(report, table, config)
    warnings = list(clusters.warnings)

    behavior = [
        desc for _, desc in clusters.by_cluster.get("suspect behavior", ()) if desc
    ]
    candidates: dict[str, str | None] = {
        "crime type verb": verb_lookup.get(report.crime_type),
        "victim description": _victim_description(report, clusters),
        "location description": report.location or None,
        "other details": ", ".join(behavior) if behavior else None,
        "damage-value bracket": report.damage_value,
        "suspect description": None,
        "location indicator": None,
    }

    filled: dict[str, str] = {}
    unfilled: list[str] = []
    for slot in dict.fromkeys(SLOT_RE.findall(text)):
        value = candidates.get(slot)
        if value is None:
            value = fallback_spans.get((report.crime_type, slot))
        if value is None:
            unfilled.append(slot)
            continue
        filled[slot] = value
        text = text.replace(f"<{slot}>", value)

    return LedeResult(
        text=_normalize(text),
        filled=filled,
        unfilled=tuple(unfilled),
        warnings=tuple(warnings),
    )


def longest_common_span(ledes: list[str]) -> str:
    """Longest contiguous token run present in every lede; ties go to the
    earliest occurrence in the first lede; no common token gives ""."""
    if len(ledes) < 2:
        raise ValidationError("need at least 2 ledes")
    token_lists = [tokenize(text) for text in ledes]
    first = token_lists[0]

    def contains(haystack: list[str], needle: list[str]) -> bool:
        n = len(needle)
        return any(haystack[i:i + n] == needle for i in range(len(haystack) - n + 1))

    for length in range(len(first), 0, -1):
        for start in range(len(first) - length + 1):
            span = first[start:start + length]
            if all(contains(other, span) for other in token_lists[1:]):
                return " ".join(span)
    return ""


def _ngrams(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)}


def ngram_overlap(generated: str, truth: str, n: int) -> float:
    """Acc = |ngrams(generated) ∩ ngrams(truth)| / |ngrams(truth)| with set
    semantics, over the shared tokenizer's output."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    truth_grams = _ngrams(tokenize(truth), n)
    if not truth_grams:
        raise ValidationError(f"truth text yields no {n}-grams")
    gen_grams = _ngrams(tokenize(generated), n)
    return len(gen_grams & truth_grams) / len(truth_grams)


@dataclass(frozen=True)
class EvaluationResult:
    """Macro-averaged overlap: per-crime-type means plus their unweighted mean."""

    per_type: tuple[tuple[str, float], ...]  # sorted by crime_type
    overall: float
    n: int


def evaluate_corpus(
    pairs: list[tuple[str, str, str]], n: int
) -> EvaluationResult:
    """pairs are (crime_type, generated, truth). Accuracy is averaged within
    each crime type, then across types with equal weight."""
    if not pairs:
        raise ValidationError("no pairs to evaluate")
    by_type: dict[str, list[float]] = {}
    for idx, (crime_type, generated, truth) in enumerate(pairs):
        try:
            acc = ngram_overlap(generated, truth, n)
        except ValidationError as exc:
            raise ValidationError(f"pair {idx}: {exc}") from None
        by_type.setdefault(crime_type, []).append(acc)
    per_type = tuple(
        (crime_type, sum(accs) / len(accs))
        for crime_type, accs in sorted(by_type.items())
    )
    overall = sum(mean for _, mean in per_type) / len(per_type)
    return EvaluationResult(per_type=per_type, overall=overall, n=n)


# -- config + file formats ----------------------------------------------

LEDE_CONFIG_VERSION = 1


@dataclass(frozen=True)
class LedeConfig:
    """Everything data-driven about generation, from one JSON file."""

    templates: TemplateSet
    verbs: dict[str, str]
    clusters: CodeClusterConfig
    fallback_spans: dict[tuple[str, str], str]


def load_lede_config(path: str) -> LedeConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"lede config {path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict) or payload.get("version") != LEDE_CONFIG_VERSION:
        raise ParseError(f"lede config {path}: unknown or missing version")
    try:
        templates = TemplateSet(by_type=dict(payload["templates"]))
        verbs = dict(payload.get("verbs", {}))
        rules = tuple(
            ClusterRule(name=r["name"], keywords=tuple(r["keywords"]))
            for r in payload.get("clusters", [])
        )
        fallback = {
            (crime_type, slot): span
            for crime_type, slots in payload.get("fallback_spans", {}).items()
            for slot, span in slots.items()
        }
    except (KeyError, TypeError) as exc:
        raise ParseError(f"lede config {path}: malformed field ({exc})") from exc
    return LedeConfig(
        templates=templates,
        verbs=verbs,
        clusters=CodeClusterConfig(rules=rules),
        fallback_spans=fallback,
    )


def write_ledes_jsonl(
    items: list[tuple[CrimeReport, LedeResult]], path: str
) -> None:
    """One canonical JSON object per report: id, text, filled, unfilled, warnings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for report, result in items:
            record = {
                "id": report.id,
                "crime_type": report.crime_type,
                "text": result.text,
                "filled": result.filled,
                "unfilled": list(result.unfilled),
                "warnings": list(result.warnings),
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def write_eval_csv(result: EvaluationResult, path: str) -> None:
    """Per-type rows (crime_type, n, mean_acc) then an overall line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("crime_type,n,mean_acc\n")
        for crime_type, mean in result.per_type:
            fh.write(f"{_csv_field(crime_type)},{result.n},{float(mean)!r}\n")
        fh.write(f"overall,{result.n},{float(result.overall)!r}\n")


def _csv_field(value: str) -> str:
    if any(c in value for c in ",\"\n"):
        return '"' + value.replace('"', '""') + '"'
    return value
