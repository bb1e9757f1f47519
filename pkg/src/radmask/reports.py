"""Report sectioning, cleaning, and conversion to model-ready text.

A raw report is split into named sections by line-initial headers
("FINDINGS:", "Reason for this examination:", ...). Section bodies keep
their offsets into the raw text so downstream consumers can always point
back at the source. Cleaning happens only when text leaves this module as
pretraining text or a summarization pair.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field

from radmask.errors import RadmaskError


class NoSectionsFound(RadmaskError):
    """Report contains no recognizable section header."""


class MissingFindings(RadmaskError):
    """No FINDINGS section, or it cleans to the empty string."""


class MissingImpression(RadmaskError):
    """No IMPRESSION section, or it cleans to the empty string."""


class NoRetainedSections(RadmaskError):
    """Nothing usable is left after section retention filtering."""


SOURCES = ("retrain-corpus", "finetune-corpus", "test-corpus")


@dataclass(frozen=True)
class RawReport:
    id: str
    text: str
    source: str = "retrain-corpus"


@dataclass(frozen=True)
class Section:
    """Named section; body == raw_text[start:end] (stripped slice)."""

    name: str
    body: str
    start: int
    end: int


@dataclass(frozen=True)
class SectionedReport:
    id: str
    sections: tuple[Section, ...]
    # Offset of the report-body banner line, when one exists. Sections at or
    # past this offset belong to the dictated report proper; the ones before
    # it are administrative preamble.
    final_banner_offset: int | None = field(default=None, compare=False)

    def named(self, name: str) -> list[Section]:
        return [s for s in self.sections if s.name == name]


# Header: line-initial run of at least two letters/spaces/slashes, then a
# colon. Case-insensitive; canonical name is uppercased and space-collapsed.
_HEADER_RE = re.compile(r"(?m)^[^\S\n]*([A-Za-z][A-Za-z /]+):")

# Banner material that breaks section bodies without starting one: the
# FINAL REPORT marker (no colon) and horizontal-rule separator lines.
_BANNER_RE = re.compile(r"(?mi)^[ \t]*(final[ \t]+report|[_\-=]{3,})[ \t]*$")

_BACKGROUND_ALIASES = frozenset({"BACKGROUND", "HISTORY", "INDICATION", "CLINICAL HISTORY"})

# Preamble sections that carry clinical signal and are kept even though they
# sit above the banner.
_PREAMBLE_RETAIN = frozenset(
    {"MEDICAL CONDITION", "UNDERLYING MEDICAL CONDITION", "REASON FOR THIS EXAMINATION"}
)

# Bannerless reports: retain recognizably clinical sections only.
_RETRAIN_SECTIONS = _PREAMBLE_RETAIN | frozenset(
    {
        "BACKGROUND",
        "HISTORY",
        "CLINICAL HISTORY",
        "INDICATION",
        "CLINICAL INDICATION",
        "COMPARISON",
        "TECHNIQUE",
        "EXAMINATION",
        "EXAM",
        "FINDINGS",
        "IMPRESSION",
        "CONCLUSION",
        "RECOMMENDATION",
        "RECOMMENDATIONS",
    }
)


def detect_sections(report: RawReport) -> SectionedReport:
    """Split a raw report into named sections.

    Every section body runs from its header's colon to the next header or
    banner line. Offsets index report.text exactly; header lines and banner
    lines themselves are discarded.
    """
    text = report.text
    headers = list(_HEADER_RE.finditer(text))
    if not headers:
        raise NoSectionsFound(f"report {report.id!r} has no section headers")

    banner_offset: int | None = None
    breaks = [m.start() for m in headers]
    for m in _BANNER_RE.finditer(text):
        breaks.append(m.start())
        if banner_offset is None and m.group(1).strip()[0] in "Ff":
            banner_offset = m.start()
    breaks.append(len(text))
    breaks.sort()

    sections = []
    for m in headers:
        name = " ".join(m.group(1).split()).upper()
        body_start = m.end()
        body_end = breaks[bisect.bisect_right(breaks, m.start())]
        raw = text[body_start:body_end]
        lead = len(raw) - len(raw.lstrip())
        body = raw.strip()
        start = body_start + lead
        sections.append(Section(name, body, start, start + len(body)))
    return SectionedReport(report.id, tuple(sections), banner_offset)


# Cleaning rules, applied in order. Each must be idempotent and the whole
# pipeline must be too (clean(clean(x)) == clean(x)).
_DEID_RE = re.compile(r"\[\*\*.*?\*\*\]", re.DOTALL)
_ILLEGAL_RE = re.compile(r"[^\x20-\x7e\n\t]")
_DATE_RE = re.compile(r"\b\d{1,2}/\d{1,2}/\d{2,4}\b")
_TIME_RE = re.compile(r"\b\d{1,2}:\d{2}\b")
# Embedded heading tokens: uppercase-only run + colon, not inside a word.
# Case-sensitive on purpose; "the following:" must survive.
_HEADING_RE = re.compile(r"(?<![A-Za-z])[A-Z][A-Z /]*[A-Z]:")
# Enumeration bullets ("1." / "2)") need whitespace on both sides so that
# decimals like "3.5 cm" are never touched.
_BULLET_RE = re.compile(r"(?:(?<=\s)|^)\d+[.)](?=\s)")
_WS_RE = re.compile(r"\s+")


def clean_text(text: str) -> str:
    """Scrub a section body down to plain single-spaced prose.

    Removes de-identification placeholders ([** ... **]), characters outside
    printable ASCII + newline/tab, slash dates and clock times, embedded
    uppercase heading tokens, and enumeration bullets; collapses all
    whitespace to single spaces and strips the ends. Deleting one artifact
    can splice a new one together ("1/2/" + "99" once the heading between
    them goes), so the passes repeat until the text stops changing; that is
    what makes clean(clean(x)) == clean(x) hold unconditionally.
    """
    prev = None
    while text != prev:
        prev = text
        text = _DEID_RE.sub("", text)
        text = _ILLEGAL_RE.sub("", text)
        text = _DATE_RE.sub("", text)
        text = _TIME_RE.sub("", text)
        text = _HEADING_RE.sub("", text)
        text = _BULLET_RE.sub("", text)
        text = _WS_RE.sub(" ", text).strip()
    return text


@dataclass(frozen=True)
class SummPair:
    id: str
    input_text: str
    target_text: str


def _joined_clean(sections: list[Section]) -> str:
    parts = [clean_text(s.body) for s in sections]
    return " ".join(p for p in parts if p)


def make_summ_pair(report: SectionedReport, include_background: bool = True) -> SummPair:
    """Findings(+background) -> impression summarization pair.

    Background-like sections (BACKGROUND, HISTORY, INDICATION, CLINICAL
    HISTORY) are optional and prepended to the input in document order.
    A findings or impression slot that is absent or cleans to nothing
    raises MissingFindings / MissingImpression.
    """
    findings = _joined_clean(report.named("FINDINGS"))
    if not findings:
        raise MissingFindings(f"report {report.id!r}")
    impression = _joined_clean(report.named("IMPRESSION"))
    if not impression:
        raise MissingImpression(f"report {report.id!r}")

    input_text = findings
    if include_background:
        background = _joined_clean(
            [s for s in report.sections if s.name in _BACKGROUND_ALIASES]
        )
        if background:
            input_text = background + " " + findings
    return SummPair(report.id, input_text, impression)


def make_retrain_text(report: SectionedReport) -> str:
    """Single cleaned string for masked-LM pretraining.

    With a banner: everything past it, plus the clinically useful preamble
    sections (medical condition / reason for examination). Without one: only
    sections on the clinical retain list. Raises NoRetainedSections when
    nothing non-empty survives.
    """
    if report.final_banner_offset is not None:
        offset = report.final_banner_offset
        retained = [
            s
            for s in report.sections
            if s.start >= offset or s.name in _PREAMBLE_RETAIN
        ]
    else:
        retained = [s for s in report.sections if s.name in _RETRAIN_SECTIONS]
    text = _joined_clean(retained)
    if not text:
        raise NoRetainedSections(f"report {report.id!r}")
    return text
