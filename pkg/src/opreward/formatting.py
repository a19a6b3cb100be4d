"""Parsing and format scoring for the two-block perspective response layout.

A well-formed response carries a ``<core perspectives>`` block holding one
templated line per perspective, followed by a ``<summary>`` block with a
natural-language recap.  Parsing is total: malformed input yields an empty
parse with diagnostics populated, never an exception.
"""

from __future__ import annotations

import math
import re
import string
import unicodedata
from dataclasses import dataclass

CORE_OPEN = "<core perspectives>"
CORE_CLOSE = "</core perspectives>"
SUMMARY_OPEN = "<summary>"
SUMMARY_CLOSE = "</summary>"

LINE_TEMPLATE = "In the perspective of {name}, {explanation}"

# Name is the shortest non-empty prefix before the first comma after the
# fixed phrase; the explanation is the non-empty remainder.
_LINE_RE = re.compile(r"^In the perspective of\s+([^,]+?)\s*,\s*(.+)$")

TAG_SCORE_PER_BLOCK = 0.05
LINE_SCORE_CAP = 0.05
NAME_SCORE_CAP = 0.05
REPEAT_PENALTY = -0.2


@dataclass(frozen=True)
class PerspectiveLine:
    """One templated core line: ``In the perspective of {name}, {explanation}``."""

    name: str
    explanation: str
    line_index: int

    def render(self) -> str:
        return LINE_TEMPLATE.format(name=self.name, explanation=self.explanation)


@dataclass(frozen=True)
class TagDiagnostics:
    core_open_count: int
    core_close_count: int
    summary_open_count: int
    summary_close_count: int
    #: True when each tag occurs exactly once and the four tags appear in the
    #: canonical core-then-summary order.
    ordered: bool


@dataclass(frozen=True)
class ParsedResponse:
    raw_text: str
    core_lines: tuple[PerspectiveLine, ...]
    summary_text: str
    tag_diagnostics: TagDiagnostics
    unparsed_core_line_count: int


@dataclass(frozen=True)
class FormatReward:
    phi_tag: float
    phi_line: float
    phi_name: float
    phi_pen: float
    total: float


def normalize_text(text: str) -> str:
    """NFC-normalize so comparisons are stable across producers."""
    return unicodedata.normalize("NFC", text)


def collapse_whitespace(line: str) -> str:
    return " ".join(line.split())


def parse_perspective_line(line: str, index: int = 0) -> PerspectiveLine | None:
    """Match one line against the perspective template, or return None.

    Whitespace is collapsed before matching; name and explanation come back
    trimmed and non-empty.
    """
    collapsed = collapse_whitespace(normalize_text(line))
    m = _LINE_RE.match(collapsed)
    if m is None:
        return None
    name = m.group(1).strip()
    explanation = m.group(2).strip()
    if not name or not explanation:
        return None
    return PerspectiveLine(name=name, explanation=explanation, line_index=index)


def _first_block(text: str, open_tag: str, close_tag: str) -> str | None:
    """Inner text of the first open/close pair, or None if unpaired."""
    start = text.find(open_tag)
    if start < 0:
        return None
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        return None
    return text[start + len(open_tag):end]


def _tag_order_ok(text: str) -> bool:
    positions = []
    for tag in (CORE_OPEN, CORE_CLOSE, SUMMARY_OPEN, SUMMARY_CLOSE):
        if text.count(tag) != 1:
            return False
        positions.append(text.find(tag))
    return positions == sorted(positions)


def parse_response(raw: str) -> ParsedResponse:
    """Decompose a raw model response into core lines, summary, and diagnostics.

    Total function: any input (including empty or tag-less text) parses, with
    malformedness reflected in the diagnostics rather than raised.  Only the
    first occurrence of each block is read.  A summary block whose content is
    all whitespace yields an empty ``summary_text``.
    """
    text = normalize_text(raw)
    diagnostics = TagDiagnostics(
        core_open_count=text.count(CORE_OPEN),
        core_close_count=text.count(CORE_CLOSE),
        summary_open_count=text.count(SUMMARY_OPEN),
        summary_close_count=text.count(SUMMARY_CLOSE),
        ordered=_tag_order_ok(text),
    )

    core_lines: list[PerspectiveLine] = []
    unparsed = 0
    core_block = _first_block(text, CORE_OPEN, CORE_CLOSE)
    if core_block is not None:
        index = 0
        for line in core_block.splitlines():
            if not line.strip():
                continue
            parsed = parse_perspective_line(line, index)
            if parsed is None:
                unparsed += 1
            else:
                core_lines.append(parsed)
            index += 1

    summary_block = _first_block(text, SUMMARY_OPEN, SUMMARY_CLOSE)
    summary_text = summary_block.strip() if summary_block is not None else ""

    return ParsedResponse(
        raw_text=raw,
        core_lines=tuple(core_lines),
        summary_text=summary_text,
        tag_diagnostics=diagnostics,
        unparsed_core_line_count=unparsed,
    )


def _core_block_ok(text: str) -> bool:
    if text.count(CORE_OPEN) != 1 or text.count(CORE_CLOSE) != 1:
        return False
    return text.find(CORE_OPEN) < text.find(CORE_CLOSE)


def _summary_block_ok(text: str) -> bool:
    """Summary earns tag credit only when well paired and placed after the
    core section (first close tag of the core block)."""
    if text.count(SUMMARY_OPEN) != 1 or text.count(SUMMARY_CLOSE) != 1:
        return False
    s_open = text.find(SUMMARY_OPEN)
    if s_open >= text.find(SUMMARY_CLOSE):
        return False
    core_close = text.find(CORE_CLOSE)
    return core_close >= 0 and s_open > core_close


def _normalized_line_key(line: PerspectiveLine) -> str:
    return collapse_whitespace(line.render().lower())


def _word_set(text: str) -> frozenset[str]:
    words = (token.strip(string.punctuation) for token in text.split())
    return frozenset(w for w in words if w)


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _has_near_duplicate(lines: tuple[PerspectiveLine, ...], jaccard_threshold: float) -> bool:
    keys = [_normalized_line_key(line) for line in lines]
    words = [_word_set(k) for k in keys]
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            if keys[i] == keys[j] or _jaccard(words[i], words[j]) >= jaccard_threshold:
                return True
    return False


def format_reward(parsed: ParsedResponse, dup_jaccard_threshold: float = 0.9) -> FormatReward:
    """Score structural quality of a parsed response.

    Components: tag conformance (0.05 per correctly paired block, summary
    required to follow the core section), fraction of template-conforming
    core lines, fraction of distinct perspective names reused in the summary
    (case-insensitive substring), and a flat repeat penalty when any two core
    lines are near-duplicates.  The total is clamped at zero from below.
    """
    if not (0.0 < dup_jaccard_threshold <= 1.0):
        raise ValueError(f"dup_jaccard_threshold must be in (0, 1], got {dup_jaccard_threshold}")

    text = normalize_text(parsed.raw_text)
    phi_tag = (TAG_SCORE_PER_BLOCK if _core_block_ok(text) else 0.0) + (
        TAG_SCORE_PER_BLOCK if _summary_block_ok(text) else 0.0
    )

    n_parsed = len(parsed.core_lines)
    n_total = n_parsed + parsed.unparsed_core_line_count
    phi_line = LINE_SCORE_CAP * (n_parsed / n_total) if n_total else 0.0

    summary_cf = parsed.summary_text.casefold()
    names = {line.name.casefold() for line in parsed.core_lines}
    if names and summary_cf:
        found = sum(1 for name in names if name in summary_cf)
        phi_name = NAME_SCORE_CAP * (found / len(names))
    else:
        phi_name = 0.0

    phi_pen = REPEAT_PENALTY if _has_near_duplicate(parsed.core_lines, dup_jaccard_threshold) else 0.0

    total = max(0.0, math.fsum((phi_tag, phi_line, phi_name, phi_pen)))
    return FormatReward(phi_tag=phi_tag, phi_line=phi_line, phi_name=phi_name, phi_pen=phi_pen, total=total)


def render_response(lines: list[PerspectiveLine] | tuple[PerspectiveLine, ...], summary: str) -> str:
    """Serialize core lines and a summary back into the two-block layout."""
    body = "\n".join(line.render() for line in lines)
    return f"{CORE_OPEN}\n{body}\n{CORE_CLOSE}\n{SUMMARY_OPEN}\n{summary}\n{SUMMARY_CLOSE}"
