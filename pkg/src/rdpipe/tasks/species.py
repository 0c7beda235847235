"""Botanical species names: parsing, canonical formatting and divergence classes."""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from enum import Enum

from ..kernels import levenshtein


class UnparseableName(ValueError):
    def __init__(self, text: str):
        super().__init__(f"no genus-like token in {text!r}")
        self.text = text


RANK_MARKERS = {
    "subsp.": "subspecies",
    "ssp.": "subspecies",
    "var.": "variety",
    "f.": "form",
    "fo.": "form",
    "forma": "form",
}
RANK_PREFIX = {"subspecies": "subsp.", "variety": "var.", "form": "f."}

# Lowercase tokens that belong to author citations, never to rank values.
AUTHOR_CONNECTORS = {"ex", "et", "in", "de", "van", "von", "der", "den", "du", "la", "le", "&"}
EPITHET_QUALIFIERS = {"×", "x", "cf.", "aff."}

_TOKEN = re.compile(r"\([^()]*\)|'[^']*'|‘[^’]*’|\"[^\"]*\"|\S+")
_GENUS = re.compile(r"^×?[A-Z][A-Za-zÀ-ɏ-]+$")
_EPITHET = re.compile(r"^[a-zß-ɏ][a-zß-ɏ-]*$")
_INFRAGENERIC = re.compile(r"^\([A-Z][A-Za-z-]+\)$")
_SYNONYM_PAREN = re.compile(r"\s*\(=\s*(?P<syn>[^()]+?)\s*\)\s*$")
_SYNONYM_BARE = re.compile(r"\s+=\s*(?P<syn>.+?)\s*$")


@dataclass(frozen=True)
class SpeciesName:
    genus: str
    epithet: str | None = None
    subspecies: str | None = None
    variety: str | None = None
    form: str | None = None
    cultivar: str | None = None
    basionym_authors: str | None = None
    authors: str | None = None
    synonym: str | None = None

    @property
    def incomplete(self) -> bool:
        """True when the epithet is missing (e.g. dropped by the model)."""
        return self.epithet is None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "SpeciesName":
        return cls(**{f.name: data.get(f.name) for f in fields(cls)})

    def __str__(self) -> str:
        return format_species_name(self)


NAME_SLOTS = ("genus", "epithet", "subspecies", "variety", "form", "cultivar", "synonym")
AUTHOR_SLOTS = ("basionym_authors", "authors")


def _is_epithet(tok: str) -> bool:
    return bool(_EPITHET.match(tok)) and tok not in RANK_MARKERS and tok not in AUTHOR_CONNECTORS


def parse_species_name(text: str) -> SpeciesName:
    """Parse a botanical name into its components.

    The leftmost capitalized word is the genus and the next lowercase word
    the epithet; hybrid signs, ``cf.``/``aff.`` and an infrageneric
    ``(Subgenus)`` group stay verbatim inside the epithet. ``subsp.``,
    ``var.`` and ``f.`` fill ranks, quoted text is the cultivar, the first
    parenthesized author group before any plain author is the basionym,
    and a trailing ``= X`` or ``(= X)`` is the synonym. Everything else is
    kept, in order, as the author string.
    """
    rest = text.strip()
    synonym = None
    m = _SYNONYM_PAREN.search(rest) or _SYNONYM_BARE.search(rest)
    if m:
        synonym = m.group("syn")
        rest = rest[:m.start()]
    tokens = _TOKEN.findall(rest)
    start = next((i for i, t in enumerate(tokens) if _GENUS.match(t)), None)
    if start is None:
        raise UnparseableName(text)
    genus = tokens[start]
    toks = tokens[start + 1:]
    i = 0

    # Epithet stream: qualifiers, optional subgenus group, then the epithet.
    stream = []
    j = 0
    while j < len(toks) and toks[j] in EPITHET_QUALIFIERS:
        j += 1
    if (j < len(toks) and _INFRAGENERIC.match(toks[j])
            and j + 1 < len(toks) and _is_epithet(toks[j + 1])):
        j += 1
    if j < len(toks) and _is_epithet(toks[j]):
        stream = toks[:j + 1]
        i = j + 1
    epithet = " ".join(stream) or None

    ranks: dict[str, str] = {}
    cultivar = basionym = None
    authors: list[str] = []
    while i < len(toks):
        tok = toks[i]
        nxt = toks[i + 1] if i + 1 < len(toks) else None
        if tok in RANK_MARKERS and nxt is not None and _is_epithet(nxt):
            ranks[RANK_MARKERS[tok]] = nxt
            i += 2
            continue
        if tok[0] in "'‘\"" and len(tok) >= 2:
            cultivar = tok[1:-1]
        elif tok.startswith("(="):
            synonym = tok[2:-1].strip()
        elif tok == "=":
            synonym = " ".join(toks[i + 1:]) or None
            break
        elif tok.startswith("(") and basionym is None and not authors:
            basionym = tok
        else:
            authors.append(tok)
        i += 1
    return SpeciesName(
        genus=genus,
        epithet=epithet,
        subspecies=ranks.get("subspecies"),
        variety=ranks.get("variety"),
        form=ranks.get("form"),
        cultivar=cultivar,
        basionym_authors=basionym,
        authors=" ".join(authors) or None,
        synonym=synonym,
    )


def format_species_name(name: SpeciesName) -> str:
    """Render ``Genus epithet [subsp. x] [var. y] [f. z] ['Cultivar'] [(basionym)] [authors] [(= synonym)]``."""
    parts = [name.genus]
    if name.epithet:
        parts.append(name.epithet)
    for rank in ("subspecies", "variety", "form"):
        value = getattr(name, rank)
        if value:
            parts += [RANK_PREFIX[rank], value]
    if name.cultivar:
        parts.append(f"'{name.cultivar}'")
    if name.basionym_authors:
        parts.append(name.basionym_authors)
    if name.authors:
        parts.append(name.authors)
    if name.synonym:
        parts.append(f"(= {name.synonym})")
    return " ".join(parts)


def _author_tokens(text: str | None) -> list[str]:
    if not text:
        return []
    cleaned = re.sub(r"[().]", "", text).casefold()
    return [t for t in re.split(r"[\s&]+", cleaned) if t]


def _token_equivalent(a: str, b: str) -> bool:
    if a == b:
        return True
    short, long_ = sorted((a, b), key=len)
    return len(short) >= 2 and long_.startswith(short)


def authors_equivalent(a: str | None, b: str | None) -> bool:
    """Author citations equal up to abbreviation or expansion.

    Periods and parentheses are dropped and case is folded; the citations
    must have the same number of tokens and each pair must be equal or one
    a prefix (of at least 2 characters) of the other. Not transitive.
    """
    ta, tb = _author_tokens(a), _author_tokens(b)
    return len(ta) == len(tb) and all(_token_equivalent(x, y) for x, y in zip(ta, tb))


def _embeds(small: list[str], big: list[str]) -> bool:
    """True if ``small`` matches an ordered subsequence of ``big`` token-wise."""
    it = iter(big)
    return all(any(_token_equivalent(s, b) for b in it) for s in small)


class DiffCategory(str, Enum):
    CONSISTENT = "consistent"
    HARMLESS = "harmless-author-variant"
    OCR_RESIDUAL = "ocr-residual"
    ERRONEOUS = "erroneous"


class ErrorKind(str, Enum):
    SUBSTITUTION = "substitution"
    INCLUSION = "inclusion"
    EXCLUSION = "exclusion"


@dataclass(frozen=True)
class DiffClass:
    category: DiffCategory
    sub: ErrorKind | None = None
    detail: str = ""

    def __post_init__(self):
        if (self.sub is not None) != (self.category is DiffCategory.ERRONEOUS):
            raise ValueError("sub-category is required for, and only for, erroneous diffs")


# OCR residuals are near misses of the intended token.
OCR_MAX_RELATIVE_DISTANCE = 0.5


def _looks_like_ocr(cand: str, ref: str, source: str | None) -> bool:
    if not source or cand not in source:
        return False
    return levenshtein(cand, ref) <= OCR_MAX_RELATIVE_DISTANCE * max(len(ref), 1)


def _field_diff(slot: str, cand: str | None, ref: str | None, source: str | None):
    if cand == ref:
        return None
    if cand is None:
        return ErrorKind.EXCLUSION
    if ref is None:
        return ErrorKind.INCLUSION
    if slot in AUTHOR_SLOTS:
        if authors_equivalent(cand, ref):
            return DiffCategory.HARMLESS
        ct, rt = _author_tokens(cand), _author_tokens(ref)
        if len(ct) > len(rt) and _embeds(rt, ct):
            return ErrorKind.INCLUSION
        if len(ct) < len(rt) and _embeds(ct, rt):
            return ErrorKind.EXCLUSION
    else:
        ct, rt = cand.split(), ref.split()
        if len(ct) > len(rt) and _embeds(rt, ct):
            return ErrorKind.INCLUSION
        if len(ct) < len(rt) and _embeds(ct, rt):
            return ErrorKind.EXCLUSION
    if _looks_like_ocr(cand, ref, source):
        return DiffCategory.OCR_RESIDUAL
    return ErrorKind.SUBSTITUTION


def _as_name(x) -> SpeciesName:
    return x if isinstance(x, SpeciesName) else parse_species_name(x)


def classify_name_diff(candidate, reference, raw_source_text: str | None = None) -> DiffClass:
    """Classify how ``candidate`` diverges from ``reference``.

    Fields are compared slot by slot. Author differences that are mere
    abbreviations are harmless; a substituted value that occurs verbatim in
    ``raw_source_text`` and is a near miss of the reference is an OCR
    residual. Among errors, a substituted name part wins over exclusion,
    which wins over inclusion, which wins over a substituted author.
    """
    cand, ref = _as_name(candidate), _as_name(reference)
    results = {}
    for slot in NAME_SLOTS + AUTHOR_SLOTS:
        c, r = getattr(cand, slot), getattr(ref, slot)
        outcome = _field_diff(slot, c, r, raw_source_text)
        if outcome is not None:
            results[slot] = (outcome, c, r)
    if not results:
        return DiffClass(DiffCategory.CONSISTENT)
    detail = "; ".join(f"{slot}: {c!r} vs {r!r} ({o.value})" for slot, (o, c, r) in results.items())

    errors = {slot: o for slot, (o, _, _) in results.items() if isinstance(o, ErrorKind)}
    if errors:
        if any(o is ErrorKind.SUBSTITUTION and s in NAME_SLOTS for s, o in errors.items()):
            sub = ErrorKind.SUBSTITUTION
        elif ErrorKind.EXCLUSION in errors.values():
            sub = ErrorKind.EXCLUSION
        elif ErrorKind.INCLUSION in errors.values():
            sub = ErrorKind.INCLUSION
        else:
            sub = ErrorKind.SUBSTITUTION
        return DiffClass(DiffCategory.ERRONEOUS, sub, detail)
    kinds = {o for o, _, _ in results.values()}
    if DiffCategory.OCR_RESIDUAL in kinds:
        return DiffClass(DiffCategory.OCR_RESIDUAL, None, detail)
    return DiffClass(DiffCategory.HARMLESS, None, detail)


def names_match(a: SpeciesName, b: SpeciesName) -> bool:
    """Same name parts, with author citations compared up to abbreviation."""
    if any(getattr(a, s) != getattr(b, s) for s in NAME_SLOTS if s != "synonym"):
        return False
    return all(
        (getattr(a, s) is None and getattr(b, s) is None)
        or (getattr(a, s) is not None and getattr(b, s) is not None
            and authors_equivalent(getattr(a, s), getattr(b, s)))
        for s in AUTHOR_SLOTS
    )


def without_authors(name: SpeciesName) -> SpeciesName:
    return replace(name, basionym_authors=None, authors=None)
