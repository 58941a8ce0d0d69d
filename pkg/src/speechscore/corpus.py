"""Data model and ingestion for time-aligned spoken responses.

A corpus is a collection of responses, each carrying a word/phoneme timeline
produced upstream by an ASR + forced-alignment toolchain, plus token-level
annotations (POS, stopword flags, syllable counts), optional syntactic spans,
an optional audio reference, and an optional grade. This module also owns
stratified splitting, feature-matrix plumbing and train-fitted
standardization.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_TIME_EPS = 1e-6

GRADE_ORDINALS = {"A2": 0, "LB1": 1, "HB1": 2, "LB2": 3, "HB2": 4}
GRADE_LABELS = tuple(sorted(GRADE_ORDINALS, key=GRADE_ORDINALS.get))

POS_TAGS = frozenset({
    "NOUN", "VERB", "AUX", "ADJ", "ADV", "PRON", "DET", "CONJ", "PREP",
    "NUM", "INTJ", "PUNCT", "OTHER",
})


class CorpusError(ValueError):
    """A response or resource file violates the documented input contract."""


class PhonemeClass(Enum):
    VOWEL = "vowel"
    CONSONANT = "consonant"
    SILENCE = "silence"


class Stress(Enum):
    NONE = "none"
    PRIMARY = "primary"
    SECONDARY = "secondary"


# ARPAbet-style digit convention used by the alignment file schema.
STRESS_FROM_DIGIT = {0: Stress.NONE, 1: Stress.PRIMARY, 2: Stress.SECONDARY}


@dataclass(frozen=True)
class AlignedPhoneme:
    label: str
    klass: PhonemeClass
    start: float
    end: float
    stress: Stress = Stress.NONE

    def __post_init__(self):
        if self.end < self.start - _TIME_EPS:
            raise CorpusError(f"phoneme {self.label!r} ends before it starts")
        if self.klass is not PhonemeClass.VOWEL and self.stress is not Stress.NONE:
            raise CorpusError(f"non-vowel phoneme {self.label!r} carries stress")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class AlignedWord:
    text: str
    start: float
    end: float
    phonemes: tuple[AlignedPhoneme, ...] = ()

    def __post_init__(self):
        if self.end <= self.start:
            raise CorpusError(f"word {self.text!r} has non-positive duration")
        for ph in self.phonemes:
            if ph.start < self.start - _TIME_EPS or ph.end > self.end + _TIME_EPS:
                raise CorpusError(
                    f"phoneme {ph.label!r} lies outside word {self.text!r}"
                )

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class TokenAnnotation:
    token: str
    pos: str = "OTHER"
    is_stopword: bool = False
    syllable_count: int = 1

    def __post_init__(self):
        if self.pos not in POS_TAGS:
            raise CorpusError(f"unknown POS tag {self.pos!r}")
        if self.syllable_count < 0:
            raise CorpusError("negative syllable count")


_SPAN_FIELDS = (
    "sentences", "t_units", "clauses", "dependent_clauses",
    "complex_t_units", "coordinate_phrases", "complex_nominals", "verb_phrases",
)


@dataclass
class SyntaxSpans:
    """Token-index ranges [lo, hi) for each syntactic unit type."""

    sentences: list[tuple[int, int]] = field(default_factory=list)
    t_units: list[tuple[int, int]] = field(default_factory=list)
    clauses: list[tuple[int, int]] = field(default_factory=list)
    dependent_clauses: list[tuple[int, int]] = field(default_factory=list)
    complex_t_units: list[tuple[int, int]] = field(default_factory=list)
    coordinate_phrases: list[tuple[int, int]] = field(default_factory=list)
    complex_nominals: list[tuple[int, int]] = field(default_factory=list)
    verb_phrases: list[tuple[int, int]] = field(default_factory=list)
    provenance: str = "annotated"

    def validate(self, n_tokens: int) -> None:
        for name in _SPAN_FIELDS:
            for lo, hi in getattr(self, name):
                if not (0 <= lo <= hi <= n_tokens):
                    raise CorpusError(f"{name} span ({lo},{hi}) outside token bounds")
        clause_set = {tuple(r) for r in self.clauses}
        if not {tuple(r) for r in self.dependent_clauses} <= clause_set:
            raise CorpusError("dependent clause span not present among clauses")


@dataclass(frozen=True)
class Grade:
    label: str
    ordinal: int

    @classmethod
    def from_label(cls, label: str) -> "Grade":
        if label not in GRADE_ORDINALS:
            raise CorpusError(f"unknown grade label {label!r}")
        return cls(label, GRADE_ORDINALS[label])


@dataclass
class AlignedResponse:
    response_id: str
    prompt_id: str
    words: list[AlignedWord]
    tokens: list[TokenAnnotation]
    syntax: SyntaxSpans | None = None
    transcript: str = ""
    audio_path: Path | None = None
    grade: Grade | None = None
    grade2: Grade | None = None

    def __post_init__(self):
        if not self.words:
            raise CorpusError("empty word timeline")
        prev_end = None
        for w in self.words:
            if prev_end is not None:
                if w.start < prev_end - _TIME_EPS:
                    raise CorpusError("overlapping words")
            prev_end = w.end
        if self.tokens and len(self.tokens) != len(self.words):
            raise CorpusError(
                f"{len(self.tokens)} tokens for {len(self.words)} words"
            )
        if not self.transcript:
            self.transcript = " ".join(w.text for w in self.words)
        if self.syntax is not None:
            self.syntax.validate(len(self.tokens))

    @property
    def duration(self) -> float:
        return self.words[-1].end - self.words[0].start


@dataclass
class LexicalResources:
    """Word lists backing lexical features: frequency ranks, complexity
    scores in [1, 6] (average and mode lexicon columns), stopwords and
    filled-pause markers."""

    frequency_rank: dict[str, int] = field(default_factory=dict)
    complexity_avg: dict[str, float] = field(default_factory=dict)
    complexity_mode: dict[str, float] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()
    filled_pauses: frozenset[str] = frozenset({"uh", "um", "er", "err", "hmm", "mm"})

    def __post_init__(self):
        for word, rank in self.frequency_rank.items():
            if rank <= 0:
                raise CorpusError(f"non-positive frequency rank for {word!r}")
        for lex in (self.complexity_avg, self.complexity_mode):
            for word, score in lex.items():
                if not 1.0 <= score <= 6.0:
                    raise CorpusError(f"complexity score for {word!r} outside [1, 6]")

    @classmethod
    def load(cls, directory: str | Path) -> "LexicalResources":
        """Read the four documented resource files from ``directory``.

        ``frequency.tsv`` holds ``word<TAB>rank`` lines, ``complexity.tsv``
        holds ``word<TAB>avg<TAB>mode``, ``stopwords.txt`` and
        ``fillers.txt`` one word per line. Missing files leave the
        corresponding field at its default.
        """
        directory = Path(directory)
        freq: dict[str, int] = {}
        cavg: dict[str, float] = {}
        cmode: dict[str, float] = {}
        path = directory / "frequency.tsv"
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                word, rank = line.split("\t")
                freq[word] = int(rank)
        path = directory / "complexity.tsv"
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                word, avg, mode = line.split("\t")
                cavg[word] = float(avg)
                cmode[word] = float(mode)
        stop = _read_wordlist(directory / "stopwords.txt")
        fillers = _read_wordlist(directory / "fillers.txt")
        kwargs = dict(frequency_rank=freq, complexity_avg=cavg,
                      complexity_mode=cmode, stopwords=frozenset(stop))
        if fillers:
            kwargs["filled_pauses"] = frozenset(fillers)
        return cls(**kwargs)


def _read_wordlist(path: Path) -> list[str]:
    if not path.exists():
        return []
    return [w.strip() for w in path.read_text(encoding="utf-8").splitlines() if w.strip()]


def default_resources() -> LexicalResources:
    """Resources bundled with the package (also used by the synthesizer)."""
    return LexicalResources.load(Path(__file__).parent / "resources")


@dataclass
class Corpus:
    responses: list[AlignedResponse]
    rejected: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.responses)

    def by_prompt(self) -> dict[str, list[AlignedResponse]]:
        out: dict[str, list[AlignedResponse]] = {}
        for r in self.responses:
            out.setdefault(r.prompt_id, []).append(r)
        return out


def parse_response(payload: dict, base_dir: Path | None = None) -> AlignedResponse:
    """Build an AlignedResponse from one alignment-file JSON payload."""
    words = []
    for w in payload.get("words", []):
        phonemes = []
        for p in w.get("phonemes", []):
            klass = PhonemeClass(p["class"])
            stress = Stress.NONE
            if klass is PhonemeClass.VOWEL:
                stress = STRESS_FROM_DIGIT[int(p.get("stress", 0))]
            phonemes.append(AlignedPhoneme(
                label=p["label"], klass=klass,
                start=float(p["start"]), end=float(p["end"]), stress=stress))
        words.append(AlignedWord(
            text=str(w["text"]).lower(), start=float(w["start"]),
            end=float(w["end"]), phonemes=tuple(phonemes)))

    tokens = []
    for t in payload.get("tokens", []):
        tokens.append(TokenAnnotation(
            token=str(t["token"]).lower(),
            pos=t.get("pos", "OTHER"),
            is_stopword=bool(t.get("stopword", False)),
            syllable_count=int(t.get("syllables", _heuristic_syllables(t["token"]))),
        ))
    if not tokens:
        tokens = [_token_from_word(w) for w in words]

    syntax = None
    if "syntax" in payload and payload["syntax"] is not None:
        fields = {name: [tuple(r) for r in payload["syntax"].get(name, [])]
                  for name in _SPAN_FIELDS}
        syntax = SyntaxSpans(**fields, provenance="annotated")

    audio_path = None
    if payload.get("wav"):
        audio_path = Path(payload["wav"])
        if base_dir is not None and not audio_path.is_absolute():
            audio_path = base_dir / audio_path

    grade = Grade.from_label(payload["grade"]) if payload.get("grade") else None
    grade2 = Grade.from_label(payload["grade2"]) if payload.get("grade2") else None

    return AlignedResponse(
        response_id=str(payload["response_id"]),
        prompt_id=str(payload.get("prompt_id", "default")),
        words=words, tokens=tokens, syntax=syntax,
        transcript=str(payload.get("transcript", "")),
        audio_path=audio_path, grade=grade, grade2=grade2)


def _token_from_word(word: AlignedWord) -> TokenAnnotation:
    # minimal fallback when the annotation layer is missing
    nuclei = sum(1 for p in word.phonemes if p.klass is PhonemeClass.VOWEL)
    count = nuclei if nuclei else _heuristic_syllables(word.text)
    pos = "PUNCT" if word.text in {".", "?", "!", ","} else "OTHER"
    return TokenAnnotation(token=word.text, pos=pos, syllable_count=count)


def _heuristic_syllables(text: str) -> int:
    """Vowel-letter-group count, at least 1 for alphabetic tokens."""
    runs = 0
    prev_vowel = False
    for ch in text.lower():
        is_vowel = ch in "aeiouy"
        if is_vowel and not prev_vowel:
            runs += 1
        prev_vowel = is_vowel
    if runs == 0 and any(ch.isalpha() for ch in text):
        return 1
    return runs


def load_corpus(path: str | Path) -> Corpus:
    """Load alignment files named by a manifest (one path per line) or held
    in a directory. Malformed responses are rejected with a reason, never
    silently dropped; a missing file is fatal.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        base = path
    else:
        if not path.exists():
            raise FileNotFoundError(f"manifest not found: {path}")
        base = path.parent
        files = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            fp = Path(line)
            files.append(fp if fp.is_absolute() else base / fp)

    if not files:
        warnings.warn(f"empty corpus at {path}", stacklevel=2)

    responses: list[AlignedResponse] = []
    rejected: list[tuple[str, str]] = []
    seen: set[str] = set()
    for fp in files:
        if not fp.exists():
            raise FileNotFoundError(f"alignment file not found: {fp}")
        try:
            payload = json.loads(fp.read_text(encoding="utf-8"))
            response = parse_response(payload, base_dir=fp.parent)
        except (CorpusError, KeyError, ValueError, TypeError) as exc:
            rejected.append((str(fp), str(exc)))
            continue
        if response.response_id in seen:
            rejected.append((str(fp), f"duplicate response_id {response.response_id!r}"))
            continue
        seen.add(response.response_id)
        responses.append(response)

    responses.sort(key=lambda r: r.response_id)
    return Corpus(responses=responses, rejected=rejected)


# ---------------------------------------------------------------------------
# Splits


@dataclass
class SplitAssignment:
    train: set[str]
    valid: set[str]
    test: set[str]
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20)
    seed: int = 0

    def split_of(self, response_id: str) -> str:
        for name in ("train", "valid", "test"):
            if response_id in getattr(self, name):
                return name
        raise KeyError(response_id)

    def to_json(self) -> dict:
        return {"train": sorted(self.train), "valid": sorted(self.valid),
                "test": sorted(self.test), "ratios": list(self.ratios),
                "seed": self.seed}

    @classmethod
    def from_json(cls, payload: dict) -> "SplitAssignment":
        return cls(train=set(payload["train"]), valid=set(payload["valid"]),
                   test=set(payload["test"]), ratios=tuple(payload["ratios"]),
                   seed=int(payload["seed"]))


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    exact = [r * n for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    short = n - sum(counts)
    remainders = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in remainders[:short]:
        counts[i] += 1
    return counts


def stratified_split(responses: Iterable[AlignedResponse],
                     ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
                     seed: int = 0) -> SplitAssignment:
    """Largest-remainder allocation per grade, then seeded shuffling.

    Deterministic for a fixed seed and independent of input ordering. Every
    grade must appear on at least 3 responses so each split can be fed.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    by_grade: dict[int, list[str]] = {}
    labels: dict[int, str] = {}
    for r in responses:
        if r.grade is None:
            raise CorpusError(f"response {r.response_id!r} has no grade")
        by_grade.setdefault(r.grade.ordinal, []).append(r.response_id)
        labels[r.grade.ordinal] = r.grade.label
    if not by_grade:
        raise CorpusError("empty corpus")

    rng = np.random.default_rng(seed)
    buckets: tuple[set[str], ...] = (set(), set(), set())
    for ordinal in sorted(by_grade):
        ids = sorted(by_grade[ordinal])
        if len(ids) < 3:
            raise CorpusError(
                f"grade {labels[ordinal]} has only {len(ids)} response(s); need >= 3")
        rng.shuffle(ids)
        counts = _largest_remainder(len(ids), ratios)
        pos = 0
        for bucket, count in zip(buckets, counts):
            bucket.update(ids[pos:pos + count])
            pos += count
    return SplitAssignment(train=buckets[0], valid=buckets[1], test=buckets[2],
                           ratios=tuple(ratios), seed=seed)


# ---------------------------------------------------------------------------
# Feature matrices and standardization


@dataclass
class FeatureMatrix:
    """Column-aligned numeric features over a corpus.

    ``groups`` parallels ``columns`` with one group tag (CF/FF/SPF/GVF/AF)
    per feature; ``flags`` maps response ids to the degenerate-value flags
    raised while extracting them.
    """

    response_ids: list[str]
    columns: list[str]
    groups: list[str]
    values: np.ndarray
    flags: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.response_ids), len(self.columns)):
            raise ValueError("matrix shape does not match ids/columns")
        if len(self.groups) != len(self.columns):
            raise ValueError("one group tag required per column")

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def restrict(self, ids: set[str] | Sequence[str]) -> "FeatureMatrix":
        wanted = set(ids)
        keep = [i for i, rid in enumerate(self.response_ids) if rid in wanted]
        return FeatureMatrix(
            response_ids=[self.response_ids[i] for i in keep],
            columns=list(self.columns), groups=list(self.groups),
            values=self.values[keep],
            flags={rid: self.flags[rid] for rid in self.flags
                   if rid in wanted})

    def select_groups(self, groups: Sequence[str]) -> "FeatureMatrix":
        wanted = set(groups)
        keep = [i for i, g in enumerate(self.groups) if g in wanted]
        return FeatureMatrix(
            response_ids=list(self.response_ids),
            columns=[self.columns[i] for i in keep],
            groups=[self.groups[i] for i in keep],
            values=self.values[:, keep], flags=dict(self.flags))

    def to_csv(self, path: str | Path) -> None:
        """Two-row header: group tags, then feature names."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + list(self.groups))
            writer.writerow(["response_id"] + list(self.columns))
            for rid, row in zip(self.response_ids, self.values):
                writer.writerow([rid] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            groups = next(reader)[1:]
            columns = next(reader)[1:]
            ids, rows = [], []
            for record in reader:
                ids.append(record[0])
                rows.append([float(v) for v in record[1:]])
        values = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, len(columns)))
        return cls(response_ids=ids, columns=columns, groups=groups, values=values)


@dataclass
class Standardizer:
    """Per-feature z-scoring fitted on the train split only.

    Uses the population standard deviation; zero-variance columns pass
    through unchanged and are recorded in ``zero_variance``.
    """

    columns: list[str]
    mean: np.ndarray
    std: np.ndarray
    zero_variance: list[str]

    def _check(self, matrix: FeatureMatrix) -> None:
        if list(matrix.columns) != list(self.columns):
            raise ValueError("column names do not match the fitted standardizer")

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        self._check(matrix)
        safe = np.where(self.std > 0, self.std, 1.0)
        values = np.where(self.std > 0, (matrix.values - self.mean) / safe,
                          matrix.values)
        return FeatureMatrix(response_ids=list(matrix.response_ids),
                             columns=list(matrix.columns),
                             groups=list(matrix.groups),
                             values=values, flags=dict(matrix.flags))

    def inverse_transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        self._check(matrix)
        values = np.where(self.std > 0, matrix.values * self.std + self.mean,
                          matrix.values)
        return FeatureMatrix(response_ids=list(matrix.response_ids),
                             columns=list(matrix.columns),
                             groups=list(matrix.groups),
                             values=values, flags=dict(matrix.flags))

    def to_json(self) -> dict:
        return {"columns": list(self.columns),
                "mean": [float(v) for v in self.mean],
                "std": [float(v) for v in self.std],
                "zero_variance": list(self.zero_variance)}

    @classmethod
    def from_json(cls, payload: dict) -> "Standardizer":
        return cls(columns=list(payload["columns"]),
                   mean=np.asarray(payload["mean"], dtype=np.float64),
                   std=np.asarray(payload["std"], dtype=np.float64),
                   zero_variance=list(payload["zero_variance"]))


def fit_standardizer(matrix: FeatureMatrix) -> Standardizer:
    if len(matrix.response_ids) == 0:
        raise ValueError("cannot fit a standardizer on an empty matrix")
    mean = matrix.values.mean(axis=0)
    std = matrix.values.std(axis=0)
    zero = [matrix.columns[i] for i in range(len(matrix.columns)) if std[i] == 0]
    return Standardizer(columns=list(matrix.columns), mean=mean, std=std,
                        zero_variance=zero)


def apply_standardizer(standardizer: Standardizer, matrix: FeatureMatrix) -> FeatureMatrix:
    return standardizer.transform(matrix)
