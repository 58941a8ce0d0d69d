"""Feature-matrix assembly: runs the five family extractors over a corpus.

Group tags follow the ablation vocabulary: CF (content), FF (fluency),
SPF (suprasegmental pronunciation), GVF (grammar and vocabulary),
AF (acoustic). Content features require a vocabulary fitted on the train
split; acoustic features require audio, supplied either as WAV paths on the
responses or through an in-memory lookup.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .acoustic import ACOUSTIC_FEATURES, AudioBuffer, extract_acoustic, read_wav
from .content import TfidfVocabulary, fit_vocabulary, vectorize
from .corpus import AlignedResponse, FeatureMatrix, LexicalResources
from .fluency import FLUENCY_FEATURES, fluency_features
from .grammar import GRAMMAR_FEATURES, grammar_features
from .prosody import PROSODY_FEATURES, NoNuclei, prosody_features

GROUP_ORDER = ("CF", "FF", "SPF", "GVF", "AF")


@dataclass
class ExtractorConfig:
    groups: tuple[str, ...] = GROUP_ORDER
    min_df: int = 2
    max_terms: int = 1000
    rank_threshold: int = 2000
    ld_mode: str = "density"
    stress_includes_secondary: bool = False
    fmin: float = 75.0
    fmax: float = 500.0
    frame: float = 0.040
    hop: float = 0.010
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.groups) - set(GROUP_ORDER)
        if unknown:
            raise ValueError(f"unknown feature group(s): {sorted(unknown)}")
        self.groups = tuple(g for g in GROUP_ORDER if g in self.groups)


def fit_content_vocabulary(responses: list[AlignedResponse], train_ids: set[str],
                           config: ExtractorConfig) -> TfidfVocabulary:
    transcripts = [r.transcript for r in responses if r.response_id in train_ids]
    return fit_vocabulary(transcripts, min_df=config.min_df,
                          max_terms=config.max_terms)


def _extract_one(response: AlignedResponse, resources: LexicalResources,
                 vocabulary: TfidfVocabulary | None, config: ExtractorConfig,
                 audio_lookup: Mapping[str, AudioBuffer] | None,
                 ) -> tuple[dict[str, float], set[str]]:
    flags: set[str] = set()
    values: dict[str, float] = {}
    if "CF" in config.groups:
        values.update(vectorize(vocabulary, response.transcript, flags))
    if "FF" in config.groups:
        values.update(fluency_features(response, resources, flags))
    if "SPF" in config.groups:
        try:
            values.update(prosody_features(
                response, config.stress_includes_secondary, flags))
        except NoNuclei:
            flags.add("spf_no_nuclei")
            values.update(dict.fromkeys(PROSODY_FEATURES, 0.0))
    if "GVF" in config.groups:
        values.update(grammar_features(
            response, resources, seed=config.seed,
            rank_threshold=config.rank_threshold, ld_mode=config.ld_mode,
            flags=flags))
    if "AF" in config.groups:
        audio = None
        if audio_lookup is not None and response.response_id in audio_lookup:
            audio = audio_lookup[response.response_id]
        elif response.audio_path is not None:
            audio = read_wav(response.audio_path)
        if audio is None:
            raise ValueError(
                f"acoustic features requested but response "
                f"{response.response_id!r} has no audio")
        values.update(extract_acoustic(audio, fmin=config.fmin, fmax=config.fmax,
                                       frame=config.frame, hop=config.hop,
                                       flags=flags))
    return values, flags


def _columns_for(config: ExtractorConfig,
                 vocabulary: TfidfVocabulary | None) -> tuple[list[str], list[str]]:
    columns: list[str] = []
    groups: list[str] = []
    per_group = {
        "CF": vocabulary.feature_names() if vocabulary else [],
        "FF": list(FLUENCY_FEATURES),
        "SPF": list(PROSODY_FEATURES),
        "GVF": list(GRAMMAR_FEATURES),
        "AF": list(ACOUSTIC_FEATURES),
    }
    for group in config.groups:
        names = per_group[group]
        columns.extend(names)
        groups.extend([group] * len(names))
    return columns, groups


def extract_matrix(responses: list[AlignedResponse], resources: LexicalResources,
                   config: ExtractorConfig | None = None,
                   vocabulary: TfidfVocabulary | None = None,
                   audio_lookup: Mapping[str, AudioBuffer] | None = None,
                   threads: int = 1) -> FeatureMatrix:
    """Extract the configured feature groups for every response.

    Rows follow the input response order; per-response extraction is pure
    and parallelizes over a thread pool without affecting the result.
    """
    config = config or ExtractorConfig()
    if "CF" in config.groups and vocabulary is None:
        raise ValueError("content features need a fitted vocabulary")
    columns, groups = _columns_for(config, vocabulary)

    def run(response):
        return _extract_one(response, resources, vocabulary, config, audio_lookup)

    if threads > 1 and len(responses) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, responses))
    else:
        results = [run(r) for r in responses]

    values = np.zeros((len(responses), len(columns)), dtype=np.float64)
    flags: dict[str, list[str]] = {}
    for i, (response, (row, row_flags)) in enumerate(zip(responses, results)):
        missing = set(row) - set(columns)
        if missing:
            raise ValueError(f"extractor emitted unknown columns: {sorted(missing)[:3]}")
        for j, name in enumerate(columns):
            values[i, j] = row.get(name, 0.0)
        if row_flags:
            flags[response.response_id] = sorted(row_flags)
    return FeatureMatrix(response_ids=[r.response_id for r in responses],
                         columns=columns, groups=groups, values=values,
                         flags=flags)
