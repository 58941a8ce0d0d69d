"""Shared factories for hand-built aligned responses."""

from __future__ import annotations

import pytest

from speechscore.corpus import (AlignedPhoneme, AlignedResponse, AlignedWord,
                                Grade, LexicalResources, PhonemeClass, Stress,
                                TokenAnnotation)

_KLASS = {"v": PhonemeClass.VOWEL, "c": PhonemeClass.CONSONANT,
          "s": PhonemeClass.SILENCE}
_STRESS = {0: Stress.NONE, 1: Stress.PRIMARY, 2: Stress.SECONDARY}


def make_phonemes(spec, start, end):
    """spec: list of (label, klass letter, stress digit); spans divided evenly."""
    if not spec:
        return ()
    span = (end - start) / len(spec)
    out = []
    for i, (label, k, s) in enumerate(spec):
        out.append(AlignedPhoneme(
            label=label, klass=_KLASS[k], stress=_STRESS[s],
            start=start + i * span, end=start + (i + 1) * span))
    return tuple(out)


def make_word(text, start, end, phones=None):
    return AlignedWord(text=text, start=start, end=end,
                       phonemes=make_phonemes(phones or [], start, end))


def tok(token, pos="OTHER", stop=False, syl=1):
    return TokenAnnotation(token=token, pos=pos, is_stopword=stop,
                           syllable_count=syl)


def make_response(words, tokens=None, grade=None, response_id="r1",
                  prompt_id="p1", syntax=None):
    if tokens is None:
        tokens = [tok(w.text) for w in words]
    return AlignedResponse(
        response_id=response_id, prompt_id=prompt_id, words=words,
        tokens=tokens, syntax=syntax,
        grade=Grade.from_label(grade) if grade else None)


@pytest.fixture
def resources():
    return LexicalResources(
        frequency_rank={"the": 1, "cat": 120, "saw": 150, "dog": 130,
                        "run": 120, "runs": 125, "barks": 4000, "walks": 210,
                        "she": 12, "he": 11, "and": 3},
        complexity_avg={"cat": 2.0, "run": 3.0, "dog": 2.5},
        complexity_mode={"cat": 2.0, "run": 3.0, "dog": 3.0},
        stopwords=frozenset({"the", "a", "and", "she", "he"}),
        filled_pauses=frozenset({"uh", "um", "er", "err", "hmm", "mm"}))
