"""Language-processing primitives for URL page text.

Everything here is deterministic and dependency-free: a regex word
tokenizer, a rule/lexicon part-of-speech tagger over the 12-tag universal
set, syllable counting for the Flesch reading-ease score, tag-variety text
complexity, quote detection, and TF-IDF over top-20 unigrams/bigrams.

The tagger makes no claim to linguistic accuracy; the complexity score
only needs a consistent tagging function, so a closed-class lexicon plus
suffix heuristics (default NOUN) is enough.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import EmptyCorpus, EmptyDocument

UNIVERSAL_TAGS = (
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
    "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X",
)

NULL_TERM = "<null>"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_WORD_RE = re.compile(r"\w+")
_SENTENCE_END_RE = re.compile(r"[.!?]+")

_ADV_SUFFIXES = ("ly",)
_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "ish", "est")
_VERB_SUFFIXES = ("ing", "ed", "ize", "ise", "ify")


@dataclass
class TokenizedDoc:
    tokens: list[str]
    sentences: int
    pos_tags: list[str]

    def words(self) -> list[str]:
        return [t for t, tag in zip(self.tokens, self.pos_tags) if tag != "PUNCT"]


def _read_resource_lines(name: str) -> list[str]:
    ref = resources.files("psmdetect.resources").joinpath(name)
    lines = []
    for line in ref.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


@lru_cache(maxsize=4)
def load_stopwords(path: str | None = None) -> frozenset[str]:
    if path is None:
        return frozenset(_read_resource_lines("stopwords.txt"))
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            w.strip() for w in fh if w.strip() and not w.strip().startswith("#")
        )


@lru_cache(maxsize=4)
def load_lexicon(path: str | None = None) -> dict[str, str]:
    if path is None:
        rows = _read_resource_lines("tagger_lexicon.txt")
    else:
        with open(path, encoding="utf-8") as fh:
            rows = [l.strip() for l in fh if l.strip() and not l.strip().startswith("#")]
    lexicon = {}
    for row in rows:
        word, _, tag = row.partition(" ")
        lexicon[word] = tag.strip()
    return lexicon


def _is_latin(token: str) -> bool:
    # Latin plus the extended-Latin blocks used by European languages.
    for ch in token:
        if ch.isalpha():
            code = ord(ch)
            if not (code < 0x250 or 0x1E00 <= code <= 0x1EFF):
                return False
    return True


def tag_token(token: str, lexicon: dict[str, str]) -> str:
    if not _WORD_RE.search(token):
        return "PUNCT"
    if token[0].isdigit():
        return "NUM"
    tag = lexicon.get(token)
    if tag is not None:
        return tag
    if not _is_latin(token):
        return "X"
    if len(token) >= 4:
        if token.endswith(_ADV_SUFFIXES):
            return "ADV"
        if token.endswith(_ADJ_SUFFIXES):
            return "ADJ"
        if token.endswith(_VERB_SUFFIXES):
            return "VERB"
    return "NOUN"


def tokenize(text: str, lexicon_path: str | None = None) -> TokenizedDoc:
    """Lowercased word segmentation with punctuation kept as PUNCT tokens.

    The sentence count is the number of '.', '!' or '?' terminator runs,
    with a floor of one for any non-empty text.
    """
    lexicon = load_lexicon(lexicon_path)
    tokens = [t.lower() for t in _TOKEN_RE.findall(text)]
    tags = [tag_token(t, lexicon) for t in tokens]
    sentences = len(_SENTENCE_END_RE.findall(text))
    if tokens and sentences == 0:
        sentences = 1
    return TokenizedDoc(tokens=tokens, sentences=sentences, pos_tags=tags)


def count_syllables(word: str) -> int:
    """Maximal vowel-group count with a terminal silent-e discount,
    floored at one."""
    groups = len(re.findall(r"[aeiouy]+", word.lower()))
    if word.lower().endswith("e") and groups > 1:
        groups -= 1
    return max(1, groups)


def complexity(doc: TokenizedDoc) -> float:
    """Distinct part-of-speech tags per word, in (0, 1]."""
    word_tags = [tag for tag in doc.pos_tags if tag != "PUNCT"]
    if not word_tags:
        raise EmptyDocument("complexity needs at least one word")
    return len(set(word_tags)) / len(word_tags)


def reading_ease(doc: TokenizedDoc) -> float:
    """Flesch reading ease: 206.835 - 1.015*(words/sentences)
    - 84.6*(syllables/words)."""
    words = doc.words()
    if not words or doc.sentences < 1:
        raise EmptyDocument("reading ease needs at least one word and one sentence")
    syllables = sum(count_syllables(w) for w in words)
    return 206.835 - 1.015 * (len(words) / doc.sentences) - 84.6 * (syllables / len(words))


_QUOTE_DELIMS = (('"', '"'), ("“", "”"), ("«", "»"))


def has_quote(text: str) -> int:
    """1 iff some matched pair of double-quote delimiters encloses at
    least three words."""
    for opener, closer in _QUOTE_DELIMS:
        start = 0
        while True:
            a = text.find(opener, start)
            if a < 0:
                break
            b = text.find(closer, a + 1)
            if b < 0:
                break
            if len(_WORD_RE.findall(text[a + 1:b])) >= 3:
                return 1
            start = b + 1
    return 0


def content_terms(doc: TokenizedDoc, stopwords: frozenset[str]) -> list[str]:
    """Word tokens with stop words removed; the shared input for TF-IDF
    and topic modeling."""
    return [
        t
        for t, tag in zip(doc.tokens, doc.pos_tags)
        if tag != "PUNCT" and t not in stopwords
    ]


@dataclass
class TfidfVocabulary:
    unigrams: list[str]
    bigrams: list[str]  # stored as "first second"
    doc_frequency: dict[str, int]
    n_docs: int


def _bigrams(terms: list[str]) -> list[str]:
    return [f"{a} {b}" for a, b in zip(terms, terms[1:])]


def _top_terms(total_counts: dict[str, int], top_n: int) -> list[str]:
    ranked = sorted(total_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    terms = [term for term, _ in ranked[:top_n]]
    return terms + [NULL_TERM] * (top_n - len(terms))


def build_tfidf_vocab(
    train_docs: list[TokenizedDoc],
    stopwords: frozenset[str] | None = None,
    top_n: int = 20,
) -> TfidfVocabulary:
    """Top-n unigrams and bigrams by total occurrence count over the
    training documents, ties broken lexicographically. Bigrams are formed
    over the stop-word-filtered token sequence. Short vocabularies are
    padded with a reserved null term whose feature is always zero."""
    if not train_docs:
        raise EmptyCorpus("tf-idf vocabulary needs at least one document")
    if stopwords is None:
        stopwords = load_stopwords()
    uni_counts: dict[str, int] = {}
    bi_counts: dict[str, int] = {}
    doc_frequency: dict[str, int] = {}
    for doc in train_docs:
        terms = content_terms(doc, stopwords)
        grams = _bigrams(terms)
        for term in terms:
            uni_counts[term] = uni_counts.get(term, 0) + 1
        for gram in grams:
            bi_counts[gram] = bi_counts.get(gram, 0) + 1
        for term in set(terms) | set(grams):
            doc_frequency[term] = doc_frequency.get(term, 0) + 1
    return TfidfVocabulary(
        unigrams=_top_terms(uni_counts, top_n),
        bigrams=_top_terms(bi_counts, top_n),
        doc_frequency=doc_frequency,
        n_docs=len(train_docs),
    )


def tfidf_features(
    doc: TokenizedDoc,
    vocab: TfidfVocabulary,
    stopwords: frozenset[str] | None = None,
) -> list[float]:
    """tf * idf per vocabulary term (20 unigrams then 20 bigrams), with
    raw term counts and idf = ln((1 + n_docs) / (1 + df)) + 1."""
    if stopwords is None:
        stopwords = load_stopwords()
    terms = content_terms(doc, stopwords)
    counts: dict[str, int] = {}
    for term in terms:
        counts[term] = counts.get(term, 0) + 1
    for gram in _bigrams(terms):
        counts[gram] = counts.get(gram, 0) + 1

    values = []
    for term in vocab.unigrams + vocab.bigrams:
        tf = counts.get(term, 0) if term != NULL_TERM else 0
        if tf == 0:
            values.append(0.0)
            continue
        df = vocab.doc_frequency.get(term, 0)
        idf = math.log((1 + vocab.n_docs) / (1 + df)) + 1.0
        values.append(tf * idf)
    return values
