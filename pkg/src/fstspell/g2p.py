"""Wordpiece segmentation and wordpiece-to-phoneme alignment learning.

The alignment pipeline mirrors a classic translation-model recipe: segment
every lexicon word into wordpieces, pair the pieces with the word's
pronunciations, train IBM Model 2 with frequency-weighted EM (Model 1
uniform-position iterations first as initialization), then harvest each
pair's Viterbi alignment into a wordpiece -> phoneme-span table.  The table
compiles into the cyclic transducer W; the pronunciation lexicon itself
compiles into the word-level G2P transducer G.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ConfigError, DataError
from .fst import EPS, Fst, SymbolTable
from .lattice import WORD_START

MODEL1_ITERATIONS = 2
DEFAULT_TOP_K = 2000
DEFAULT_SKIP_PENALTY = 6.0


class WordpieceModel:
    """Greedy longest-match segmenter over a fixed wordpiece vocabulary."""

    def __init__(self, vocabulary: Iterable[str]):
        self.vocab = set(vocabulary)
        alphabet = {ch for piece in self.vocab for ch in piece.replace(WORD_START, "")}
        missing = [ch for ch in sorted(alphabet)
                   if ch not in self.vocab or WORD_START + ch not in self.vocab]
        if missing:
            raise ConfigError(
                f"wordpiece vocabulary lacks single-character fallbacks for {missing}")
        self._max_len = max(len(p) for p in self.vocab)

    @classmethod
    def load(cls, path: str | Path) -> "WordpieceModel":
        pieces = [line.rstrip("\n") for line in
                  Path(path).read_text(encoding="utf-8").splitlines()
                  if line.strip()]
        return cls(pieces)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            "\n".join(sorted(self.vocab)) + "\n", encoding="utf-8")

    def covers(self, word: str) -> bool:
        return all(ch in self.vocab for ch in word)

    def segment(self, word: str) -> list[str]:
        """Greedy longest-match left to right; the first piece carries ▁."""
        if not word:
            raise DataError("cannot segment an empty word")
        if not self.covers(word):
            raise DataError(f"word {word!r} uses characters outside the vocabulary")
        pieces: list[str] = []
        pos = 0
        at_start = True
        while pos < len(word):
            prefix = WORD_START if at_start else ""
            best = None
            limit = min(self._max_len, len(prefix) + len(word) - pos)
            for length in range(limit - len(prefix), 0, -1):
                candidate = prefix + word[pos:pos + length]
                if candidate in self.vocab:
                    best = candidate
                    pos += length
                    break
            if best is None:  # unreachable thanks to the coverage invariant
                raise DataError(f"cannot segment {word!r} at offset {pos}")
            pieces.append(best)
            at_start = False
        return pieces

    def segment_words(self, words: Sequence[str]) -> list[str]:
        out: list[str] = []
        for word in words:
            out.extend(self.segment(word))
        return out


@dataclass
class LexiconEntry:
    word: str
    pronunciations: list[list[str]]
    frequency: int

    def __post_init__(self):
        if self.frequency < 1:
            raise DataError(f"lexicon entry {self.word!r} has frequency < 1")
        if not self.pronunciations or any(not p for p in self.pronunciations):
            raise DataError(f"lexicon entry {self.word!r} lacks a pronunciation")


class Lexicon:
    """word -> pronunciations with frequencies, loaded from a TSV file."""

    def __init__(self, entries: Sequence[LexiconEntry]):
        self.entries: dict[str, LexiconEntry] = {}
        for e in entries:
            have = self.entries.get(e.word)
            if have is None:
                self.entries[e.word] = LexiconEntry(
                    e.word, [list(p) for p in e.pronunciations], e.frequency)
            else:
                for p in e.pronunciations:
                    if p not in have.pronunciations:
                        have.pronunciations.append(list(p))
                have.frequency = max(have.frequency, e.frequency)

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        entries = []
        for lineno, line in enumerate(
                Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"lexicon line {lineno}: expected 3 fields")
            word, phonemes, freq = parts
            try:
                entries.append(LexiconEntry(word, [phonemes.split()], int(freq)))
            except ValueError:
                raise DataError(f"lexicon line {lineno}: bad frequency {freq!r}")
        if not entries:
            raise DataError(f"lexicon file {path} is empty")
        return cls(entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> list[str]:
        return sorted(self.entries)

    def pronunciations(self, word: str) -> list[list[str]]:
        entry = self.entries.get(word)
        return [list(p) for p in entry.pronunciations] if entry else []

    def phoneme_set(self) -> set[str]:
        return {p for e in self.entries.values()
                for pron in e.pronunciations for p in pron}


# -- IBM Model 2 -------------------------------------------------------------


TrainingPair = tuple[Sequence[str], Sequence[str], float]  # pieces, phonemes, weight

NULL_PIECE = "<null>"  # the classic position-0 source token


@dataclass
class IBM2Params:
    """t(phoneme | wordpiece) and a(source position | target position, l, m).

    Source positions run 0..l where 0 is the NULL token; target positions
    run 1..m.
    """

    t: dict[str, dict[str, float]]
    a: dict[tuple[int, int, int], dict[int, float]]

    def translation_prob(self, piece: str, phoneme: str) -> float:
        dist = self.t.get(piece)
        return dist.get(phoneme, 0.0) if dist else 0.0

    def alignment_prob(self, i: int, j: int, l: int, m: int) -> float:
        dist = self.a.get((j, l, m))
        if dist is None:
            return 1.0 / (l + 1)
        return dist.get(i, 0.0)


def make_training_pairs(lexicon: Lexicon,
                        wpm: WordpieceModel) -> list[TrainingPair]:
    """Frequency-weighted (wordpieces, phonemes) pairs for every entry."""
    pairs: list[TrainingPair] = []
    for word in lexicon.words():
        entry = lexicon.entries[word]
        pieces = wpm.segment(word)
        for pron in entry.pronunciations:
            pairs.append((pieces, list(pron), float(entry.frequency)))
    return pairs


def corpus_log_likelihood(pairs: Sequence[TrainingPair],
                          params: IBM2Params) -> float:
    total = 0.0
    for pieces, phonemes, weight in pairs:
        l, m = len(pieces), len(phonemes)
        sources = [NULL_PIECE] + list(pieces)
        ll = 0.0
        for j, ph in enumerate(phonemes, 1):
            prob = sum(params.translation_prob(sources[i], ph)
                       * params.alignment_prob(i, j, l, m)
                       for i in range(l + 1))
            ll += math.log(max(prob, 1e-300))
        total += weight * ll
    return total


def train_ibm2(pairs: Sequence[TrainingPair], iterations: int = 10) -> IBM2Params:
    """Frequency-weighted EM; the first two iterations keep positions uniform
    (Model 1) to initialize the translation table for Model 2."""
    if iterations < 1:
        raise ConfigError("need at least one EM iteration")
    if not pairs:
        raise DataError("no training pairs")
    for pieces, phonemes, weight in pairs:
        if not pieces or not phonemes:
            raise DataError("training pair with an empty side")
        if weight <= 0:
            raise DataError("training pair with non-positive weight")

    piece_vocab = {p for pieces, _, _ in pairs for p in pieces} | {NULL_PIECE}
    phoneme_vocab = {ph for _, phonemes, _ in pairs for ph in phonemes}
    uniform_t = 1.0 / len(phoneme_vocab)
    t: dict[str, dict[str, float]] = {
        p: {ph: uniform_t for ph in phoneme_vocab} for p in piece_vocab}

    shapes = {(len(pieces), len(phonemes)) for pieces, phonemes, _ in pairs}
    a: dict[tuple[int, int, int], dict[int, float]] = {}
    for l, m in shapes:
        for j in range(1, m + 1):
            a[(j, l, m)] = {i: 1.0 / (l + 1) for i in range(l + 1)}

    params = IBM2Params(t, a)
    for iteration in range(iterations):
        model1 = iteration < MODEL1_ITERATIONS
        t_counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        a_counts: dict[tuple[int, int, int], dict[int, float]] = defaultdict(
            lambda: defaultdict(float))
        for pieces, phonemes, weight in pairs:
            l, m = len(pieces), len(phonemes)
            sources = [NULL_PIECE] + list(pieces)
            for j, ph in enumerate(phonemes, 1):
                posterior = []
                for i in range(l + 1):
                    ap = (1.0 / (l + 1)) if model1 else params.alignment_prob(i, j, l, m)
                    posterior.append(params.translation_prob(sources[i], ph) * ap)
                norm = sum(posterior)
                if norm <= 0.0:
                    continue
                for i in range(l + 1):
                    gamma = weight * posterior[i] / norm
                    if gamma > 0.0:
                        t_counts[sources[i]][ph] += gamma
                        a_counts[(j, l, m)][i] += gamma
        for piece, counts in t_counts.items():
            norm = sum(counts.values())
            params.t[piece] = {ph: c / norm for ph, c in counts.items()}
        if not model1:
            for key, counts in a_counts.items():
                norm = sum(counts.values())
                params.a[key] = {i: c / norm for i, c in counts.items()}
    return params


# -- alignment extraction ------------------------------------------------------


@dataclass
class AlignmentTable:
    """wordpiece -> [(phoneme sequence, frequency-weighted count), ...]"""

    mappings: dict[str, list[tuple[tuple[str, ...], float]]] = field(
        default_factory=dict)

    def pieces(self) -> list[str]:
        return sorted(self.mappings)

    def lookup(self, piece: str) -> list[tuple[tuple[str, ...], float]]:
        return self.mappings.get(piece, [])

    def __len__(self) -> int:
        return sum(len(v) for v in self.mappings.values())

    def coverage(self, vocabulary: Iterable[str]) -> float:
        vocab = list(vocabulary)
        mapped = sum(1 for p in vocab if p in self.mappings)
        return mapped / len(vocab) if vocab else 0.0

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for piece in self.pieces():
                for phonemes, count in self.mappings[piece]:
                    handle.write(f"{piece}\t{' '.join(phonemes)}\t{count:g}\n")

    @classmethod
    def load(cls, path: str | Path) -> "AlignmentTable":
        table = cls()
        for lineno, line in enumerate(
                Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"alignment table line {lineno}: expected 3 fields")
            piece, phonemes, count = parts
            table.mappings.setdefault(piece, []).append(
                (tuple(phonemes.split()), float(count)))
        return table


def viterbi_alignment(params: IBM2Params, pieces: Sequence[str],
                      phonemes: Sequence[str]) -> list[int]:
    """For each phoneme position j, the argmax wordpiece position (1-based).

    The NULL token only exists during EM; every phoneme lands on a real
    piece here so harvested spans cannot lose interior phonemes.
    """
    l, m = len(pieces), len(phonemes)
    out = []
    for j, ph in enumerate(phonemes, 1):
        best_i, best_score = 1, -1.0
        for i, piece in enumerate(pieces, 1):
            score = params.translation_prob(piece, ph) * params.alignment_prob(i, j, l, m)
            if score > best_score:
                best_i, best_score = i, score
        out.append(best_i)
    return out


def extract_alignments(params: IBM2Params, pairs: Sequence[TrainingPair],
                       top_k: int = DEFAULT_TOP_K) -> AlignmentTable:
    """Harvest contiguous Viterbi spans into a capped mapping table.

    The global top_k mappings by frequency-weighted count are retained, plus
    each wordpiece's single most frequent mapping so every trained piece
    keeps at least one entry.  Pieces whose phoneme assignments are not
    contiguous in a pair normally contribute nothing from that pair; a piece
    that would end up with no mapping at all falls back to the contiguous
    hull (min..max assigned position) of its most frequent occurrence.
    """
    counts: dict[tuple[str, tuple[str, ...]], float] = defaultdict(float)
    hull_counts: dict[tuple[str, tuple[str, ...]], float] = defaultdict(float)
    trained: set[str] = set()
    for pieces, phonemes, weight in pairs:
        trained.update(pieces)
        assignment = viterbi_alignment(params, pieces, phonemes)
        spans: dict[int, list[int]] = defaultdict(list)
        for j, i in enumerate(assignment):
            spans[i].append(j)
        for i, piece in enumerate(pieces, 1):
            positions = spans.get(i, [])
            if positions and positions != list(range(positions[0], positions[-1] + 1)):
                hull = tuple(phonemes[j] for j in
                             range(positions[0], positions[-1] + 1))
                hull_counts[(piece, hull)] += weight
                continue  # non-contiguous assignment, noise
            phones = tuple(phonemes[j] for j in positions)
            counts[(piece, phones)] += weight

    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = set(key for key, _ in ranked[:top_k])
    best_per_piece: dict[str, tuple[str, tuple[str, ...]]] = {}
    for key, _ in ranked:
        best_per_piece.setdefault(key[0], key)
    kept.update(best_per_piece.values())

    table = AlignmentTable()
    for (piece, phones), count in ranked:
        if (piece, phones) in kept:
            table.mappings.setdefault(piece, []).append((phones, count))
    for (piece, phones), count in sorted(hull_counts.items(),
                                         key=lambda kv: (-kv[1], kv[0])):
        if piece in trained and piece not in table.mappings:
            table.mappings[piece] = [(phones, count)]
    return table


# -- FST compilation ------------------------------------------------------------


def build_w_fst(table: AlignmentTable, wp_syms: SymbolTable,
                phoneme_syms: SymbolTable,
                vocabulary: Optional[Iterable[str]] = None,
                skip_penalty: float = DEFAULT_SKIP_PENALTY) -> Fst:
    """Cyclic wordpiece -> phonemes transducer from the alignment table.

    Each mapping wp -> p1..pn becomes a free loop of arcs wp:p1, eps:p2, ...
    Vocabulary pieces without any mapping transduce to epsilon at a penalty
    so unseen pieces cannot disconnect a lattice.
    """
    if not table.mappings:
        raise ConfigError("empty alignment table")
    f = Fst(wp_syms, phoneme_syms)
    hub = f.add_state()
    f.set_start(hub)
    f.set_final(hub)
    for piece in table.pieces():
        label = wp_syms.add(piece)
        for phonemes, _ in table.lookup(piece):
            if not phonemes:
                f.add_arc(hub, label, EPS, 0.0, hub)
                continue
            prev = hub
            for idx, ph in enumerate(phonemes):
                ilabel = label if idx == 0 else EPS
                dst = hub if idx == len(phonemes) - 1 else f.add_state()
                f.add_arc(prev, ilabel, phoneme_syms.id_of(ph), 0.0, dst)
                prev = dst
    if vocabulary is not None:
        for piece in sorted(set(vocabulary) - set(table.mappings)):
            f.add_arc(hub, wp_syms.add(piece), EPS, skip_penalty, hub)
    return f


def build_g2p_fst(lexicon: Lexicon, word_syms: SymbolTable,
                  phoneme_syms: SymbolTable) -> Fst:
    """Cyclic word -> phoneme-sequence transducer (the closure of the lexicon)."""
    if not len(lexicon):
        raise ConfigError("empty lexicon")
    f = Fst(word_syms, phoneme_syms)
    hub = f.add_state()
    f.set_start(hub)
    f.set_final(hub)
    for word in lexicon.words():
        label = word_syms.add(word)
        for pron in lexicon.pronunciations(word):
            prev = hub
            for idx, ph in enumerate(pron):
                ilabel = label if idx == 0 else EPS
                dst = hub if idx == len(pron) - 1 else f.add_state()
                f.add_arc(prev, ilabel, phoneme_syms.id_of(ph), 0.0, dst)
                prev = dst
    return f
