"""Grammar tagging, entity retrieval and the rewrite decision.

The engine compiles every context-independent machine once (tagger, the
wordpiece-to-phonemes transducer, the edit FST, the G2P transducer) and a
phonemes-to-entity transducer per contextual entity list.  Per utterance it
then:

1. tags the lattice with the carrier grammar (sigma-composition), grouping
   matches by their start/end positions;
2. expands each tagged span into an edit-tolerant phoneme lattice;
3. composes that lattice with the entity transducer (rho-composition),
   projects onto entity graphemes, removes epsilons and determinizes --
   in the log semiring this sums the probability mass of every phonetic
   alignment supporting an entity;
4. optionally rescoring the original span through the same machinery
   ("comparison scoring") so a rewrite must beat the transcript it replaces.

Decisions carry the ranked candidates, the comparison cost and the final
spliced transcript.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError, DataError, EmptyContextError, FstSpellError
from .fst import (
    EPS,
    NO_STATE,
    SIGMA,
    Fst,
    SymbolTable,
    chain,
    compose,
    connect,
    determinize,
    invert,
    project_output,
    rmeps,
    shortest_paths,
    union,
)
from .g2p import Lexicon, WordpieceModel, build_g2p_fst
from .lattice import WORD_START, Lattice, glue_wordpieces, words_to_lattice
from .semiring import LOG, TROPICAL, ZERO, Semiring
from .phonetics import PhonemeInventory

log = logging.getLogger(__name__)

SLOT = "$"
SELF_TOKEN = "<self>"

DEFAULT_MARGIN = 0.0
DEFAULT_TOP_CANDIDATES = 10


@dataclass
class Grammar:
    """Carrier patterns with exactly one entity slot each."""

    cls: str
    patterns: list[list[str]]

    def __post_init__(self):
        if not self.patterns:
            raise ConfigError("grammar has no patterns")
        for pattern in self.patterns:
            if pattern.count(SLOT) != 1:
                raise ConfigError(
                    f"pattern {pattern!r} must contain exactly one {SLOT!r} slot")
            if len(pattern) < 2:
                raise ConfigError(f"pattern {pattern!r} has no carrier tokens")
            if any(not tok for tok in pattern):
                raise ConfigError(f"pattern {pattern!r} has an empty token")

    @property
    def open_tag(self) -> str:
        return f"<{self.cls}>"

    @property
    def close_tag(self) -> str:
        return f"</{self.cls}>"

    @classmethod
    def from_json(cls, path: str | Path) -> "Grammar":
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
        return cls(str(doc["class"]), [list(p) for p in doc["patterns"]])


@dataclass
class EntityContext:
    """Contextually relevant entities with their display casing."""

    entities: list[str]
    cls: str = "entity"

    def __post_init__(self):
        if any(not e.strip() for e in self.entities):
            raise ConfigError("entity context contains an empty entity")

    def canonical_by_normalized(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for entity in self.entities:
            out.setdefault(" ".join(entity.lower().split()), entity)
        return out

    @classmethod
    def load(cls, path: str | Path, name: str = "entity") -> "EntityContext":
        lines = [line.strip() for line in
                 Path(path).read_text(encoding="utf-8").splitlines()]
        return cls([line for line in lines if line], name)


def compile_tagger(grammar: Grammar, syms: SymbolTable, level: str = "word",
                   wpm: Optional[WordpieceModel] = None) -> Fst:
    """The tagging transducer T: free context loops around each carrier
    pattern, with the entity span matched by a sigma loop bracketed by
    inserted tag labels."""
    if level not in ("word", "wordpiece"):
        raise ConfigError(f"unknown tagger level {level!r}")
    if level == "wordpiece" and wpm is None:
        raise ConfigError("wordpiece-level tagger needs a wordpiece model")
    open_id = syms.add(grammar.open_tag)
    close_id = syms.add(grammar.close_tag)

    def carrier_labels(token: str) -> list[int]:
        if level == "word":
            if token not in syms:
                raise ConfigError(f"carrier token {token!r} not in symbol table")
            return [syms.id_of(token)]
        pieces = wpm.segment(token)
        for piece in pieces:
            if piece not in syms:
                raise ConfigError(f"carrier piece {piece!r} not in symbol table")
        return [syms.id_of(p) for p in pieces]

    f = Fst(syms, syms)
    start = f.add_state()
    end = f.add_state()
    f.set_start(start)
    f.set_final(end)
    f.add_arc(start, SIGMA, SIGMA, 0.0, start)
    f.add_arc(end, SIGMA, SIGMA, 0.0, end)

    for pattern in grammar.patterns:
        state = start
        for token in pattern:
            if token == SLOT:
                tag_open = f.add_state()
                f.add_arc(state, EPS, open_id, 0.0, tag_open)
                span = f.add_state()
                f.add_arc(tag_open, SIGMA, SIGMA, 0.0, span)
                f.add_arc(span, SIGMA, SIGMA, 0.0, span)
                tag_close = f.add_state()
                f.add_arc(span, EPS, close_id, 0.0, tag_close)
                state = tag_close
            else:
                for label in carrier_labels(token):
                    nxt = f.add_state()
                    f.add_arc(state, label, label, 0.0, nxt)
                    state = nxt
        f.add_arc(state, EPS, EPS, 0.0, end)
    return f


@dataclass
class SpanMatch:
    """One tagged region: lattice positions plus its span sublattice.

    ``entry_states``/``exit_states`` are state ids of the composed lattice y
    (the arcs into/out of the tags), kept so callers can isolate this
    group's tagged paths again.
    """

    open_pos: int
    close_pos: int
    fst: Fst
    entry_states: frozenset[int] = frozenset()
    exit_states: frozenset[int] = frozenset()


def _span_fst(y: Fst, entry_states: Sequence[int],
              exit_arcs: Sequence[tuple[int, float]],
              tag_ids: set[int]) -> Fst:
    out = Fst(y.osyms, y.osyms)
    remap: dict[int, int] = {}

    def copy_state(q: int) -> int:
        sid = remap.get(q)
        if sid is None:
            sid = out.add_state()
            remap[q] = sid
            stack.append(q)
        return sid

    stack: list[int] = []
    super_start = out.add_state()
    out.set_start(super_start)
    # dedupe: several context paths may reach the same span-entry state, but
    # the span's own path set starts here
    for q in sorted(set(entry_states)):
        out.add_arc(super_start, EPS, EPS, 0.0, copy_state(q))
    while stack:
        q = stack.pop()
        src = remap[q]
        for arc in y.states[q]:
            if arc.olabel in tag_ids:
                continue
            out.add_arc(src, arc.olabel, arc.olabel, arc.weight,
                        copy_state(arc.nextstate))
    for q, weight in exit_arcs:
        if q in remap:
            sid = remap[q]
            prev = out.finals.get(sid)
            out.set_final(sid, weight if prev is None else min(prev, weight))
    return connect(rmeps(out, TROPICAL))


def span_groups(y: Fst, origins: Sequence[tuple[int, int]], open_id: int,
                close_id: int) -> list[SpanMatch]:
    """Tagged regions of a composed lattice, grouped by (start, end) position.

    ``origins`` maps each state of y back to its source-lattice state, which
    for a sausage lattice is the slot boundary index.
    """
    opens: dict[int, list[int]] = {}
    closes: dict[int, list[tuple[int, float]]] = {}
    n_open = n_close = 0
    for q, arcs in enumerate(y.states):
        for arc in arcs:
            if arc.olabel == open_id:
                opens.setdefault(origins[q][0], []).append(arc.nextstate)
                n_open += 1
            elif arc.olabel == close_id:
                closes.setdefault(origins[arc.nextstate][0], []).append(
                    (q, arc.weight))
                n_close += 1
    if (n_open == 0) != (n_close == 0):
        raise FstSpellError("unbalanced tags in composed lattice")
    groups = []
    tag_ids = {open_id, close_id}
    for o in sorted(opens):
        for c in sorted(closes):
            span = _span_fst(y, opens[o], closes[c], tag_ids)
            if not span.is_empty():
                groups.append(SpanMatch(
                    o, c, span,
                    entry_states=frozenset(opens[o]),
                    exit_states=frozenset(q for q, _ in closes[c])))
    return groups


def extract_tagged_span(y: Fst, open_id: int, close_id: int) -> Fst:
    """Union of every tagged region of y, tags and context removed."""
    entry_states = []
    exit_arcs = []
    for q, arcs in enumerate(y.states):
        for arc in arcs:
            if arc.olabel == open_id:
                entry_states.append(arc.nextstate)
            elif arc.olabel == close_id:
                exit_arcs.append((q, arc.weight))
    if (not entry_states) != (not exit_arcs):
        raise FstSpellError("unbalanced tags in composed lattice")
    if not entry_states:
        return Fst(y.osyms, y.osyms)
    return _span_fst(y, entry_states, exit_arcs, {open_id, close_id})


# -- phoneme expansion -------------------------------------------------------


def expand_phonemes_word(span: Fst, g2p: Fst, expander: Optional[Fst],
                         edit: Fst) -> Fst:
    """Word-level span -> edit-tolerant phoneme lattice (G, then P, then E)."""
    z = compose(span, g2p)
    if z.is_empty():
        return z
    if expander is not None:
        z = compose(project_output(z), expander, "sigma_right")
    return project_output(compose(project_output(z), edit, "sigma_right"))


def expand_phonemes_wordpiece(span: Fst, w_fst: Fst, edit: Fst,
                              expander: Optional[Fst] = None) -> Fst:
    """Wordpiece-level span -> edit-tolerant phoneme lattice (W, then E).

    The similarity expander is off by default here; the alignment table
    already carries pronunciation variants.
    """
    z = compose(span, w_fst)
    if z.is_empty():
        return z
    if expander is not None:
        z = compose(project_output(z), expander, "sigma_right")
    return project_output(compose(project_output(z), edit, "sigma_right"))


# -- entity transducer --------------------------------------------------------


def build_entity_fst(context: EntityContext, lexicon: Lexicon,
                     word_syms: SymbolTable,
                     ph_syms: SymbolTable) -> tuple[Fst, list[str]]:
    """The phonemes-to-entity transducer: invert a G2P restricted to the
    context's words and compose it with the entity acceptor.

    Returns (s', skipped) where skipped lists entities without full lexicon
    coverage; raises EmptyContextError when nothing is mappable.
    """
    if not context.entities:
        raise EmptyContextError("entity context is empty")
    usable: list[list[str]] = []
    skipped: list[str] = []
    needed: set[str] = set()
    for entity in sorted(context.canonical_by_normalized()):
        words = entity.split()
        if all(word in lexicon for word in words):
            usable.append(words)
            needed.update(words)
        else:
            skipped.append(entity)
    if skipped:
        log.warning("excluded %d entities without pronunciations: %s",
                    len(skipped), ", ".join(skipped[:5]))
    if not usable:
        raise EmptyContextError("no contextual entity could be mapped to phonemes")
    from .g2p import LexiconEntry

    restricted = Lexicon([
        LexiconEntry(w, lexicon.pronunciations(w), lexicon.entries[w].frequency)
        for w in sorted(needed)])
    g_restricted = build_g2p_fst(restricted, word_syms, ph_syms)
    s = union([chain([word_syms.add(w) for w in words], word_syms)
               for words in usable], TROPICAL)
    s_prime = compose(invert(g_restricted), s)
    return s_prime, skipped


# -- retrieval and scoring -------------------------------------------------------


@dataclass
class RewriteCandidate:
    entity: str
    cost: float
    span: tuple[int, int] = (0, 0)


def retrieve(z: Fst, s_prime: Fst, semiring: Semiring) -> list[RewriteCandidate]:
    """Entities reachable from the phoneme lattice, scored per semiring.

    Tropical scoring keeps each entity's single best phonetic alignment;
    log scoring sums the mass of all of them before determinization turns
    each entity into exactly one path.
    """
    matched = compose(z, s_prime, "rho_left")
    if matched.is_empty():
        return []
    return _retrieve_from_projection(project_output(matched), semiring,
                                     s_prime.osyms)


def _retrieve_from_projection(projected: Fst, semiring: Semiring,
                              word_syms: SymbolTable) -> list[RewriteCandidate]:
    h = determinize(rmeps(projected, semiring), semiring)
    out = []
    for labels, cost in _all_paths(h):
        entity = " ".join(word_syms.symbol_of(l) for l in labels)
        out.append(RewriteCandidate(entity, cost))
    out.sort(key=lambda c: (c.cost, c.entity))
    return out


def _all_paths(f: Fst, limit: int = 100_000) -> list[tuple[list[int], float]]:
    return shortest_paths(f, limit)


def self_entity_fst(pronunciations: Fst, word_syms: SymbolTable) -> Fst:
    """Wrap a phoneme lattice as a one-entity transducer emitting <self>.

    Used by comparison scoring: the 1-best span's pronunciations become a
    retrievable entity whose log-determinized cost is the mass of every
    lattice path phonetically consistent with the span.
    """
    self_id = word_syms.add(SELF_TOKEN)
    out = Fst(pronunciations.isyms, word_syms)
    start = out.add_state()
    out.set_start(start)
    offset = out.num_states()
    for _ in range(pronunciations.num_states()):
        out.add_state()
    for q, arcs in enumerate(pronunciations.states):
        for a in arcs:
            out.add_arc(offset + q, a.ilabel, EPS, a.weight, offset + a.nextstate)
    for q, w in pronunciations.finals.items():
        out.set_final(offset + q, w)
    if pronunciations.start != NO_STATE:
        out.add_arc(start, EPS, self_id, 0.0, offset + pronunciations.start)
    return out


def comparison_score(z: Fst, span_prons: Fst,
                     word_syms: SymbolTable) -> Optional[float]:
    """Log-determinized path sum of z restricted to the span's own phonetics.

    Returns None when the span cannot be mapped, in which case the caller
    must keep the transcript (conservative default).
    """
    if span_prons.is_empty():
        return None
    candidates = retrieve(z, self_entity_fst(span_prons, word_syms), LOG)
    if not candidates:
        return None
    return candidates[0].cost


@dataclass
class PreparedUtterance:
    """Context-independent per-utterance work: spans with their phoneme
    lattices and the 1-best span pronunciations for comparison scoring."""

    onebest_pieces: list[str]
    spans: list[tuple["SpanMatch", Fst, Fst]]


@dataclass
class PreparedBaseline:
    """Context-independent word-baseline work: the tagged word lattice and
    the per-span phoneme expansions."""

    y: Fst
    spans: list[tuple["SpanMatch", Fst]]


@dataclass
class RewriteDecision:
    verdict: str  # "rewrite" | "keep"
    transcript: str
    onebest: str
    entity: Optional[str] = None
    span: Optional[tuple[int, int]] = None
    candidates: list[RewriteCandidate] = field(default_factory=list)
    comparison_cost: Optional[float] = None

    def to_record(self) -> dict:
        return {
            "onebest": self.onebest,
            "span": list(self.span) if self.span else None,
            "candidates": [{"entity": c.entity, "cost": round(c.cost, 6)}
                           for c in self.candidates[:DEFAULT_TOP_CANDIDATES]],
            "comparison_cost": (None if self.comparison_cost is None
                                else round(self.comparison_cost, 6)),
            "verdict": self.verdict,
            "entity": self.entity,
            "transcript": self.transcript,
        }


def decide(candidates: Sequence[RewriteCandidate], comparison_cost: float,
           margin: float = DEFAULT_MARGIN) -> tuple[str, Optional[RewriteCandidate]]:
    """Rewrite only when the best candidate beats the comparison cost by
    more than the margin (strict inequality)."""
    if not candidates:
        return "keep", None
    best = candidates[0]
    if best.cost + margin < comparison_cost:
        return "rewrite", best
    return "keep", None


def _better_decision(new: RewriteDecision, old: RewriteDecision) -> bool:
    """Prefer accepted rewrites by candidate cost, then informative keeps."""
    if new.verdict == "rewrite":
        if old.verdict != "rewrite":
            return True
        return new.candidates[0].cost < old.candidates[0].cost
    if old.verdict == "rewrite":
        return False
    if bool(new.candidates) != bool(old.candidates):
        return bool(new.candidates)
    if new.candidates and old.candidates:
        return new.candidates[0].cost < old.candidates[0].cost
    return False


def glue_lenient(pieces: Sequence[str]) -> str:
    """Gluing that tolerates a mid-word piece at the boundary of a splice."""
    words: list[str] = []
    for piece in pieces:
        if piece.startswith(WORD_START) or not words:
            words.append(piece.removeprefix(WORD_START))
        else:
            words[-1] += piece
    return " ".join(w for w in words if w)


# -- the engine -------------------------------------------------------------------


@dataclass
class EngineConfig:
    edit_budget: int = 2
    edit_cost: float = 3.0
    tau: float = 0.8
    lam: float = 1.0
    skip_penalty: float = 6.0
    margin: float = DEFAULT_MARGIN
    expand_wordpiece_phonemes: bool = False  # apply P in the wordpiece pipeline
    top_candidates: int = DEFAULT_TOP_CANDIDATES


class RewriteEngine:
    """All machines compiled once; per-utterance rewriting is pure."""

    def __init__(self, grammar: Grammar, lexicon: Lexicon, wpm: WordpieceModel,
                 alignment_table, inventory: PhonemeInventory,
                 config: EngineConfig = EngineConfig()):
        from .g2p import build_w_fst
        from .phonetics import build_edit_fst, build_phoneme_expander

        self.grammar = grammar
        self.lexicon = lexicon
        self.wpm = wpm
        self.inventory = inventory
        self.config = config
        self.alignment_table = alignment_table

        self.ph_syms = inventory.syms
        self.wp_syms = SymbolTable(sorted(wpm.vocab))
        self.word_syms = SymbolTable(lexicon.words())
        inventory.check(lexicon.phoneme_set())

        self.tagger_wp = compile_tagger(grammar, self.wp_syms, "wordpiece", wpm)
        self.tagger_word = compile_tagger(grammar, self.word_syms, "word")
        self.open_wp = self.wp_syms.id_of(grammar.open_tag)
        self.close_wp = self.wp_syms.id_of(grammar.close_tag)
        self.open_word = self.word_syms.id_of(grammar.open_tag)
        self.close_word = self.word_syms.id_of(grammar.close_tag)

        self.w_fst = build_w_fst(alignment_table, self.wp_syms, self.ph_syms,
                                 vocabulary=wpm.vocab,
                                 skip_penalty=config.skip_penalty)
        self.g2p_fst = build_g2p_fst(lexicon, self.word_syms, self.ph_syms)
        self.edit_fst = build_edit_fst(config.edit_budget, config.edit_cost,
                                       self.ph_syms)
        self.expander = build_phoneme_expander(inventory, config.tau, config.lam)

        self.context: Optional[EntityContext] = None
        self.s_prime: Optional[Fst] = None
        self.canonical: dict[str, str] = {}
        self.skipped_entities: list[str] = []

    # -- context ---------------------------------------------------------------

    def set_context(self, context: Optional[EntityContext]) -> None:
        """Compile the phonemes-to-entity transducer for this entity list."""
        if context is None or not context.entities:
            self.context = None
            self.s_prime = None
            self.canonical = {}
            self.skipped_entities = []
            return
        self.context = context
        self.canonical = context.canonical_by_normalized()
        self.s_prime, self.skipped_entities = build_entity_fst(
            context, self.lexicon, self.word_syms, self.ph_syms)

    # -- wordpiece pipeline -------------------------------------------------------

    def lattice_fst(self, lattice: Lattice) -> Fst:
        """Re-key a lattice onto the engine's wordpiece symbols."""
        f = lattice.fst
        if f.isyms == self.wp_syms:
            return f
        out = Fst(self.wp_syms, self.wp_syms)
        for _ in range(f.num_states()):
            out.add_state()
        out.set_start(f.start)
        for q, w in f.finals.items():
            out.set_final(q, w)
        for q, arcs in enumerate(f.states):
            for a in arcs:
                piece = f.isyms.symbol_of(a.ilabel)
                if piece not in self.wp_syms:
                    raise ConfigError(f"lattice wordpiece {piece!r} not in vocabulary")
                label = self.wp_syms.id_of(piece)
                out.add_arc(q, label, label, a.weight, a.nextstate)
        return out

    def tag_wordpiece_lattice(self, lattice: Lattice) -> list[SpanMatch]:
        y, origins = compose(self.lattice_fst(lattice), self.tagger_wp,
                             "sigma_right", keep_origins=True)
        if y.is_empty():
            return []
        return span_groups(y, origins, self.open_wp, self.close_wp)

    def prepare_wordpiece(self, lattice: Lattice) -> "PreparedUtterance":
        """Tag and phoneme-expand once; the result is context independent."""
        onebest_pieces = lattice.one_best()
        expander = self.expander if self.config.expand_wordpiece_phonemes else None
        spans = []
        for match in self.tag_wordpiece_lattice(lattice):
            z = expand_phonemes_wordpiece(match.fst, self.w_fst, self.edit_fst,
                                          expander)
            if z.is_empty():
                continue
            prons = self._span_reading(
                onebest_pieces[match.open_pos:match.close_pos])
            spans.append((match, z, prons))
        return PreparedUtterance(onebest_pieces, spans)

    def _span_reading(self, pieces: Sequence[str]) -> Fst:
        """The 1-best span as a retrieved entity: its modal pronunciation.

        Each piece contributes its most frequent alignment, mirroring a
        dictionary entry; unmapped pieces contribute nothing.  An empty
        result disables comparison scoring for the span.
        """
        phonemes: list[int] = []
        mapped_any = False
        for piece in pieces:
            mappings = self.alignment_table.lookup(piece)
            if mappings:
                mapped_any = True
                phonemes.extend(self.ph_syms.id_of(p) for p in mappings[0][0])
        if not mapped_any:
            return Fst(self.ph_syms, self.ph_syms)
        return chain(phonemes, self.ph_syms)

    def rewrite_wordpiece(self, lattice: Lattice, semiring: Semiring = LOG,
                          use_comparison: bool = False,
                          margin: Optional[float] = None,
                          prepared: Optional["PreparedUtterance"] = None
                          ) -> RewriteDecision:
        """The direct wordpiece pipeline over every lattice path."""
        name = "wp"
        decisions = self.rewrite_wordpiece_multi(
            lattice, [(name, semiring, use_comparison)], margin=margin,
            prepared=prepared)
        return decisions[name]

    def rewrite_wordpiece_multi(self, lattice: Lattice,
                                specs: Sequence[tuple[str, Semiring, bool]],
                                margin: Optional[float] = None,
                                prepared: Optional["PreparedUtterance"] = None
                                ) -> dict[str, RewriteDecision]:
        """Several scoring variants over one lattice, sharing the expensive
        entity composition per span (it does not depend on the semiring)."""
        margin = self.config.margin if margin is None else margin
        if prepared is None:
            prepared = self.prepare_wordpiece(lattice)
        onebest_pieces = prepared.onebest_pieces
        onebest = glue_lenient(onebest_pieces)
        keep = RewriteDecision("keep", onebest, onebest)
        if self.s_prime is None:
            return {name: keep for name, _, _ in specs}

        semirings = {semiring for _, semiring, _ in specs}
        need_comparison = any(comp for _, _, comp in specs)
        best: dict[str, Optional[RewriteDecision]] = {n: None for n, _, _ in specs}
        for match, z, prons in prepared.spans:
            matched = compose(z, self.s_prime, "rho_left")
            if matched.is_empty():
                by_semiring = {sr: [] for sr in semirings}
            else:
                projected = project_output(matched)
                by_semiring = {
                    sr: _retrieve_from_projection(projected, sr, self.word_syms)
                    for sr in semirings}
            comparison = None
            if need_comparison:
                comparison = comparison_score(z, prons, self.word_syms)
            span_pos = (match.open_pos, match.close_pos)
            for name, semiring, use_comparison in specs:
                candidates = [
                    RewriteCandidate(c.entity, c.cost, span_pos)
                    for c in by_semiring[semiring]]
                if use_comparison:
                    if comparison is None:
                        continue  # unmappable span: conservative keep
                    threshold = comparison
                else:
                    threshold = ZERO
                verdict, top = decide(candidates, threshold, margin)
                decision = RewriteDecision(
                    verdict, onebest, onebest, span=span_pos,
                    candidates=candidates[:self.config.top_candidates],
                    comparison_cost=comparison if use_comparison else None)
                if verdict == "rewrite":
                    decision.entity = self.canonical.get(top.entity, top.entity)
                    decision.transcript = self._splice(
                        onebest_pieces, match.open_pos, match.close_pos,
                        decision.entity)
                if best[name] is None or _better_decision(decision, best[name]):
                    best[name] = decision
        return {name: (d if d is not None else keep) for name, d in best.items()}

    def _splice(self, pieces: Sequence[str], open_pos: int, close_pos: int,
                entity: str) -> str:
        prefix = glue_lenient(pieces[:open_pos])
        suffix = glue_lenient(pieces[close_pos:])
        return " ".join(part for part in (prefix, entity.lower(), suffix) if part)

    # -- word-based baseline ---------------------------------------------------------

    def word_lattice_from_paths(self, paths: Sequence[Sequence[str]],
                                costs: Sequence[float]) -> Optional[Fst]:
        """Glue wordpiece paths into words, keeping only in-lexicon paths."""
        valid_paths: list[list[str]] = []
        valid_costs: list[float] = []
        for path, cost in zip(paths, costs):
            try:
                words = glue_wordpieces(path).split()
            except DataError:
                continue
            if words and all(w in self.lexicon for w in words):
                valid_paths.append(words)
                valid_costs.append(cost)
        if not valid_paths:
            return None
        wl = words_to_lattice(valid_paths, valid_costs, self.word_syms)
        return determinize(rmeps(wl, TROPICAL), TROPICAL)

    def prepare_word_baseline(self, lattice: Lattice,
                              paths: Sequence[Sequence[str]],
                              costs: Sequence[float]
                              ) -> Optional["PreparedBaseline"]:
        """Glue, filter, tag and expand the word lattice once per path set."""
        wl = self.word_lattice_from_paths(paths, costs)
        if wl is None:
            return None
        y, origins = compose(wl, self.tagger_word, "sigma_right",
                             keep_origins=True)
        if y.is_empty():
            return None
        spans = []
        for match in span_groups(y, origins, self.open_word, self.close_word):
            z = expand_phonemes_word(match.fst, self.g2p_fst, self.expander,
                                     self.edit_fst)
            if not z.is_empty():
                spans.append((match, z))
        return PreparedBaseline(y, spans)

    def rewrite_word_baseline(self, lattice: Lattice,
                              paths: Sequence[Sequence[str]],
                              costs: Sequence[float],
                              margin: Optional[float] = None,
                              prepared: Optional["PreparedBaseline"] = None
                              ) -> RewriteDecision:
        """The word-based pipeline (G2P + similarity + edits, tropical)."""
        margin = self.config.margin if margin is None else margin
        onebest = glue_lenient(lattice.one_best())
        keep = RewriteDecision("keep", onebest, onebest)
        if self.s_prime is None:
            return keep
        if prepared is None:
            prepared = self.prepare_word_baseline(lattice, paths, costs)
        if prepared is None:
            return keep
        y = prepared.y

        best_decision: Optional[RewriteDecision] = None
        for match, z in prepared.spans:
            candidates = retrieve(z, self.s_prime, TROPICAL)
            for c in candidates:
                c.span = (match.open_pos, match.close_pos)
            verdict, best = decide(candidates, ZERO, margin)
            if verdict != "rewrite":
                continue
            entity = self.canonical.get(best.entity, best.entity)
            transcript = self._baseline_transcript(y, match, entity)
            decision = RewriteDecision(
                "rewrite", transcript, onebest, entity=entity,
                span=(match.open_pos, match.close_pos),
                candidates=candidates[:self.config.top_candidates])
            if (best_decision is None
                    or best.cost < best_decision.candidates[0].cost):
                best_decision = decision
        return best_decision if best_decision is not None else keep

    def _baseline_transcript(self, y: Fst, match: SpanMatch, entity: str) -> str:
        """Best tagged path through this span group, span replaced by entity."""
        filtered = Fst(y.isyms, y.osyms)
        for _ in range(y.num_states()):
            filtered.add_state()
        filtered.set_start(y.start)
        for q, w in y.finals.items():
            filtered.set_final(q, w)
        # keep only this group's tag arcs so the best path crosses its span
        for q, arcs in enumerate(y.states):
            for arc in arcs:
                if arc.olabel == self.open_word:
                    if arc.nextstate not in match.entry_states:
                        continue
                elif arc.olabel == self.close_word:
                    if q not in match.exit_states:
                        continue
                filtered.add_arc(q, arc.ilabel, arc.olabel, arc.weight,
                                 arc.nextstate)
        paths = shortest_paths(project_output(connect(filtered)), 1)
        if not paths:
            return entity.lower()
        labels = paths[0][0]
        words: list[str] = []
        in_span = False
        for label in labels:
            if label == self.open_word:
                in_span = True
                words.append(entity.lower())
            elif label == self.close_word:
                in_span = False
            elif not in_span:
                words.append(self.word_syms.symbol_of(label))
        return " ".join(words)
