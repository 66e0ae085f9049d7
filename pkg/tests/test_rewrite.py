import math

import pytest

from fstspell.errors import ConfigError, EmptyContextError
from fstspell.fst import (
    Fst,
    SymbolTable,
    chain,
    compose,
    project_output,
    rmeps,
    union,
)
from fstspell.g2p import AlignmentTable, Lexicon, LexiconEntry, WordpieceModel
from fstspell.lattice import build_sausage
from fstspell.phonetics import PhonemeInventory, build_edit_fst
from fstspell.rewrite import (
    EngineConfig,
    EntityContext,
    Grammar,
    RewriteCandidate,
    RewriteEngine,
    build_entity_fst,
    comparison_score,
    compile_tagger,
    decide,
    expand_phonemes_word,
    expand_phonemes_wordpiece,
    extract_tagged_span,
    glue_lenient,
    retrieve,
    span_groups,
)
from fstspell.semiring import LOG, TROPICAL, ZERO

from oracles import logsumexp_costs, weighted_language


def char_vocab(extra=()):
    letters = "abcdefghijklmnopqrstuvwxyz'-"
    vocab = [ch for ch in letters] + ["▁" + ch for ch in letters]
    return vocab + list(extra)


PIECES = ["▁call", "▁co", "zy", "▁mo", "bin", "▁cau",
          "▁best", "▁beth", "▁bet", "▁by", "er",
          "▁buy", "▁mobile", "▁please"]


@pytest.fixture(scope="module")
def resources():
    lexicon = Lexicon([
        LexiconEntry("call", [["k", "O", "l"]], 90000),
        LexiconEntry("cozy", [["k", "oU", "z", "i"]], 400),
        LexiconEntry("mobin", [["m", "oU", "b", "I", "n"]], 5),
        LexiconEntry("mobile", [["m", "oU", "b", "@", "l"]], 8000),
        LexiconEntry("best", [["b", "E", "s", "t"]], 20000),
        LexiconEntry("buy", [["b", "aI"]], 15000),
        LexiconEntry("beth", [["b", "E", "T"]], 300),
        LexiconEntry("byer", [["b", "aI", "@`"]], 10),
        LexiconEntry("please", [["p", "l", "i", "z"]], 30000),
        LexiconEntry("the", [["D", "@"]], 99000),
    ])
    wpm = WordpieceModel(char_vocab(PIECES))
    table = AlignmentTable({
        "▁call": [(("k", "O", "l"), 900.0)],
        "▁co": [(("k", "oU"), 300.0)],
        "zy": [(("z", "i"), 200.0)],
        "▁mo": [(("m", "oU"), 250.0)],
        "bin": [(("b", "I", "n"), 120.0)],
        "▁cau": [(("k", "A"), 80.0)],
        "▁best": [(("b", "E", "s", "t"), 500.0)],
        "▁beth": [(("b", "E", "T"), 90.0)],
        "▁bet": [(("b", "E", "T"), 40.0)],
        "▁by": [(("b", "aI"), 150.0)],
        "er": [(("@`",), 260.0)],
        "▁buy": [(("b", "aI"), 320.0)],
        "▁mobile": [(("m", "oU", "b", "@", "l"), 410.0)],
        "▁please": [(("p", "l", "i", "z"), 800.0)],
    })
    grammar = Grammar("contact", [["call", "$"], ["call", "$", "mobile"]])
    inventory = PhonemeInventory.load()
    return lexicon, wpm, table, grammar, inventory


@pytest.fixture(scope="module")
def engine(resources):
    lexicon, wpm, table, grammar, inventory = resources
    eng = RewriteEngine(grammar, lexicon, wpm, table, inventory,
                        EngineConfig(edit_budget=2, edit_cost=3.0))
    eng.set_context(EntityContext(["Cozy Mobin", "Beth Byer"], "contact"))
    return eng


def tokens_of(fst, labels, side="o"):
    table = fst.osyms if side == "o" else fst.isyms
    return [table.symbol_of(l) for l in labels]


# -- grammar / tagger ------------------------------------------------------------


def test_grammar_validation():
    with pytest.raises(ConfigError):
        Grammar("c", [["call"]])
    with pytest.raises(ConfigError):
        Grammar("c", [["call", "$", "$"]])
    with pytest.raises(ConfigError):
        Grammar("c", [])


def test_tagger_inserts_tags_word_level(engine):
    syms = engine.word_syms
    utt = chain([syms.id_of(w) for w in ["call", "cozy", "mobin"]], syms)
    y = compose(utt, engine.tagger_word, "sigma_right")
    outs = {tuple(tokens_of(y, list(o))) for (_, o) in
            weighted_language(y, TROPICAL)}
    assert ("call", "<contact>", "cozy", "mobin", "</contact>") in outs


def test_tagger_no_carrier_empty(engine):
    syms = engine.word_syms
    utt = chain([syms.id_of(w) for w in ["the", "best"]], syms)
    y = compose(utt, engine.tagger_word, "sigma_right")
    assert y.is_empty()


def test_tagger_both_patterns_match_with_suffix(engine):
    syms = engine.word_syms
    utt = chain([syms.id_of(w) for w in ["call", "cozy", "mobin", "mobile"]], syms)
    y = compose(utt, engine.tagger_word, "sigma_right")
    outs = {tuple(tokens_of(y, list(o))) for (_, o) in
            weighted_language(y, TROPICAL)}
    assert ("call", "<contact>", "cozy", "mobin", "mobile", "</contact>") in outs
    assert ("call", "<contact>", "cozy", "mobin", "</contact>", "mobile") in outs


def test_tagger_unknown_carrier_token(resources):
    lexicon, wpm, table, grammar, inventory = resources
    syms = SymbolTable(["xyzzy"])
    with pytest.raises(ConfigError):
        compile_tagger(Grammar("c", [["call", "$"]]), syms, "word")


# -- span extraction ----------------------------------------------------------------


def test_extract_tagged_span_fig3(engine):
    syms = engine.word_syms
    utt = chain([syms.id_of(w) for w in ["call", "cozy", "mobin"]], syms)
    y = compose(utt, engine.tagger_word, "sigma_right")
    span = extract_tagged_span(y, engine.open_word, engine.close_word)
    lang = weighted_language(span, TROPICAL)
    strings = {tuple(tokens_of(span, list(i))) for (i, _) in lang}
    assert ("cozy", "mobin") in strings


def test_extract_tagged_span_tag_free(engine):
    syms = engine.word_syms
    utt = chain([syms.id_of("the")], syms)
    span = extract_tagged_span(utt, engine.open_word, engine.close_word)
    assert span.is_empty()


def test_extract_overlapping_taggings_union(engine):
    syms = engine.word_syms
    utt = chain([syms.id_of(w) for w in ["call", "cozy", "mobin", "mobile"]], syms)
    y = compose(utt, engine.tagger_word, "sigma_right")
    span = extract_tagged_span(y, engine.open_word, engine.close_word)
    strings = {tuple(tokens_of(span, list(i)))
               for (i, _) in weighted_language(span, TROPICAL)}
    assert ("cozy", "mobin") in strings
    assert ("cozy", "mobin", "mobile") in strings


def test_span_groups_positions(engine):
    # "call $" tags every span start..k: both "▁co" and "▁co zy" hypotheses
    lat = build_sausage([[("▁call", 0.0)], [("▁co", 0.1)],
                         [("zy", 0.0)]], engine.wp_syms)
    groups = engine.tag_wordpiece_lattice(lat)
    spans = {(g.open_pos, g.close_pos) for g in groups}
    assert spans == {(1, 2), (1, 3)}
    full = next(g for g in groups if g.close_pos == 3)
    strings = {tuple(tokens_of(full.fst, list(i)))
               for (i, _) in weighted_language(full.fst, TROPICAL)}
    assert strings == {("▁co", "zy")}


# -- phoneme expansion ----------------------------------------------------------------


def test_expand_phonemes_word_contains_base_pronunciation(engine):
    syms = engine.word_syms
    span = chain([syms.id_of("cozy")], syms, cost=0.4)
    z = expand_phonemes_word(span, engine.g2p_fst, engine.expander,
                             engine.edit_fst)
    lang = weighted_language(z, TROPICAL)
    key = tuple(engine.ph_syms.id_of(p) for p in ["k", "oU", "z", "i"])
    assert lang[(key, key)] == pytest.approx(0.4, abs=1e-9)


def test_expand_phonemes_word_degenerate_equals_bare_g2p(engine):
    syms = engine.word_syms
    span = chain([syms.id_of("cozy")], syms, cost=0.4)
    z = expand_phonemes_word(span, engine.g2p_fst, None,
                             build_edit_fst(0, 1.0, engine.ph_syms))
    bare = project_output(compose(span, engine.g2p_fst))
    assert weighted_language(z, TROPICAL) == weighted_language(bare, TROPICAL)


def test_expand_phonemes_wordpiece_maps_alignments(engine):
    span = chain([engine.wp_syms.id_of("▁co"), engine.wp_syms.id_of("zy")],
                 engine.wp_syms, cost=0.2)
    z = expand_phonemes_wordpiece(span, engine.w_fst,
                                  build_edit_fst(0, 1.0, engine.ph_syms))
    lang = weighted_language(z, TROPICAL)
    key = tuple(engine.ph_syms.id_of(p) for p in ["k", "oU", "z", "i"])
    assert lang == {(key, key): pytest.approx(0.2, abs=1e-9)}


def test_expand_adds_paths_only(engine):
    span = chain([engine.wp_syms.id_of("▁co")], engine.wp_syms)
    z0 = expand_phonemes_wordpiece(span, engine.w_fst,
                                   build_edit_fst(0, 1.0, engine.ph_syms))
    z2 = expand_phonemes_wordpiece(span, engine.w_fst, engine.edit_fst)
    assert len(weighted_language(z2, TROPICAL)) >= len(weighted_language(z0, TROPICAL))


# -- entity fst -------------------------------------------------------------------


def test_build_entity_fst_maps_please(resources, engine):
    lexicon = resources[0]
    s_prime, skipped = build_entity_fst(
        EntityContext(["Please"]), lexicon, engine.word_syms, engine.ph_syms)
    assert skipped == []
    phon = chain([engine.ph_syms.id_of(p) for p in ["p", "l", "i", "z"]],
                 engine.ph_syms)
    lang = weighted_language(project_output(compose(phon, s_prime)), TROPICAL)
    key = (engine.word_syms.id_of("please"),)
    assert lang == {(key, key): 0.0}


def test_build_entity_fst_skips_unmappable(resources, engine):
    lexicon = resources[0]
    s_prime, skipped = build_entity_fst(
        EntityContext(["please", "qwrrgh zzz"]), lexicon,
        engine.word_syms, engine.ph_syms)
    assert skipped == ["qwrrgh zzz"]
    with pytest.raises(EmptyContextError):
        build_entity_fst(EntityContext(["qwrrgh"]), lexicon,
                         engine.word_syms, engine.ph_syms)


def test_build_entity_fst_shared_pronunciation(resources, engine):
    lexicon = resources[0]
    # buy and the second word of "beth byer" share /b aI/ prefixes; use two
    # single-word entities with identical pronunciations via by/buy
    s_prime, _ = build_entity_fst(
        EntityContext(["buy", "byer"]), lexicon, engine.word_syms, engine.ph_syms)
    phon = chain([engine.ph_syms.id_of(p) for p in ["b", "aI"]], engine.ph_syms)
    lang = weighted_language(project_output(compose(phon, s_prime)), TROPICAL)
    assert ((engine.word_syms.id_of("buy"),),) * 2 in [tuple(k) for k in lang]


# -- retrieve ---------------------------------------------------------------------


def make_z(engine, paths):
    """Acceptor union of phoneme paths with costs."""
    chains = []
    for phonemes, cost in paths:
        chains.append(chain([engine.ph_syms.id_of(p) for p in phonemes],
                            engine.ph_syms, cost=cost))
    return rmeps(union(chains, LOG), LOG)


def test_retrieve_truth_ranks_first_tropical(engine):
    z = make_z(engine, [
        (["k", "oU", "z", "i", "m", "oU", "b", "I", "n"], 0.3),
        (["b", "E", "T", "b", "aI", "@`"], 5.0),
    ])
    candidates = retrieve(z, engine.s_prime, TROPICAL)
    assert candidates[0].entity == "cozy mobin"
    assert candidates[0].cost == pytest.approx(0.3, abs=1e-9)


def test_retrieve_two_alignments_log_sums(engine):
    z = make_z(engine, [
        (["k", "oU", "z", "i", "m", "oU", "b", "I", "n"], 1.0),
        (["k", "oU", "z", "i", "m", "oU", "b", "I", "n"], 2.0),
    ])
    trop = retrieve(z, engine.s_prime, TROPICAL)
    logc = retrieve(z, engine.s_prime, LOG)
    assert trop[0].cost == pytest.approx(1.0, abs=1e-9)
    assert logc[0].cost == pytest.approx(logsumexp_costs([1.0, 2.0]), abs=1e-9)
    assert logc[0].cost == pytest.approx(0.6867383, abs=1e-6)


def test_retrieve_empty_composition(engine):
    z = make_z(engine, [(["p", "l", "i", "z"], 0.1)])
    assert retrieve(z, engine.s_prime, LOG) == []


def test_retrieve_ranking_invariant_under_constant_shift(engine):
    base = [(["k", "oU", "z", "i", "m", "oU", "b", "I", "n"], 0.7),
            (["b", "E", "T", "b", "aI", "@`"], 1.1)]
    got = retrieve(make_z(engine, base), engine.s_prime, LOG)
    shifted = retrieve(make_z(engine, [(p, c + 2.5) for p, c in base]),
                       engine.s_prime, LOG)
    assert [c.entity for c in got] == [c.entity for c in shifted]
    for a, b in zip(got, shifted):
        assert b.cost - a.cost == pytest.approx(2.5, abs=1e-9)


# -- comparison scoring ----------------------------------------------------------


def test_comparison_equals_own_path_sum(engine):
    span = chain([engine.wp_syms.id_of("▁co"), engine.wp_syms.id_of("zy")],
                 engine.wp_syms, cost=0.8)
    z = expand_phonemes_wordpiece(span, engine.w_fst,
                                  build_edit_fst(0, 1.0, engine.ph_syms))
    # the span rescored as its own entity: pronunciations are unweighted,
    # the cost comes from the lattice side
    free_span = chain([engine.wp_syms.id_of("▁co"),
                       engine.wp_syms.id_of("zy")], engine.wp_syms)
    prons = rmeps(project_output(compose(free_span, engine.w_fst)), LOG)
    got = comparison_score(z, prons, engine.word_syms)
    assert got == pytest.approx(0.8, abs=1e-9)


def test_comparison_none_when_unmappable(engine):
    empty = Fst(engine.ph_syms, engine.ph_syms)
    z = make_z(engine, [(["k", "oU"], 0.1)])
    assert comparison_score(z, empty, engine.word_syms) is None


def test_comparison_direction_best_buy_vs_beth_byer(resources):
    """The verdict must follow whichever side's path sum is lower."""
    lexicon, wpm, table, _, inventory = resources
    grammar = Grammar("contact", [["call", "$"]])
    eng = RewriteEngine(grammar, lexicon, wpm, table, inventory,
                        EngineConfig(edit_budget=2, edit_cost=3.0))
    eng.set_context(EntityContext(["Beth Byer"], "contact"))

    def decision_for(beth_cost, bet_cost, best_cost):
        lat = build_sausage(
            [[("▁call", 0.0)],
             [("▁best", best_cost), ("▁beth", beth_cost),
              ("▁bet", bet_cost)],
             [("▁by", 0.3), ("▁buy", 1.5)],
             [("er", 0.4), ("a", 1.2)]],
            eng.wp_syms)
        assert lat.one_best()[1] == "▁best"
        return eng.rewrite_wordpiece(lat, LOG, use_comparison=True)

    # clean audio: "best" dominates, its own reading out-masses the entity
    keep = decision_for(beth_cost=2.5, bet_cost=2.6, best_cost=0.2)
    assert keep.verdict == "keep"
    # noisy audio: two piece spellings both support /b E T .../, the summed
    # mass beats the lone best-path reading
    flip = decision_for(beth_cost=1.2, bet_cost=1.3, best_cost=1.0)
    assert flip.verdict == "rewrite"
    assert flip.entity == "Beth Byer"
    # demote the second spelling and the consensus evaporates: keep again
    single = decision_for(beth_cost=1.2, bet_cost=9.0, best_cost=1.0)
    assert single.verdict == "keep"


# -- decide ------------------------------------------------------------------------


def test_decide_empty_keeps():
    assert decide([], ZERO) == ("keep", None)


def test_decide_clear_winner_rewrites():
    cand = RewriteCandidate("beth byer", 1.0)
    verdict, best = decide([cand], 10.0)
    assert verdict == "rewrite" and best is cand


def test_decide_margin_tie_keeps():
    cand = RewriteCandidate("beth byer", 1.0)
    assert decide([cand], 1.5, margin=0.5)[0] == "keep"
    assert decide([cand], 1.5 + 1e-9, margin=0.5)[0] == "rewrite"


def test_decide_infinite_margin_never_rewrites():
    cand = RewriteCandidate("beth byer", 1.0)
    assert decide([cand], ZERO, margin=math.inf)[0] == "keep"


def test_decide_monotone_in_best_cost():
    comparison, margin = 5.0, 0.0
    previous = None
    for cost in [10.0, 6.0, 5.0, 4.999, 1.0]:
        verdict, _ = decide([RewriteCandidate("e", cost)], comparison, margin)
        if previous == "rewrite":
            assert verdict == "rewrite"
        previous = verdict


# -- the engine end to end -----------------------------------------------------------


def corrupted_cozy_lattice(engine, demote_truth=True):
    co = [("▁cau", 0.5), ("▁co", 1.2)] if demote_truth else \
        [("▁co", 0.2), ("▁cau", 2.0)]
    return build_sausage(
        [[("▁call", 0.1)],
         co,
         [("zy", 0.2)],
         [("▁mo", 0.1)],
         [("bin", 0.3)]],
        engine.wp_syms)


def test_engine_rewrites_corrupted_entity(engine):
    lat = corrupted_cozy_lattice(engine)
    assert lat.one_best()[1] == "▁cau"  # truth demoted
    decision = engine.rewrite_wordpiece(lat, LOG)
    assert decision.verdict == "rewrite"
    assert decision.entity == "Cozy Mobin"
    assert decision.transcript == "call cozy mobin"
    assert decision.span == (1, 5)
    assert decision.onebest == "call cauzy mobin"


def test_engine_infinite_margin_is_identity(engine):
    lat = corrupted_cozy_lattice(engine)
    decision = engine.rewrite_wordpiece(lat, LOG, margin=math.inf)
    assert decision.verdict == "keep"
    assert decision.transcript == decision.onebest


def test_engine_empty_context_keeps(resources):
    lexicon, wpm, table, grammar, inventory = resources
    eng = RewriteEngine(grammar, lexicon, wpm, table, inventory)
    eng.set_context(None)
    lat = corrupted_cozy_lattice(eng)
    assert eng.rewrite_wordpiece(lat, LOG).verdict == "keep"


def test_engine_no_grammar_match_keeps(engine):
    lat = build_sausage([[("▁please", 0.0)], [("▁co", 0.2)]],
                        engine.wp_syms)
    decision = engine.rewrite_wordpiece(lat, LOG)
    assert decision.verdict == "keep"
    assert decision.transcript == "please co"


def test_engine_decision_record_schema(engine):
    lat = corrupted_cozy_lattice(engine)
    record = engine.rewrite_wordpiece(lat, LOG).to_record()
    assert set(record) == {"onebest", "span", "candidates", "comparison_cost",
                           "verdict", "entity", "transcript"}
    assert record["candidates"] and "cost" in record["candidates"][0]
    assert record["comparison_cost"] is None
    with_comp = engine.rewrite_wordpiece(lat, LOG, use_comparison=True).to_record()
    assert with_comp["verdict"] in ("rewrite", "keep")
    assert with_comp["candidates"]


# -- word baseline ----------------------------------------------------------------


def test_word_baseline_recalls_with_enough_paths(engine):
    lat = corrupted_cozy_lattice(engine)
    from fstspell.fst import shortest_paths as nbest
    paths = []
    costs = []
    for labels, cost in nbest(engine.lattice_fst(lat), 1000):
        paths.append([engine.wp_syms.symbol_of(l) for l in labels])
        costs.append(cost)
    decision = engine.rewrite_word_baseline(lat, paths, costs)
    assert decision.verdict == "rewrite"
    assert decision.entity == "Cozy Mobin"
    assert decision.transcript == "call cozy mobin"
    # the corrupted 1-best alone glues to out-of-lexicon words: keep
    one = engine.rewrite_word_baseline(lat, paths[:1], costs[:1])
    assert one.verdict == "keep"
    assert one.transcript == "call cauzy mobin"


def test_word_baseline_superset_recall(engine):
    lat = corrupted_cozy_lattice(engine)
    from fstspell.fst import shortest_paths as nbest
    all_paths = [([engine.wp_syms.symbol_of(l) for l in labels], cost)
                 for labels, cost in nbest(engine.lattice_fst(lat), 1000)]

    def candidates_with(n):
        paths = [p for p, _ in all_paths[:n]]
        costs = [c for _, c in all_paths[:n]]
        wl = engine.word_lattice_from_paths(paths, costs)
        if wl is None:
            return set()
        y, origins = compose(wl, engine.tagger_word, "sigma_right",
                             keep_origins=True)
        if y.is_empty():
            return set()
        found = set()
        for match in span_groups(y, origins, engine.open_word, engine.close_word):
            z = expand_phonemes_word(match.fst, engine.g2p_fst, engine.expander,
                                     engine.edit_fst)
            if z.is_empty():
                continue
            found.update(c.entity for c in retrieve(z, engine.s_prime, TROPICAL))
        return found

    assert candidates_with(1) <= candidates_with(1000)


# -- glue helper --------------------------------------------------------------------


def test_glue_lenient_tolerates_mid_word_boundary():
    assert glue_lenient(["zy", "▁mo"]) == "zy mo"
    assert glue_lenient([]) == ""
    assert glue_lenient(["▁co", "zy"]) == "cozy"
