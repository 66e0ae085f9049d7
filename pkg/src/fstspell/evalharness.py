"""Synthetic evaluation: test-set generation, distractor sweeps and SER.

The paper-style protocol at desk scale: in-context utterances pair a
type-appropriate carrier ("call" for contacts, "open" for apps, "play" for
songs) with a truth entity; anti-context utterances are general queries with
no relevant entity, so every rewrite of one is an error.  TTS audio is
replaced by a deterministic confusion model whose alternatives are
phonetically close wordpieces, which preserves the one property rewriting
needs: wrong pieces still carry the right phonetics.

Everything is seeded; rerunning a config byte-identically reproduces the
report.
"""

import json
import math
import random
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError, DataError
from .fst import shortest_paths
from .g2p import (
    AlignmentTable,
    Lexicon,
    WordpieceModel,
    extract_alignments,
    make_training_pairs,
    train_ibm2,
)
from .lattice import (
    WORD_START,
    ConfusionModel,
    Lattice,
    corrupt,
    sample_random_paths,
)
from .phonetics import PhonemeInventory, feature_distance
from .rewrite import (
    EngineConfig,
    EntityContext,
    Grammar,
    RewriteDecision,
    RewriteEngine,
    glue_lenient,
)
from .semiring import LOG, TROPICAL

METHOD_NAMES = ("nbest-1", "nbest-1000", "random-n", "wp", "wp+logdet",
                "wp+logdet+compsc")

INDEL_COST = 1.2  # phoneme insertion/deletion weight inside piece distances

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


# -- SER ----------------------------------------------------------------------


def normalize_transcript(text: str) -> str:
    return " ".join(text.lower().translate(_PUNCT_TABLE).split())


def compute_ser(refs: Sequence[str], hyps: Sequence[str]) -> float:
    """Fraction of sentences whose normalized transcript mismatches."""
    if len(refs) != len(hyps):
        raise DataError(f"refs ({len(refs)}) and hyps ({len(hyps)}) differ in length")
    if not refs:
        return 0.0
    wrong = sum(1 for r, h in zip(refs, hyps)
                if normalize_transcript(r) != normalize_transcript(h))
    return wrong / len(refs)


def relative_reduction(base: float, experiment: float) -> float:
    if base == 0.0:
        return 0.0
    return (base - experiment) / base


# -- confusion model ------------------------------------------------------------


def _piece_pronunciation(piece: str, table: AlignmentTable) -> tuple[str, ...]:
    mappings = table.lookup(piece)
    return mappings[0][0] if mappings else ()


def _phoneme_edit_distance(a: Sequence[str], b: Sequence[str],
                           inventory: PhonemeInventory) -> float:
    prev = [j * INDEL_COST for j in range(len(b) + 1)]
    for i, pa in enumerate(a, 1):
        cur = [i * INDEL_COST]
        for j, pb in enumerate(b, 1):
            sub = prev[j - 1] + (0.0 if pa == pb
                                 else min(feature_distance(inventory, pa, pb), 2.5)
                                 if pa in inventory and pb in inventory else 2.5)
            cur.append(min(prev[j] + INDEL_COST, cur[j - 1] + INDEL_COST, sub))
        prev = cur
    return prev[-1]


@dataclass
class NoiseSpec:
    """Frozen corruption parameters for a synthetic test set.

    A demotion flips the slot's 1-best to the most distant alternative but
    keeps the flip mass-mild (winner/truth shares of the truth probability),
    mimicking CTC misrecognitions whose truth-consistent mass survives.
    """

    truth_probability: float = 0.55
    alternatives: int = 3
    demote_entity: float = 0.45
    demote_carrier: float = 0.1
    distance_cap: float = 3.5
    sharpness: float = 1.0
    demoted_winner_share: float = 0.72
    demoted_truth_share: float = 0.60
    drop_truth: float = 0.5  # fraction of demotions that lose the truth piece

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseSpec":
        return cls(**{k: doc[k] for k in doc if not k.startswith("_")})


def build_confusion_model(wpm: WordpieceModel, table: AlignmentTable,
                          inventory: PhonemeInventory, noise: NoiseSpec,
                          seed: int, protected: Sequence[str] = ()) -> ConfusionModel:
    """Phonetically plausible per-piece alternatives with seeded demotions.

    Pieces in ``protected`` (carrier-word pieces) are demoted at the lower
    carrier rate so grammar spans stay findable in the lattice, matching the
    paper's observation that conditional independence keeps carriers intact.
    """
    rng = random.Random(f"{seed}:confusion")
    pieces = sorted(wpm.vocab)
    prons = {p: _piece_pronunciation(p, table) for p in pieces}
    by_type: dict[bool, list[str]] = {True: [], False: []}
    for p in pieces:
        by_type[p.startswith(WORD_START)].append(p)

    protected_set = set(protected)
    alternatives: dict[str, list[tuple[str, float]]] = {}
    for piece in pieces:
        pron = prons[piece]
        candidates: list[tuple[float, str]] = []
        if pron:
            for other in by_type[piece.startswith(WORD_START)]:
                if other == piece or not prons[other]:
                    continue
                d = _phoneme_edit_distance(pron, prons[other], inventory)
                if d <= noise.distance_cap:
                    candidates.append((d, other))
        candidates.sort()
        chosen = candidates[:noise.alternatives]
        if not chosen:
            alternatives[piece] = [(piece, 0.0)]
            continue
        p_truth = noise.truth_probability
        weights = [math.exp(-noise.sharpness * d) for d, _ in chosen]
        total = sum(weights)
        demote_p = (noise.demote_carrier if piece in protected_set
                    else noise.demote_entity)
        if rng.random() < demote_p:
            # misrecognize: the most distant alternative becomes the 1-best,
            # but mildly, so truth-consistent mass survives in the slot
            p_winner = p_truth * noise.demoted_winner_share
            p_kept = p_truth * noise.demoted_truth_share
            others = chosen[:-1]
            if others and rng.random() < noise.drop_truth:
                # hard misrecognition: the truth piece vanishes entirely and
                # only acoustically close spellings keep its phonetics alive
                rest = max(0.96 - p_winner, 0.0)
                other_total = sum(math.exp(-noise.sharpness * d) for d, _ in others)
                probs = [(chosen[-1][1], p_winner)] + [
                    (other, rest * math.exp(-noise.sharpness * d) / other_total)
                    for d, other in others]
            else:
                probs = [(chosen[-1][1], p_winner), (piece, p_kept)]
                if others:
                    rest = max(0.96 - p_winner - p_kept, 0.0)
                    other_total = sum(math.exp(-noise.sharpness * d)
                                      for d, _ in others)
                    probs.extend(
                        (other, rest * math.exp(-noise.sharpness * d) / other_total)
                        for d, other in others)
        else:
            rest = (1.0 - p_truth) * 0.96
            probs = [(piece, p_truth)] + [
                (other, rest * w / total) for (d, other), w in zip(chosen, weights)]
        probs.sort(key=lambda kv: (-kv[1], kv[0]))
        alternatives[piece] = [(p, -math.log(prob)) for p, prob in probs]
    return ConfusionModel(alternatives, seed)


# -- test set ---------------------------------------------------------------------


@dataclass
class TestUtterance:
    __test__ = False  # not a pytest class

    uid: int
    kind: str  # "in" | "anti"
    reference: str
    lattice: Lattice
    truth: Optional[str] = None
    carrier: Optional[str] = None


@dataclass
class TestCounts:
    __test__ = False  # not a pytest class

    in_context: int = 50
    anti_context: int = 20


def gen_testset(pools: dict[str, list[str]], carriers: dict[str, str],
                anti_templates: Sequence[str], confusion: ConfusionModel,
                counts: TestCounts, seed: int, wpm: WordpieceModel,
                syms=None) -> list[TestUtterance]:
    """Deterministic in-context and anti-context utterances."""
    for name, pool in pools.items():
        if not pool:
            raise ConfigError(f"entity pool {name!r} is empty")
    if counts.anti_context > 0 and not anti_templates:
        raise ConfigError("anti-context requested but template pool is empty")
    rng = random.Random(f"{seed}:testset")
    kinds = sorted(pools)
    utterances: list[TestUtterance] = []
    for i in range(counts.in_context):
        kind = kinds[i % len(kinds)]
        entity = rng.choice(pools[kind])
        carrier = carriers[kind]
        reference = f"{carrier} {entity.lower()}"
        pieces = wpm.segment_words(reference.split())
        utterances.append(TestUtterance(
            uid=len(utterances), kind="in", reference=reference,
            lattice=corrupt(pieces, confusion, syms),
            truth=entity, carrier=carrier))
    for i in range(counts.anti_context):
        reference = anti_templates[i % len(anti_templates)]
        pieces = wpm.segment_words(reference.split())
        utterances.append(TestUtterance(
            uid=len(utterances), kind="anti", reference=reference,
            lattice=corrupt(pieces, confusion, syms)))
    return utterances


def sample_distractors(pool: Sequence[str], n: int, seed: str,
                       truth: Optional[str]) -> EntityContext:
    """n distinct non-truth entities, plus the truth when one exists."""
    rng = random.Random(seed)
    non_truth = sorted(e for e in set(pool) if e != truth)
    if n > len(non_truth):
        raise ConfigError(
            f"need {n} distractors but the pool only has {len(non_truth)}")
    chosen = rng.sample(non_truth, n) if n else []
    if truth is not None:
        chosen.append(truth)
    return EntityContext(sorted(chosen))


# -- the sweep ---------------------------------------------------------------------


def load_config(path: str | Path) -> dict:
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        config = json.load(handle)
    base = path.parent

    def resolve(value):
        return str((base / value).resolve())

    for key in ("lexicon", "wordpieces", "grammar", "anti_context_templates",
                "phoneme_features"):
        if config.get(key):
            config[key] = resolve(config[key])
    config["pools"] = {k: resolve(v) for k, v in config["pools"].items()}
    return config


def _load_pool(path: str) -> list[str]:
    lines = [line.strip() for line in
             Path(path).read_text(encoding="utf-8").splitlines()]
    pool = [line for line in lines if line]
    if not pool:
        raise ConfigError(f"empty pool file: {path}")
    return pool


@dataclass
class EvalResources:
    lexicon: Lexicon
    wpm: WordpieceModel
    inventory: PhonemeInventory
    grammar: Grammar
    engine: RewriteEngine
    table: AlignmentTable
    pools: dict[str, list[str]]
    carriers: dict[str, str]
    anti_templates: list[str]


def prepare_resources(config: dict) -> EvalResources:
    missing = [k for k in ("lexicon", "wordpieces", "grammar", "pools",
                           "anti_context_templates") if not config.get(k)]
    if missing:
        raise ConfigError(f"eval config lacks required keys: {missing}")
    for key in ("lexicon", "wordpieces", "grammar", "anti_context_templates"):
        if not Path(config[key]).exists():
            raise ConfigError(f"missing resource file: {config[key]}")
    lexicon = Lexicon.load(config["lexicon"])
    wpm = WordpieceModel.load(config["wordpieces"])
    inventory = PhonemeInventory.load(config.get("phoneme_features"))
    grammar = Grammar.from_json(config["grammar"])

    align_cfg = config.get("alignment", {})
    pairs = make_training_pairs(lexicon, wpm)
    params = train_ibm2(pairs, iterations=int(align_cfg.get("iterations", 8)))
    table = extract_alignments(params, pairs,
                               top_k=int(align_cfg.get("top_k", 2000)))

    engine_cfg = EngineConfig(
        **{k: v for k, v in config.get("engine", {}).items()})
    engine = RewriteEngine(grammar, lexicon, wpm, table, inventory, engine_cfg)

    pools = {k: _load_pool(v) for k, v in config["pools"].items()}
    carriers = dict(config.get(
        "carriers", {"contact": "call", "app": "open", "song": "play"}))
    if set(carriers) != set(pools):
        raise ConfigError("pools and carriers must cover the same entity kinds")
    anti_templates = [
        line.strip() for line in
        Path(config["anti_context_templates"]).read_text(encoding="utf-8").splitlines()
        if line.strip()]
    return EvalResources(lexicon, wpm, inventory, grammar, engine, table,
                         pools, carriers, anti_templates)


def run_eval(config: dict, outdir: Optional[str | Path] = None,
             render_figures: bool = True) -> dict:
    """The full method x distractor-count grid; returns the report document.

    With ``outdir`` set, writes report.json, report.csv and (by default)
    the SER figures next to them.
    """
    res = prepare_resources(config)
    engine = res.engine
    seed = int(config.get("seed", 7))
    noise = NoiseSpec.from_dict(config.get("noise", {}))
    counts = TestCounts(**{k: v for k, v in config.get("counts", {}).items()
                           if not k.startswith("_")})
    distractor_counts = list(config.get("distractors", [0, 30, 300]))
    methods = list(config.get("methods", METHOD_NAMES))
    unknown = set(methods) - set(METHOD_NAMES)
    if unknown:
        raise ConfigError(f"unknown methods: {sorted(unknown)}")
    n_random = int(config.get("random_paths", 1000))

    carrier_pieces = sorted({
        piece for word in res.carriers.values()
        for piece in res.wpm.segment(word)})
    confusion = build_confusion_model(res.wpm, res.table, res.inventory,
                                      noise, seed, protected=carrier_pieces)
    utterances = gen_testset(res.pools, res.carriers, res.anti_templates,
                             confusion, counts, seed, res.wpm, engine.wp_syms)
    all_entities = sorted({e for pool in res.pools.values() for e in pool})

    # context-independent per-utterance work, shared across the grid
    prepared_wp = {}
    baseline_paths: dict[tuple[int, str], tuple[list, list]] = {}
    prepared_baseline: dict[tuple[int, str], object] = {}
    needs_baselines = [m for m in methods if m.startswith(("nbest", "random"))]
    for utt in utterances:
        prepared_wp[utt.uid] = engine.prepare_wordpiece(utt.lattice)
        if not needs_baselines:
            continue
        lattice_fst = engine.lattice_fst(utt.lattice)
        nbest = shortest_paths(lattice_fst, 1000)
        sym = engine.wp_syms.symbol_of
        nbest_syms = [([sym(l) for l in labels], cost) for labels, cost in nbest]
        for method in needs_baselines:
            if method == "nbest-1":
                chosen = nbest_syms[:1]
            elif method == "nbest-1000":
                chosen = nbest_syms
            else:
                sampled = sample_random_paths(
                    utt.lattice, n_random,
                    seed=random.Random(f"{seed}:random:{utt.uid}").randrange(2**31))
                chosen = [(p, utt.lattice.path_cost(p)) for p in sampled]
            paths = [p for p, _ in chosen]
            costs = [c for _, c in chosen]
            baseline_paths[(utt.uid, method)] = (paths, costs)
            prepared_baseline[(utt.uid, method)] = engine.prepare_word_baseline(
                utt.lattice, paths, costs)

    wp_specs = [spec for spec in (
        ("wp", TROPICAL, False),
        ("wp+logdet", LOG, False),
        ("wp+logdet+compsc", LOG, True),
    ) if spec[0] in methods]
    results: dict[tuple[str, int], list[RewriteDecision]] = {}
    for n_distractors in distractor_counts:
        for utt in utterances:
            context = sample_distractors(
                all_entities, n_distractors,
                seed=f"{seed}:distractors:{utt.uid}:{n_distractors}",
                truth=utt.truth)
            engine.set_context(context if context.entities else None)
            if wp_specs:
                decisions = engine.rewrite_wordpiece_multi(
                    utt.lattice, wp_specs, prepared=prepared_wp[utt.uid])
                for name, decision in decisions.items():
                    results.setdefault((name, n_distractors), []).append(decision)
            for method in needs_baselines:
                paths, costs = baseline_paths[(utt.uid, method)]
                decision = engine.rewrite_word_baseline(
                    utt.lattice, paths, costs,
                    prepared=prepared_baseline[(utt.uid, method)])
                results.setdefault((method, n_distractors), []).append(decision)

    report = _assemble_report(config, utterances, methods, distractor_counts,
                              results)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_report_files(report, outdir)
        if render_figures:
            from .figures import render_ser_figures
            render_ser_figures(report, outdir)
    return report


def _ser_for(utterances, decisions, kind) -> float:
    refs = [u.reference for u in utterances if u.kind == kind]
    hyps = [d.transcript for u, d in zip(utterances, decisions)
            if u.kind == kind]
    return compute_ser(refs, hyps)


def _assemble_report(config, utterances, methods, distractor_counts,
                     results) -> dict:
    no_rewrite_hyps = [glue_lenient(u.lattice.one_best()) for u in utterances]
    no_rewrite = {
        "in_context_ser": round(compute_ser(
            [u.reference for u in utterances if u.kind == "in"],
            [h for u, h in zip(utterances, no_rewrite_hyps) if u.kind == "in"]), 6),
        "anti_context_ser": round(compute_ser(
            [u.reference for u in utterances if u.kind == "anti"],
            [h for u, h in zip(utterances, no_rewrite_hyps) if u.kind == "anti"]), 6),
    }
    grid = []
    for method in methods:
        for n in distractor_counts:
            decisions = results[(method, n)]
            in_ser = _ser_for(utterances, decisions, "in")
            anti_ser = _ser_for(utterances, decisions, "anti")
            grid.append({
                "method": method,
                "distractors": n,
                "in_context_ser": round(in_ser, 6),
                "anti_context_ser": round(anti_ser, 6),
                "in_context_relative_reduction": round(
                    relative_reduction(no_rewrite["in_context_ser"], in_ser), 6),
            })
    records = []
    for i, utt in enumerate(utterances):
        row = {
            "uid": utt.uid,
            "kind": utt.kind,
            "reference": utt.reference,
            "truth": utt.truth,
            "onebest": glue_lenient(utt.lattice.one_best()),
            "results": {},
        }
        for method in methods:
            for n in distractor_counts:
                decision = results[(method, n)][i]
                row["results"][f"{method}@{n}"] = decision.to_record()
        records.append(row)
    win_loss = _win_loss(utterances, methods, distractor_counts, results,
                         no_rewrite_hyps)
    return {
        "config": {k: v for k, v in sorted(config.items())},
        "no_rewrite": no_rewrite,
        "grid": grid,
        "win_loss": win_loss,
        "utterances": records,
    }


_WIN_LOSS_PAIRS = [
    ("nbest-1", None),
    ("nbest-1000", "nbest-1"),
    ("wp", "nbest-1000"),
    ("wp+logdet", "wp"),
    ("wp+logdet+compsc", "wp+logdet"),
]


def _win_loss(utterances, methods, distractor_counts, results,
              no_rewrite_hyps, cap: int = 5) -> list[dict]:
    """Per-utterance wins and losses between adjacent methods, Table-2 style."""
    if not distractor_counts:
        return []
    n = max(distractor_counts)
    out = []
    for expt, base in _WIN_LOSS_PAIRS:
        if expt not in methods or (base is not None and base not in methods):
            continue
        expt_hyps = [d.transcript for d in results[(expt, n)]]
        base_hyps = (no_rewrite_hyps if base is None
                     else [d.transcript for d in results[(base, n)]])
        wins, losses = [], []
        for utt, eh, bh in zip(utterances, expt_hyps, base_hyps):
            ref = normalize_transcript(utt.reference)
            e_ok = normalize_transcript(eh) == ref
            b_ok = normalize_transcript(bh) == ref
            if e_ok and not b_ok and len(wins) < cap:
                wins.append({"reference": utt.reference, "expt": eh, "base": bh})
            elif b_ok and not e_ok and len(losses) < cap:
                losses.append({"reference": utt.reference, "expt": eh, "base": bh})
        out.append({"expt": expt, "base": base or "no-rewrite",
                    "distractors": n, "wins": wins, "losses": losses})
    return out


def write_report_files(report: dict, outdir: Path) -> None:
    (outdir / "report.json").write_text(
        json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    lines = ["method,distractors,in_context_ser,anti_context_ser"]
    for row in report["grid"]:
        lines.append(f"{row['method']},{row['distractors']},"
                     f"{row['in_context_ser']:.6f},{row['anti_context_ser']:.6f}")
    (outdir / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
