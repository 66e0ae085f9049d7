"""Serialize a compiled rewrite engine to a resource directory and back.

Every machine is stored in the AT&T text format next to its symbol tables,
so a built engine can be inspected with standard text tools and reloaded
without recompiling.
"""

import json
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigError
from .g2p import AlignmentTable, Lexicon, WordpieceModel
from .rewrite import EngineConfig, EntityContext, Grammar, RewriteEngine
from .textio import read_fst, read_symbols, write_fst, write_symbols

MANIFEST = "manifest.json"

_FST_FILES = {
    "tagger_wp": ("wordpiece", "wordpiece"),
    "tagger_word": ("word", "word"),
    "w_fst": ("wordpiece", "phoneme"),
    "g2p_fst": ("word", "phoneme"),
    "edit_fst": ("phoneme", "phoneme"),
    "expander": ("phoneme", "phoneme"),
    "s_prime": ("phoneme", "word"),
}


def save_engine(engine: RewriteEngine, outdir: str | Path) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_symbols(engine.wp_syms, outdir / "wordpiece.syms")
    write_symbols(engine.word_syms, outdir / "word.syms")
    write_symbols(engine.ph_syms, outdir / "phoneme.syms")
    for name in _FST_FILES:
        fst = getattr(engine, name, None)
        if fst is not None:
            write_fst(fst, outdir / f"{name}.fst")
    engine.alignment_table.save(outdir / "alignments.tsv")
    engine.wpm.save(outdir / "wordpieces.txt")
    _write_lexicon(engine.lexicon, outdir / "lexicon.tsv")
    entities = engine.context.entities if engine.context else []
    (outdir / "entities.txt").write_text(
        "".join(e + "\n" for e in entities), encoding="utf-8")
    manifest = {
        "grammar": {"class": engine.grammar.cls,
                    "patterns": engine.grammar.patterns},
        "engine_config": asdict(engine.config),
        "skipped_entities": engine.skipped_entities,
        "files": {name: f"{name}.fst" for name in _FST_FILES
                  if getattr(engine, name, None) is not None},
    }
    (outdir / MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return outdir


def _write_lexicon(lexicon: Lexicon, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for word in lexicon.words():
            entry = lexicon.entries[word]
            for pron in entry.pronunciations:
                handle.write(f"{word}\t{' '.join(pron)}\t{entry.frequency}\n")


def load_engine(indir: str | Path) -> RewriteEngine:
    """Reconstruct a serialized engine without recompiling its machines."""
    indir = Path(indir)
    manifest_path = indir / MANIFEST
    if not manifest_path.exists():
        raise ConfigError(f"missing engine manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    wp_syms = read_symbols(indir / "wordpiece.syms")
    word_syms = read_symbols(indir / "word.syms")
    ph_syms = read_symbols(indir / "phoneme.syms")
    tables = {"wordpiece": wp_syms, "word": word_syms, "phoneme": ph_syms}

    engine = object.__new__(RewriteEngine)
    engine.grammar = Grammar(manifest["grammar"]["class"],
                             [list(p) for p in manifest["grammar"]["patterns"]])
    engine.config = EngineConfig(**manifest["engine_config"])
    engine.lexicon = Lexicon.load(indir / "lexicon.tsv")
    engine.wpm = WordpieceModel.load(indir / "wordpieces.txt")
    engine.alignment_table = AlignmentTable.load(indir / "alignments.tsv")
    engine.inventory = None  # only needed at compile time
    engine.wp_syms = wp_syms
    engine.word_syms = word_syms
    engine.ph_syms = ph_syms
    for name, (isym, osym) in _FST_FILES.items():
        path = indir / f"{name}.fst"
        if path.exists():
            setattr(engine, name, read_fst(path, tables[isym], tables[osym]))
        else:
            setattr(engine, name, None)
    engine.open_wp = wp_syms.id_of(engine.grammar.open_tag)
    engine.close_wp = wp_syms.id_of(engine.grammar.close_tag)
    engine.open_word = word_syms.id_of(engine.grammar.open_tag)
    engine.close_word = word_syms.id_of(engine.grammar.close_tag)
    entities = [line.strip() for line in
                (indir / "entities.txt").read_text(encoding="utf-8").splitlines()
                if line.strip()]
    if entities:
        engine.context = EntityContext(entities, engine.grammar.cls)
        engine.canonical = engine.context.canonical_by_normalized()
    else:
        engine.context = None
        engine.canonical = {}
        engine.s_prime = None
    engine.skipped_entities = list(manifest.get("skipped_entities", []))
    return engine
