"""Command-line front door.

Subcommands:

* ``train-align``: lexicon + wordpiece vocabulary -> alignment table.
* ``build-engine``: grammar + context + tables -> serialized engine directory.
* ``rewrite``: one lattice file -> decision JSON.
* ``eval``: config JSON -> SER report (JSON + CSV + figures).
* ``fst``: compose / determinize / project / nbest / count on AT&T files.

Exit codes: 0 success, 1 data error, 2 configuration error.
"""

import json
import sys
from importlib import resources as importlib_resources
from pathlib import Path

import click

from . import fst as fst_ops
from .enginestore import load_engine, save_engine
from .errors import ConfigError, DataError, FstSpellError
from .evalharness import load_config, run_eval
from .g2p import (
    AlignmentTable,
    Lexicon,
    WordpieceModel,
    extract_alignments,
    make_training_pairs,
    train_ibm2,
)
from .lattice import slots_from_json
from .phonetics import PhonemeInventory
from .rewrite import EngineConfig, EntityContext, Grammar, RewriteEngine
from .semiring import LOG, TROPICAL
from .textio import read_fst, read_symbols, write_fst


@click.group()
def cli():
    """Contextual spelling correction of CTC wordpiece lattices."""


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    except (DataError, FstSpellError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(1)


def _default_data(name: str) -> str:
    return str(importlib_resources.files("fstspell.data").joinpath(name))


# -- train-align -----------------------------------------------------------------


@cli.command("train-align")
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--wordpieces", "wpm_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--iterations", default=10, show_default=True)
@click.option("--top-k", default=2000, show_default=True)
def train_align(lexicon_path, wpm_path, output, iterations, top_k):
    """Learn wordpiece-to-phoneme alignments from a pronunciation lexicon."""
    lexicon = Lexicon.load(lexicon_path)
    wpm = WordpieceModel.load(wpm_path)
    pairs = make_training_pairs(lexicon, wpm)
    params = train_ibm2(pairs, iterations=iterations)
    table = extract_alignments(params, pairs, top_k=top_k)
    table.save(output)
    coverage = table.coverage(sorted(wpm.vocab))
    click.echo(f"wrote {len(table)} mappings for {len(table.mappings)} wordpieces "
               f"to {output}")
    click.echo(f"vocabulary coverage: {coverage:.1%}")


# -- build-engine ----------------------------------------------------------------


@cli.command("build-engine")
@click.option("--grammar", "grammar_path", required=True, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--wordpieces", "wpm_path", required=True, type=click.Path(exists=True))
@click.option("--alignments", "table_path", required=True, type=click.Path(exists=True))
@click.option("--context", "context_path", required=True, type=click.Path(exists=True))
@click.option("--phoneme-features", "features_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--edit-budget", default=2, show_default=True)
@click.option("--edit-cost", default=3.0, show_default=True)
@click.option("--tau", default=0.8, show_default=True)
@click.option("--lam", default=1.0, show_default=True)
@click.option("--skip-penalty", default=6.0, show_default=True)
@click.option("--margin", default=0.0, show_default=True)
def build_engine(grammar_path, lexicon_path, wpm_path, table_path, context_path,
                 features_path, output, edit_budget, edit_cost, tau, lam,
                 skip_penalty, margin):
    """Compile every rewrite machine and serialize the resource directory."""
    grammar = Grammar.from_json(grammar_path)
    lexicon = Lexicon.load(lexicon_path)
    wpm = WordpieceModel.load(wpm_path)
    table = AlignmentTable.load(table_path)
    inventory = PhonemeInventory.load(features_path)
    config = EngineConfig(edit_budget=edit_budget, edit_cost=edit_cost, tau=tau,
                          lam=lam, skip_penalty=skip_penalty, margin=margin)
    engine = RewriteEngine(grammar, lexicon, wpm, table, inventory, config)
    engine.set_context(EntityContext.load(context_path, grammar.cls))
    save_engine(engine, output)
    click.echo(f"engine resources written to {output}")
    if engine.skipped_entities:
        click.echo(f"excluded {len(engine.skipped_entities)} unmappable entities",
                   err=True)


# -- rewrite ----------------------------------------------------------------------


@cli.command("rewrite")
@click.option("--engine", "engine_dir", required=True, type=click.Path(exists=True))
@click.argument("lattice_file", type=click.Path(exists=True))
@click.option("--method", default="wp+logdet+compsc", show_default=True,
              type=click.Choice(["wp", "wp+logdet", "wp+logdet+compsc"]))
@click.option("--margin", type=float, default=None,
              help="Override the engine's rewrite margin.")
@click.option("-o", "--output", type=click.Path(), default=None,
              help="Write the decision JSON here instead of stdout.")
def rewrite_command(engine_dir, lattice_file, method, margin, output):
    """Rewrite one lattice (slots JSON or AT&T text over the engine symbols)."""
    engine = load_engine(engine_dir)
    if lattice_file.endswith(".json"):
        lattice = slots_from_json(lattice_file, engine.wp_syms)
    else:
        fst = read_fst(lattice_file, engine.wp_syms)
        slots = _slots_from_sausage(fst, engine)
        from .lattice import Lattice
        lattice = Lattice(fst, slots)
    semiring = TROPICAL if method == "wp" else LOG
    decision = engine.rewrite_wordpiece(
        lattice, semiring, use_comparison=method.endswith("compsc"),
        margin=margin)
    text = json.dumps(decision.to_record(), ensure_ascii=False, indent=2,
                      sort_keys=True)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


def _slots_from_sausage(fst, engine):
    slots = []
    for q in range(fst.num_states() - 1):
        arcs = fst.states[q]
        if not arcs or any(a.nextstate != q + 1 for a in arcs):
            raise DataError("lattice file must have sausage topology "
                            "(all slot-i arcs from state i to i+1)")
        slots.append([(engine.wp_syms.symbol_of(a.ilabel), a.weight)
                      for a in arcs])
    return slots


# -- eval -------------------------------------------------------------------------


@cli.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Eval config JSON; defaults to the packaged desk-scale one.")
@click.option("-o", "--output", "outdir", required=True, type=click.Path())
@click.option("--figures/--no-figures", default=True, show_default=True)
def eval_command(config_path, outdir, figures):
    """Run the method-by-distractor-count SER sweep and write the report."""
    if config_path is None:
        config_path = _default_data("desk_eval.json")
    config = load_config(config_path)
    report = run_eval(config, outdir=outdir, render_figures=figures)
    click.echo(f"{'method':22s} {'n':>5s} {'in-SER':>8s} {'anti-SER':>9s}")
    for row in report["grid"]:
        click.echo(f"{row['method']:22s} {row['distractors']:5d} "
                   f"{row['in_context_ser']:8.4f} {row['anti_context_ser']:9.4f}")
    click.echo(f"report written to {outdir}")


# -- fst utilities -----------------------------------------------------------------


@cli.group("fst")
def fst_group():
    """Debugging utilities over AT&T text FSTs."""


def _load(path, isyms_path, osyms_path):
    isyms = read_symbols(isyms_path)
    osyms = read_symbols(osyms_path) if osyms_path else isyms
    return read_fst(path, isyms, osyms), isyms, osyms


@fst_group.command("compose")
@click.argument("left", type=click.Path(exists=True))
@click.argument("right", type=click.Path(exists=True))
@click.option("--isyms", required=True, type=click.Path(exists=True),
              help="Input symbols of the left FST.")
@click.option("--msyms", type=click.Path(exists=True), default=None,
              help="Shared middle symbols (left output = right input); "
                   "defaults to --isyms.")
@click.option("--osyms", type=click.Path(exists=True), default=None,
              help="Output symbols of the right FST; defaults to --msyms.")
@click.option("--mode", default="exact", show_default=True,
              type=click.Choice(["exact", "sigma_right", "rho_left"]))
@click.option("-o", "--output", required=True, type=click.Path())
def fst_compose(left, right, isyms, msyms, osyms, mode, output):
    isym_table = read_symbols(isyms)
    msym_table = read_symbols(msyms) if msyms else isym_table
    osym_table = read_symbols(osyms) if osyms else msym_table
    a = read_fst(left, isym_table, msym_table)
    b = read_fst(right, msym_table, osym_table)
    write_fst(fst_ops.compose(a, b, mode), output)


@fst_group.command("determinize")
@click.argument("fst_file", type=click.Path(exists=True))
@click.option("--syms", required=True, type=click.Path(exists=True))
@click.option("--semiring", default="tropical", show_default=True,
              type=click.Choice(["tropical", "log"]))
@click.option("-o", "--output", required=True, type=click.Path())
def fst_determinize(fst_file, syms, semiring, output):
    f, _, _ = _load(fst_file, syms, None)
    sr = TROPICAL if semiring == "tropical" else LOG
    write_fst(fst_ops.determinize(f, sr), output)


@fst_group.command("project")
@click.argument("fst_file", type=click.Path(exists=True))
@click.option("--isyms", required=True, type=click.Path(exists=True))
@click.option("--osyms", type=click.Path(exists=True), default=None)
@click.option("-o", "--output", required=True, type=click.Path())
def fst_project(fst_file, isyms, osyms, output):
    f, _, _ = _load(fst_file, isyms, osyms)
    write_fst(fst_ops.project_output(f), output)


@fst_group.command("nbest")
@click.argument("fst_file", type=click.Path(exists=True))
@click.option("--syms", required=True, type=click.Path(exists=True))
@click.option("-n", default=10, show_default=True)
def fst_nbest(fst_file, syms, n):
    f, isyms, _ = _load(fst_file, syms, None)
    for labels, cost in fst_ops.shortest_paths(f, n):
        text = " ".join(isyms.symbol_of(l) for l in labels)
        click.echo(f"{cost:.6f}\t{text}")


@fst_group.command("count")
@click.argument("fst_file", type=click.Path(exists=True))
@click.option("--syms", required=True, type=click.Path(exists=True))
def fst_count(fst_file, syms):
    f, _, _ = _load(fst_file, syms, None)
    click.echo(str(fst_ops.path_count(f)))


if __name__ == "__main__":
    main()
