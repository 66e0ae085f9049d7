import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from fstspell.cli import cli
from fstspell.enginestore import load_engine
from fstspell.fst import SymbolTable, chain
from fstspell.lattice import build_sausage
from fstspell.semiring import LOG
from fstspell.textio import write_fst, write_symbols

DATA = Path(__file__).resolve().parent.parent / "src" / "fstspell" / "data"


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def engine_dir(tmp_path_factory, runner):
    base = tmp_path_factory.mktemp("cli")
    table = base / "alignments.tsv"
    result = runner.invoke(cli, [
        "train-align", "--lexicon", str(DATA / "lexicon.tsv"),
        "--wordpieces", str(DATA / "wordpieces.txt"),
        "-o", str(table), "--iterations", "6", "--top-k", "2000"])
    assert result.exit_code == 0, result.output
    assert "coverage" in result.output

    context = base / "entities.txt"
    context.write_text("Kazi Uddin\nBeth Byer\nGolden River\n", encoding="utf-8")
    outdir = base / "engine"
    result = runner.invoke(cli, [
        "build-engine", "--grammar", str(DATA / "grammar.json"),
        "--lexicon", str(DATA / "lexicon.tsv"),
        "--wordpieces", str(DATA / "wordpieces.txt"),
        "--alignments", str(table), "--context", str(context),
        "-o", str(outdir)])
    assert result.exit_code == 0, result.output
    return outdir


def test_engine_dir_contents(engine_dir):
    names = {p.name for p in engine_dir.iterdir()}
    assert {"manifest.json", "wordpiece.syms", "word.syms", "phoneme.syms",
            "tagger_wp.fst", "w_fst.fst", "g2p_fst.fst", "edit_fst.fst",
            "s_prime.fst", "alignments.tsv", "entities.txt"} <= names


def test_loaded_engine_matches_built(engine_dir):
    engine = load_engine(engine_dir)
    pieces = engine.wpm.segment_words(["call", "kazi", "uddin"])
    lat = build_sausage([[(p, 0.1)] for p in pieces], engine.wp_syms)
    decision = engine.rewrite_wordpiece(lat, LOG)
    assert decision.verdict == "rewrite"
    assert decision.entity == "Kazi Uddin"
    assert decision.transcript == "call kazi uddin"


def test_rewrite_command_slots_json(engine_dir, runner, tmp_path):
    engine = load_engine(engine_dir)
    pieces = engine.wpm.segment_words(["call", "beth", "byer"])
    doc = {"slots": [[[p, 0.1]] for p in pieces]}
    lattice_file = tmp_path / "lattice.json"
    lattice_file.write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")
    result = runner.invoke(cli, [
        "rewrite", "--engine", str(engine_dir), str(lattice_file),
        "--method", "wp+logdet"])
    assert result.exit_code == 0, result.output
    record = json.loads(result.output)
    assert record["verdict"] == "rewrite"
    assert record["entity"] == "Beth Byer"


def test_rewrite_command_att_lattice(engine_dir, runner, tmp_path):
    engine = load_engine(engine_dir)
    pieces = engine.wpm.segment_words(["call", "beth", "byer"])
    lat = build_sausage([[(p, 0.25)] for p in pieces], engine.wp_syms)
    lattice_file = tmp_path / "lattice.fst"
    write_fst(lat.fst, lattice_file)
    result = runner.invoke(cli, [
        "rewrite", "--engine", str(engine_dir), str(lattice_file),
        "--method", "wp", "-o", str(tmp_path / "decision.json")])
    assert result.exit_code == 0, result.output
    record = json.loads((tmp_path / "decision.json").read_text(encoding="utf-8"))
    assert record["entity"] == "Beth Byer"


def test_eval_command_mini(runner, tmp_path):
    config = json.loads((DATA / "desk_eval.json").read_text(encoding="utf-8"))
    config["counts"] = {"in_context": 2, "anti_context": 1}
    config["distractors"] = [0]
    config["methods"] = ["wp"]
    for key in ("lexicon", "wordpieces", "grammar", "anti_context_templates"):
        config[key] = str(DATA / config[key])
    config["pools"] = {k: str(DATA / v) for k, v in config["pools"].items()}
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps(config), encoding="utf-8")
    outdir = tmp_path / "out"
    result = runner.invoke(cli, [
        "eval", "--config", str(config_file), "-o", str(outdir), "--no-figures"])
    assert result.exit_code == 0, result.output
    assert (outdir / "report.json").exists()
    assert "wp" in result.output


def test_fst_subcommands(runner, tmp_path):
    syms = SymbolTable(["a", "b", "x"])
    write_symbols(syms, tmp_path / "t.syms")
    acc = build_sausage([[("a", 1.0), ("b", 2.0)], [("x", 0.0)]], syms)
    write_fst(acc.fst, tmp_path / "acc.fst")

    result = runner.invoke(cli, ["fst", "count", str(tmp_path / "acc.fst"),
                                 "--syms", str(tmp_path / "t.syms")])
    assert result.exit_code == 0 and result.output.strip() == "2"

    result = runner.invoke(cli, ["fst", "nbest", str(tmp_path / "acc.fst"),
                                 "--syms", str(tmp_path / "t.syms"), "-n", "2"])
    assert result.exit_code == 0
    assert result.output.splitlines()[0].endswith("a x")

    result = runner.invoke(cli, [
        "fst", "determinize", str(tmp_path / "acc.fst"),
        "--syms", str(tmp_path / "t.syms"), "--semiring", "log",
        "-o", str(tmp_path / "det.fst")])
    assert result.exit_code == 0
    assert (tmp_path / "det.fst").exists()

    trans = chain([syms.id_of("a")], syms)
    write_fst(trans, tmp_path / "a.fst")
    result = runner.invoke(cli, [
        "fst", "compose", str(tmp_path / "a.fst"), str(tmp_path / "a.fst"),
        "--isyms", str(tmp_path / "t.syms"), "-o", str(tmp_path / "c.fst")])
    assert result.exit_code == 0

    result = runner.invoke(cli, [
        "fst", "project", str(tmp_path / "c.fst"),
        "--isyms", str(tmp_path / "t.syms"), "-o", str(tmp_path / "p.fst")])
    assert result.exit_code == 0


def test_cli_exit_codes(tmp_path):
    import subprocess
    import sys

    missing = tmp_path / "missing.json"
    proc = subprocess.run(
        [sys.executable, "-m", "fstspell.cli", "eval", "--config",
         str(missing), "-o", str(tmp_path / "o")],
        capture_output=True, text=True)
    assert proc.returncode == 2

    bad_lex = tmp_path / "bad.tsv"
    bad_lex.write_text("oops\n", encoding="utf-8")
    proc = subprocess.run(
        [sys.executable, "-m", "fstspell.cli", "train-align",
         "--lexicon", str(bad_lex),
         "--wordpieces", str(DATA / "wordpieces.txt"),
         "-o", str(tmp_path / "t.tsv")],
        capture_output=True, text=True)
    assert proc.returncode == 1
