import math
from pathlib import Path

import pytest

from fstspell.errors import ConfigError, DataError
from fstspell.evalharness import (
    NoiseSpec,
    TestCounts,
    build_confusion_model,
    compute_ser,
    gen_testset,
    load_config,
    normalize_transcript,
    prepare_resources,
    relative_reduction,
    run_eval,
    sample_distractors,
)
DATA = Path(__file__).resolve().parent.parent / "src" / "fstspell" / "data"


def mini_config(tmp_path, **overrides):
    config = load_config(DATA / "desk_eval.json")
    config["counts"] = {"in_context": 4, "anti_context": 2}
    config["distractors"] = [0, 5]
    config["methods"] = ["nbest-1", "wp", "wp+logdet", "wp+logdet+compsc"]
    config.update(overrides)
    return config


# -- SER -----------------------------------------------------------------------


def test_compute_ser_identical():
    assert compute_ser(["call beth"], ["call beth"]) == 0.0


def test_compute_ser_mismatch_fraction():
    refs = ["a", "b", "c", "d"]
    hyps = ["a", "x", "c", "d"]
    assert compute_ser(refs, hyps) == 0.25


def test_compute_ser_normalizes():
    assert compute_ser(["Call  Beth!"], ["call beth"]) == 0.0
    assert normalize_transcript(" Play, Something. ") == "play something"


def test_compute_ser_length_mismatch():
    with pytest.raises(DataError):
        compute_ser(["a"], ["a", "b"])


def test_compute_ser_symmetric_under_permutation():
    refs = ["a", "b", "c"]
    hyps = ["a", "x", "c"]
    perm = [2, 0, 1]
    assert compute_ser(refs, hyps) == compute_ser([refs[i] for i in perm],
                                                  [hyps[i] for i in perm])


def test_relative_reduction_formatting():
    assert relative_reduction(0.40, 0.34) == pytest.approx(0.15)
    assert relative_reduction(0.0, 0.0) == 0.0


# -- distractors ------------------------------------------------------------------


def test_sample_distractors_in_context_zero():
    ctx = sample_distractors(["A", "B", "C"], 0, "s", truth="B")
    assert ctx.entities == ["B"]


def test_sample_distractors_anti_context_zero():
    ctx = sample_distractors(["A", "B"], 0, "s", truth=None)
    assert ctx.entities == []


def test_sample_distractors_distinct_and_deterministic():
    pool = [f"E{i}" for i in range(50)]
    a = sample_distractors(pool, 10, "seed1", truth="E7")
    b = sample_distractors(pool, 10, "seed1", truth="E7")
    assert a.entities == b.entities
    assert len(set(a.entities)) == 11
    assert "E7" in a.entities


def test_sample_distractors_pool_exhausted():
    with pytest.raises(ConfigError):
        sample_distractors(["A", "B"], 5, "s", truth="A")


# -- confusion model -----------------------------------------------------------


@pytest.fixture(scope="module")
def confusion_setup():
    config = load_config(DATA / "desk_eval.json")
    res = prepare_resources(config)
    noise = NoiseSpec.from_dict(config["noise"])
    model = build_confusion_model(res.wpm, res.table, res.inventory, noise,
                                  seed=7, protected=["▁call"])
    return res, noise, model


def test_confusion_covers_whole_vocabulary(confusion_setup):
    res, _, model = confusion_setup
    assert set(model.alternatives) == set(res.wpm.vocab)


def test_confusion_protected_pieces_never_demoted(confusion_setup):
    res, _, model = confusion_setup
    best = max(model.alternatives["▁call"], key=lambda kv: -kv[1])
    top = min(model.alternatives["▁call"], key=lambda kv: kv[1])
    assert top[0] == "▁call"


def test_confusion_mass_bounded(confusion_setup):
    _, _, model = confusion_setup
    for piece, alts in model.alternatives.items():
        assert sum(math.exp(-c) for _, c in alts) <= 1.0 + 1e-6, piece


def test_confusion_deterministic(confusion_setup):
    res, noise, model = confusion_setup
    again = build_confusion_model(res.wpm, res.table, res.inventory, noise,
                                  seed=7, protected=["▁call"])
    assert again.alternatives == model.alternatives


# -- test set ----------------------------------------------------------------------


def test_gen_testset_counts_and_determinism(confusion_setup):
    res, _, model = confusion_setup
    counts = TestCounts(in_context=5, anti_context=3)
    a = gen_testset(res.pools, res.carriers, res.anti_templates, model, counts,
                    seed=3, wpm=res.wpm)
    b = gen_testset(res.pools, res.carriers, res.anti_templates, model, counts,
                    seed=3, wpm=res.wpm)
    assert len(a) == 8
    assert [u.reference for u in a] == [u.reference for u in b]
    assert all(u.truth is not None for u in a if u.kind == "in")
    assert all(u.truth is None for u in a if u.kind == "anti")
    for u in a:
        if u.kind == "in":
            assert u.reference.split()[0] in res.carriers.values()


def test_gen_testset_zero_noise_keeps_reference(confusion_setup):
    res, _, _ = confusion_setup
    from fstspell.lattice import ConfusionModel, glue_wordpieces

    identity = ConfusionModel.identity(sorted(res.wpm.vocab))
    utts = gen_testset(res.pools, res.carriers, res.anti_templates, identity,
                       TestCounts(4, 2), seed=1, wpm=res.wpm)
    for u in utts:
        assert glue_wordpieces(u.lattice.one_best()) == u.reference


# -- run_eval ------------------------------------------------------------------------


def test_run_eval_mini_grid(tmp_path):
    config = mini_config(tmp_path)
    report = run_eval(config, outdir=tmp_path / "out", render_figures=True)
    methods = {row["method"] for row in report["grid"]}
    assert methods == {"nbest-1", "wp", "wp+logdet", "wp+logdet+compsc"}
    assert len(report["grid"]) == len(methods) * 2
    for row in report["grid"]:
        assert 0.0 <= row["in_context_ser"] <= 1.0
        assert 0.0 <= row["anti_context_ser"] <= 1.0
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "report.csv").exists()
    assert (tmp_path / "out" / "fig_in_context.png").exists()
    assert (tmp_path / "out" / "fig_anti_context.png").exists()
    csv = (tmp_path / "out" / "report.csv").read_text(encoding="utf-8")
    assert csv.splitlines()[0] == "method,distractors,in_context_ser,anti_context_ser"


def test_run_eval_reports_are_byte_identical(tmp_path):
    config = mini_config(tmp_path)
    config["counts"] = {"in_context": 3, "anti_context": 1}
    config["methods"] = ["wp", "wp+logdet"]
    run_eval(config, outdir=tmp_path / "a", render_figures=False)
    run_eval(config, outdir=tmp_path / "b", render_figures=False)
    assert ((tmp_path / "a" / "report.json").read_bytes()
            == (tmp_path / "b" / "report.json").read_bytes())
    assert ((tmp_path / "a" / "report.csv").read_bytes()
            == (tmp_path / "b" / "report.csv").read_bytes())


def test_run_eval_rejects_unknown_method(tmp_path):
    config = mini_config(tmp_path)
    config["methods"] = ["wp", "mystery"]
    with pytest.raises(ConfigError):
        run_eval(config)


def test_run_eval_missing_resource(tmp_path):
    config = mini_config(tmp_path)
    config["lexicon"] = str(tmp_path / "nope.tsv")
    with pytest.raises(ConfigError) as err:
        run_eval(config)
    assert "nope.tsv" in str(err.value)


def test_anti_context_never_better_than_no_rewrite(tmp_path):
    config = mini_config(tmp_path)
    report = run_eval(config, outdir=None, render_figures=False)
    base = report["no_rewrite"]["anti_context_ser"]
    for row in report["grid"]:
        assert row["anti_context_ser"] >= base - 1e-9
