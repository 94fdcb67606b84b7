from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from core.features import FeatureKind
from core.linear import SpeakerRole
from core.trf_analysis import crossval_trf
from database.models import LABELS
from handlers.evaluation import chance_level
from handlers.experiment import TRF_TESTS, run_experiment, summarize
from handlers.synth import SynthConfig, gen_dataset
from utils.config import config_from_dict
from utils.errors import ConfigError
from views import report, results as views


def _config(tmp_path, **overrides):
    raw = {"dataset": str(tmp_path / "unused"), "output": str(tmp_path / "out"), "seed": 4,
           "algorithms": ["linear", "cca"], "features": ["envelope"], "segment_lengths": [1, 5],
           "inner_folds": 3, "n_shifts": 4, "n_perm": 50}
    raw.update(overrides)
    return config_from_dict(raw, tmp_path)


@pytest.fixture(scope="module")
def experiment(small_dataset, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("experiment")
    config = _config(tmp, trf=True)
    return config, run_experiment(config, participants=small_dataset[0], n_jobs=1)


def test_output_files(experiment):
    config, rep = experiment
    assert rep.output == config.output
    assert {"results", "markers", "correlations", "trf", "clusters", "summary"} <= set(rep.files)
    assert "training" not in rep.files
    for path in rep.files.values():
        assert path.exists()


def test_results_table(experiment):
    _, rep = experiment
    results = views.read_csv(rep.files["results"])
    assert list(results.columns) == views.RESULT_COLUMNS
    assert set(results["algorithm"]) == {"linear", "cca"}
    assert set(results["participant"]) == {"P01", "P02", "P03"}
    # 30 s por ensaio, passo de 1 s
    counts = results.groupby(["participant", "algorithm", "trial", "length"]).size()
    for (_, _, _, length), n in counts.items():
        assert n == {1.0: 30, 5.0: 26}[length]
    assert set(results["decision"]) <= set(LABELS)
    assert (results["correct"] == (results["decision"] == results["truth"])).all()
    linear = results[results["algorithm"] == "linear"]
    assert (linear["correct"] == (linear["score"] > 0)).all()
    np.testing.assert_allclose(linear["score"], linear["rho_attended"] - linear["rho_ignored"], atol=1e-9)
    assert results[results["algorithm"] == "cca"]["rho_attended"].isna().all()


def test_accuracy_is_recomputable_from_segments(experiment):
    _, rep = experiment
    results = views.read_csv(rep.files["results"])
    table = views.accuracy_table(results)
    for row in rep.summary["per_participant"]:
        group = results[(results["participant"] == row["participant"]) & (results["algorithm"] == row["algorithm"])
                        & (results["length"] == row["length"])]
        assert row["accuracy"] == pytest.approx(group["correct"].mean())
    assert len(table) == 3 * 2 * 2


def test_summary_contents(experiment):
    config, rep = experiment
    summary = views.read_json(rep.files["summary"])
    assert summary["config"]["seed"] == config.seed
    assert summary["config"]["participants"] == ["P01", "P02", "P03"]
    accuracy = {(r["algorithm"], r["length"]): r for r in summary["accuracy"]}
    assert set(accuracy) == {("linear", 1.0), ("linear", 5.0), ("cca", 1.0), ("cca", 5.0)}
    assert accuracy[("linear", 5.0)]["accuracy"] > 0.6
    assert accuracy[("linear", 5.0)]["chance"] == pytest.approx(chance_level(26 * 4))
    assert set(summary["markers"]) == {"envelope"}
    assert len(summary["markers"]["envelope"]["participants"]) == 3
    assert {row["length"] for row in summary["comparisons"]} == {5.0}
    for name, rows in summary["selections"].items():
        assert sum(r["algorithm"] == "linear" for r in rows) == 4
        assert sum(r["algorithm"] == "cca" for r in rows) == 4


def test_marker_rows(experiment):
    _, rep = experiment
    markers = views.read_csv(rep.files["markers"])
    real = markers[~markers["null"]]
    # 6 segmentos de 5 s sem sobreposição por ensaio
    assert len(real) == 3 * 4 * 6
    assert (real["length"] == 5.0).all()
    np.testing.assert_allclose(real["delta"], real["rho_attended"] - real["rho_ignored"], atol=1e-9)


def test_correlation_rows(experiment):
    _, rep = experiment
    correlations = views.read_csv(rep.files["correlations"])
    real = correlations[~correlations["null"]]
    assert set(real["role"]) == {"attended", "ignored"}
    assert set(real["stream"]) == {"attended", "ignored"}
    assert len(real) == 3 * 2 * 2 * 4


def test_trf_outputs(experiment, small_dataset):
    _, rep = experiment
    curves = views.read_csv(rep.files["trf"])
    labels = set(curves["label"])
    for role in ("attended", "ignored", "difference"):
        assert f"envelope/{role}" in labels and f"envelope/{role}/null" in labels
    grand = curves[(curves["label"] == "envelope/attended")]
    # média dos TRFs por participante
    trfs = [crossval_trf(p.trials, FeatureKind.ENVELOPE, SpeakerRole.ATTENDED) for p in small_dataset[0]]
    expected = np.mean([t.coefficients for t in trfs], axis=0)
    got = grand.sort_values(["channel", "latency"])["value"].to_numpy().reshape(expected.shape)
    order = np.argsort(trfs[0].channels)
    np.testing.assert_allclose(got, expected[order], rtol=1e-6, atol=1e-9)

    clusters = views.read_json(rep.files["clusters"])
    assert clusters["bonferroni_m"] == TRF_TESTS
    assert set(clusters["tests"]) == {"envelope/attended", "envelope/ignored", "envelope/difference"}
    assert set(rep.summary["trf_tests"]) == set(clusters["tests"])
    for test in clusters["tests"].values():
        assert 0.0 <= test["p_value"] <= 1.0
        for c in test["clusters"]:
            assert c["retained"] == (c["p_value"] < 0.05 / TRF_TESTS)


def test_render_report(experiment):
    _, rep = experiment
    text = report.render_report(rep.output)
    assert "linear/envelope" in text and "cca/envelope" in text
    assert "Marcadores (envelope)" in text
    assert "Clusters retidos" in text
    for name in (report.REPORT_FILE, report.ACCURACY_FIGURE, report.TRF_FIGURE):
        assert (rep.output / name).exists()


def test_identical_results_across_runs(small_dataset, tmp_path):
    participants = small_dataset[0][:2]
    runs = [run_experiment(_config(tmp_path / name, algorithms=["linear"]), participants=participants, n_jobs=jobs)
            for name, jobs in (("a", 2), ("b", 2), ("c", 1))]
    for key in ("results", "markers", "correlations"):
        assert runs[0].files[key].read_bytes() == runs[1].files[key].read_bytes()
    parallel, serial = (views.read_csv(r.files["results"]) for r in runs[1:])
    assert (parallel["correct"] == serial["correct"]).all()
    np.testing.assert_allclose(parallel["score"], serial["score"], rtol=1e-9, atol=1e-12)


def test_nothing_to_run(tmp_path, small_dataset):
    with pytest.raises(ConfigError):
        run_experiment(_config(tmp_path), participants=small_dataset[0], decode=False)


def test_empty_algorithms_rejected(tmp_path, small_dataset):
    config = _config(tmp_path)
    with pytest.raises(ConfigError):
        run_experiment(replace(config, algorithms=()), participants=small_dataset[0])


def test_summarize_compares_decoders():
    rows = []
    for name, hits in (("P01", 5), ("P02", 4), ("P03", 6)):
        for i in range(10):
            rows.append({"participant": name, "algorithm": "linear", "feature": "envelope", "length": 5.0,
                         "correct": True})
            rows.append({"participant": name, "algorithm": "cca", "feature": "envelope", "length": 5.0,
                         "correct": i < hits})
    summary = summarize(pd.DataFrame(rows), pd.DataFrame(), pd.DataFrame())
    assert {"accuracy", "per_participant", "comparisons"} == set(summary)
    (comparison,) = summary["comparisons"]
    assert comparison["better"] == "linear/envelope" and comparison["worse"] == "cca/envelope"
    assert comparison["mean_better"] == pytest.approx(1.0)
    assert comparison["mean_worse"] == pytest.approx(0.5)
    assert comparison["p"] < 0.01


def test_summarize_empty_frames():
    assert summarize(pd.DataFrame(), pd.DataFrame(), pd.DataFrame()) == {}


@pytest.mark.slow
def test_decoding_trend_and_attention_modulation(tmp_path):
    def accuracy(g_ign, folder):
        synth = SynthConfig(participants=6, trials=8, duration=60.0, g_att=1.0, g_ign=g_ign, snr_db=-5.0, seed=21)
        participants, _ = gen_dataset(synth)
        algorithms = ["linear", "cnn", "cca"] if g_ign < 1.0 else ["linear", "cca"]
        # CNN com orçamento reduzido: poucas épocas e duas dobras internas
        config = _config(folder, algorithms=algorithms, segment_lengths=[1, 30], marker_segment=5.0,
                         cnn={"max_epochs": 5, "patience": 2, "width": 8, "grid": [[3, 1]], "max_windows": 4096,
                              "inner_folds": 2})
        rep = run_experiment(config, participants=participants)
        return {(r["algorithm"], r["length"]): r for r in rep.summary["accuracy"]}, rep.summary

    modulated, summary = accuracy(0.5, tmp_path / "ratio2")
    for algorithm in ("linear", "cnn", "cca"):
        assert modulated[(algorithm, 30.0)]["accuracy"] > modulated[(algorithm, 1.0)]["accuracy"]
        assert modulated[(algorithm, 30.0)]["accuracy"] > modulated[(algorithm, 30.0)]["chance"]
    assert summary["markers"]["envelope"]["n_significant"] >= 4

    balanced, _ = accuracy(1.0, tmp_path / "ratio1")
    for algorithm in ("linear", "cca"):
        assert modulated[(algorithm, 30.0)]["accuracy"] > balanced[(algorithm, 30.0)]["accuracy"] + 0.1


@pytest.mark.slow
def test_markers_significant_for_almost_every_participant(tmp_path):
    participants, _ = gen_dataset(SynthConfig(g_att=1.0, g_ign=0.5, snr_db=-5.0, seed=33))
    config = _config(tmp_path, algorithms=["linear"], segment_lengths=[5], marker_segment=5.0)
    rep = run_experiment(config, participants=participants)
    markers = rep.summary["markers"]["envelope"]
    assert len(markers["participants"]) == 18
    assert markers["bonferroni_alpha"] == pytest.approx(0.05 / 18)
    assert markers["n_significant"] >= 17
