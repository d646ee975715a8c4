import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comfeat import neuralnet, pipeline, synthetic
from comfeat.pipeline import (
    BadHeader,
    BadRow,
    DuplicateId,
    Empty,
    EvalReport,
    ManifestEntry,
    MissingArtifact,
    NonFinite,
    NoTrainData,
    ScoreOutOfRange,
    TrainConfig,
    evaluate,
    load_manifest,
    severity_band,
    split_dataset,
    train,
)
from comfeat.spectral import FeatureVector, SpectralConfig

HEADER = "id,audio_path,trillsson_path,xvector_path,score\n"


def entry(i, score=5.0):
    return ManifestEntry(id=f"u{i}", audio_path=None, embedding_paths={}, score=score)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    manifest = synthetic.build_synthetic_corpus(d, n_utterances=24, seed=5,
                                                with_audio=True, audio_weight=0.3)
    return d, load_manifest(manifest.read_text())


class TestLoadManifest:
    def test_basic_row(self):
        entries = load_manifest(HEADER + "u1,a.wav,e1.cfem,,12.5\n")
        assert len(entries) == 1
        e = entries[0]
        assert e.id == "u1" and e.audio_path == "a.wav" and e.score == 12.5
        assert e.embedding_paths == {"trillsson": "e1.cfem"}

    def test_empty_cells(self):
        e = load_manifest(HEADER + "u1,,,x.cfem,0\n")[0]
        assert e.audio_path is None
        assert e.embedding_paths == {"xvector": "x.cfem"}

    def test_bytes_accepted(self):
        assert load_manifest((HEADER + "u1,,,,3\n").encode())[0].score == 3.0

    def test_bad_header(self):
        with pytest.raises(BadHeader):
            load_manifest("id,path,score\nu1,a.wav,3\n")

    def test_score_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            load_manifest(HEADER + "u1,a.wav,,,25.0\n")

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            load_manifest(HEADER + "u1,,,,1\nu1,,,,2\n")

    def test_bad_arity(self):
        with pytest.raises(BadRow):
            load_manifest(HEADER + "u1,a.wav,3\n")

    def test_unparseable_score(self):
        with pytest.raises(BadRow):
            load_manifest(HEADER + "u1,,,,abc\n")

    def test_empty_id(self):
        with pytest.raises(BadRow):
            load_manifest(HEADER + ",,,,3\n")


class TestSplitDataset:
    def test_sizes_with_floor_rounding(self):
        train_s, dev, test = split_dataset([entry(i) for i in range(10)], (0.6, 0.2), seed=0)
        assert (len(train_s), len(dev), len(test)) == (6, 2, 2)

    def test_deterministic(self):
        entries = [entry(i) for i in range(30)]
        a = split_dataset(entries, (0.7, 0.15), seed=9)
        b = split_dataset(entries, (0.7, 0.15), seed=9)
        assert [[e.id for e in part] for part in a] == [[e.id for e in part] for part in b]

    def test_empty_rejected(self):
        with pytest.raises(Empty):
            split_dataset([], (0.6, 0.2), seed=0)

    @given(st.integers(min_value=1, max_value=60), st.integers(min_value=0, max_value=2**32 - 1))
    def test_partition_property(self, n, seed):
        entries = [entry(i) for i in range(n)]
        parts = split_dataset(entries, (0.6, 0.2), seed=seed)
        ids = [e.id for part in parts for e in part]
        assert sorted(ids) == sorted(e.id for e in entries)
        assert len(set(ids)) == len(ids)


class TestAssembleFeatures:
    def test_orders_and_dims(self, corpus):
        base, entries = corpus
        vecs = pipeline.assemble_features(entries[0], ("trillsson", "mfcc"),
                                          SpectralConfig(), base_dir=base)
        assert [v.source for v in vecs] == ["trillsson", "mfcc"]
        assert [v.dim for v in vecs] == [1024, 20]

    def test_missing_embedding_artifact(self, corpus):
        base, entries = corpus
        e = entries[0]
        missing = ManifestEntry(id=e.id, audio_path=e.audio_path,
                                embedding_paths={"xvector": "nope.cfem"}, score=e.score)
        with pytest.raises(MissingArtifact):
            pipeline.assemble_features(missing, ("xvector",), SpectralConfig(), base_dir=base)

    def test_missing_audio_for_spectral(self, corpus):
        base, _ = corpus
        no_audio = ManifestEntry(id="x", audio_path=None, embedding_paths={}, score=1.0)
        with pytest.raises(MissingArtifact):
            pipeline.assemble_features(no_audio, ("lfcc",), SpectralConfig(), base_dir=base)


class TestTrain:
    def test_zero_epochs_returns_init(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=0, seed=3)
        model, log = train(entries, cfg, base_dir=base)
        assert log == []
        reference = neuralnet.init_model(model.config)
        for k in model.params:
            np.testing.assert_array_equal(model.params[k], reference.params[k])

    def test_bit_identical_reruns(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=3, batch_size=8,
                          dropout_p=0.2, seed=17)
        model_a, log_a = train(entries, cfg, base_dir=base)
        model_b, log_b = train(entries, cfg, base_dir=base)
        assert neuralnet.save_weights(model_a) == neuralnet.save_weights(model_b)
        assert log_a == log_b

    def test_log_schema(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=2, seed=1)
        _, log = train(entries, cfg, base_dir=base)
        assert [r["epoch"] for r in log] == [1, 2]
        for record in log:
            assert set(record) == {"epoch", "train_mse", "dev_mae", "dev_rmse"}
            assert record["dev_mae"] <= record["dev_rmse"]

    def test_returns_best_dev_epoch_weights(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=6, seed=2,
                          split_ratios=(0.6, 0.25))
        model, log = train(entries, cfg, base_dir=base)
        _, dev, _ = split_dataset(entries, cfg.split_ratios, cfg.seed)
        report = evaluate(model, dev, ("trillsson",), base_dir=base)
        assert report.rmse == pytest.approx(min(r["dev_rmse"] for r in log))

    def test_no_train_data(self):
        with pytest.raises((NoTrainData, Empty)):
            train([entry(0)], TrainConfig(feature_set=("trillsson",), epochs=1,
                                          split_ratios=(0.4, 0.3)))


class TestEvaluate:
    def test_fixed_metric_example(self):
        preds = np.array([4.0, 6.0])
        targets = np.array([5.0, 8.0])
        mae, rmse = pipeline._metrics(preds, targets)
        assert mae == pytest.approx(1.5)
        assert rmse == pytest.approx(np.sqrt(2.5))

    def test_report_on_real_model(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=1, seed=0)
        model, _ = train(entries, cfg, base_dir=base)
        report = evaluate(model, entries, ("trillsson",), base_dir=base)
        assert report.n == len(entries)
        assert report.mae <= report.rmse
        assert report.feature_set == ("trillsson",)
        assert len(report.model_version) == 12

    def test_duplicated_entries_same_metrics(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=1, seed=0)
        model, _ = train(entries, cfg, base_dir=base)
        once = evaluate(model, entries, ("trillsson",), base_dir=base)
        twice = evaluate(model, entries + entries, ("trillsson",), base_dir=base)
        assert twice.mae == pytest.approx(once.mae)
        assert twice.rmse == pytest.approx(once.rmse)

    def test_empty_rejected(self, corpus):
        base, entries = corpus
        cfg = TrainConfig(feature_set=("trillsson",), epochs=0, seed=0)
        model, _ = train(entries, cfg, base_dir=base)
        with pytest.raises(Empty):
            evaluate(model, [], ("trillsson",), base_dir=base)

    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50)
    def test_mae_never_exceeds_rmse(self, n, seed):
        rng = np.random.default_rng(seed)
        mae, rmse = pipeline._metrics(rng.uniform(0, 24, n), rng.uniform(0, 24, n))
        assert mae <= rmse + 1e-12

    def test_report_invariant_enforced(self):
        with pytest.raises(Empty):
            EvalReport(mae=1.0, rmse=2.0, n=0, feature_set=("mfcc",), model_version="x")


class TestSeverityBand:
    @pytest.mark.parametrize("score,display,band", [
        (12.3, 12.3, "moderate"),
        (-1.2, 0.0, "minimal"),
        (24.0, 24.0, "severe"),
        (0.0, 0.0, "minimal"),
        (4.999, 4.999, "minimal"),
        (5.0, 5.0, "mild"),
        (10.0, 10.0, "moderate"),
        (15.0, 15.0, "moderately-severe"),
        (19.999, 19.999, "moderately-severe"),
        (20.0, 20.0, "severe"),
        (99.0, 24.0, "severe"),
    ])
    def test_band_table(self, score, display, band):
        got_display, got_band = severity_band(score)
        assert got_display == pytest.approx(display)
        assert got_band == band

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(NonFinite):
            severity_band(bad)
