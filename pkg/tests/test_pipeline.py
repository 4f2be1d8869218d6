import csv
import gzip
import json
import shutil

import numpy as np
import pytest

from radsignals.pipeline import (OUTPUTS, STAGES, ConfigError, DataError, Pipeline, RunConfig, StageError,
                                 comparable_manifest, output_digests, run_pipeline)

from conftest import demo_config


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_all_outputs_written(demo_run):
    out = demo_run["out"]
    for stage in STAGES:
        for name in OUTPUTS[stage]:
            assert (out / name).is_file(), name
    m = demo_run["manifest"]
    assert set(m["stages"]) == set(STAGES) and "failed_stage" not in m
    assert m["methods"]["lexicon_ranking"] == "z"


def test_seed_set_recovers_planted_promoters(demo_run, demo_corpus):
    seeds = set((demo_run["out"] / "seeds.txt").read_text().split())
    planted = {u for u, pop in demo_corpus["corpus"].ground_truth.items() if pop == "promoter"}
    assert seeds == planted
    report = json.loads((demo_run["out"] / "seed_validation.json").read_text())
    assert report["retained"] == len(seeds) <= report["total"]


def test_cluster_outputs_consistent(demo_run):
    out = demo_run["out"]
    assign = read_csv(out / "assignments.csv")
    signals = {r["user_id"] for r in read_csv(out / "signals.csv")}
    seeds = set((out / "seeds.txt").read_text().split())
    assert {r["user_id"] for r in assign} <= signals and not seeds & {r["user_id"] for r in assign}
    curve = read_csv(out / "k_selection.csv")
    k = len(read_csv(out / "centroids.csv"))
    assert [int(r["k"]) for r in curve] == list(range(2, 2 + len(curve)))
    assert {int(r["cluster"]) for r in assign} == set(range(k))
    summary = json.loads((out / "cluster_summary.json").read_text())
    assert summary["population"] == len(assign) == sum(c["size"] for c in summary["clusters"])
    assert summary["clusters"][0]["label"] == "A"
    emb = read_csv(out / "embedding.csv")
    assert emb and all(np.isfinite(float(r["x"])) and np.isfinite(float(r["y"])) for r in emb)


def test_interactions_diagonal(demo_run):
    out = demo_run["out"]
    rows = list(csv.reader(open(out / "interactions_pre_z.csv")))
    assert rows[0][0] == "" and rows[0][1] == "A"
    z = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    assert z.shape[0] == z.shape[1] and np.nanmean(np.diag(z)) > 1.96


def test_rerun_is_cached_noop(demo_run, demo_corpus, tmp_path):
    out = tmp_path / "run"
    shutil.copytree(demo_run["out"], out)
    before = output_digests(out)
    m = Pipeline(demo_config(demo_corpus, out, permutations=200)).run()
    assert all(t["cached"] for t in m["timings"].values())
    assert output_digests(out) == before


def test_changed_parameter_reruns_downstream_only(demo_run, demo_corpus, tmp_path):
    out = tmp_path / "run"
    shutil.copytree(demo_run["out"], out)
    m = Pipeline(demo_config(demo_corpus, out, permutations=50)).run()
    cached = {s: t["cached"] for s, t in m["timings"].items()}
    assert all(cached[s] for s in STAGES[:STAGES.index("analyze")])
    assert not cached["analyze"] and not cached["report"]


def test_tampered_output_is_recomputed(demo_run, demo_corpus, tmp_path):
    out = tmp_path / "run"
    shutil.copytree(demo_run["out"], out)
    original = (out / "lexicon.tsv").read_bytes()
    (out / "lexicon.tsv").write_text("token\ty1\ty2\tdelta\tz\tis_hashtag\n")
    m = Pipeline(demo_config(demo_corpus, out, permutations=200)).run(until="lexicon")
    assert not m["timings"]["lexicon"]["cached"]
    assert (out / "lexicon.tsv").read_bytes() == original


def test_comparable_manifest_ignores_location_and_threads(demo_run, demo_corpus, tmp_path):
    run_pipeline(demo_config(demo_corpus, tmp_path / "b", permutations=200, threads=3), until="lexicon")
    a = comparable_manifest(demo_run["out"] / "manifest.json")
    b = comparable_manifest(tmp_path / "b" / "manifest.json")
    for stage in ("ingest", "filter", "seeds", "validate", "lexicon"):
        assert a["stages"][stage] == b["stages"][stage]


def test_config_roundtrip_and_relative_paths(demo_corpus, tmp_path):
    cfg = RunConfig.from_file(demo_corpus["paths"]["run_config"])
    assert cfg.input == [str(demo_corpus["dir"] / "tweets.jsonl.gz")]
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"no_such_key": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.json")


def test_missing_keyword_file_names_path(demo_corpus, tmp_path):
    cfg = demo_config(demo_corpus, tmp_path / "run", keywords=str(tmp_path / "nope.txt"))
    with pytest.raises(ConfigError, match="nope.txt"):
        Pipeline(cfg)


@pytest.mark.parametrize("bad", [{"k_range": (5, 2)}, {"permutations": 0}, {"distance": "manhattan"},
                                 {"top_fraction": 1.5}, {"start": "2020-13-01"}])
def test_invalid_config_values(demo_corpus, tmp_path, bad):
    with pytest.raises(ConfigError):
        Pipeline(demo_config(demo_corpus, tmp_path / "run", **bad))


def test_data_error_without_seeds(tmp_path):
    p = tmp_path / "t.jsonl"
    rows = [{"tweet_id": str(i), "user_id": f"u{i % 3}", "timestamp": "2020-06-21T10:00:00Z",
             "kind": "original", "text": "hello world"} for i in range(90)]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(StageError) as info:
        run_pipeline(RunConfig(input=[str(p)], out=str(tmp_path / "run")))
    assert info.value.stage == "validate" and isinstance(info.value.cause, DataError)
    m = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert m["failed_stage"]["stage"] == "validate"


def test_gzip_and_plain_inputs_agree(demo_corpus, tmp_path):
    plain = tmp_path / "tweets.jsonl"
    with gzip.open(demo_corpus["dir"] / "tweets.jsonl.gz", "rb") as src:
        plain.write_bytes(src.read())
    a = demo_config(demo_corpus, tmp_path / "a")
    b = demo_config(demo_corpus, tmp_path / "b", input=[str(plain)])
    run_pipeline(a, until="ingest")
    run_pipeline(b, until="ingest")
    assert (tmp_path / "a" / "aggregates.jsonl").read_bytes() == (tmp_path / "b" / "aggregates.jsonl").read_bytes()
