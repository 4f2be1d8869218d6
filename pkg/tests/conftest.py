import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radsignals.pipeline import RunConfig, run_pipeline  # noqa: E402
from radsignals.synth import demo_spec, synth_corpus, write_synth  # noqa: E402

# acceptance lines collected by test_acceptance.py, printed at the end of the session
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory):
    """The demo synthetic corpus on disk, with its run_config.json."""
    out = tmp_path_factory.mktemp("demo_corpus")
    corpus = synth_corpus(demo_spec(), rng_seed=0)
    paths = write_synth(corpus, out, rng_seed=0)
    return {"dir": out, "corpus": corpus, "paths": paths}


def demo_config(demo_corpus, out, **overrides) -> RunConfig:
    cfg = RunConfig.from_file(demo_corpus["paths"]["run_config"])
    cfg.out = str(out)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


@pytest.fixture(scope="session")
def demo_run(demo_corpus, tmp_path_factory):
    """One full pipeline run over the demo corpus (reduced permutations)."""
    out = tmp_path_factory.mktemp("demo_run")
    cfg = demo_config(demo_corpus, out, permutations=200)
    run_pipeline(cfg)
    return {"out": out, "config": cfg, "manifest": json.loads((out / "manifest.json").read_text())}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
