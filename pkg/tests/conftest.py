import logging
import time
from pathlib import Path

import numpy as np
import pytest
import torch
import yaml

from singsep.cli import stage_configs
from singsep.dataset import DatasetManifest, build_manifest, load_corpus, make_synthetic_corpus
from singsep.networks import NetworkConfig
from singsep.pipeline import CheckpointSet
from singsep.training import TrainConfig, run_training_stage

DESK_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk.yaml"

TINY_NET = NetworkConfig(
    code_dim=8, encoder_width=16, encoder_layers=2, decoder_width=16, decoder_lstm_width=16,
    postnet_width=16, postnet_layers=2, mixture_width=8, f0_width=16, f0_layers=2,
)


@pytest.fixture(autouse=True)
def _seed():
    np.random.seed(0)
    torch.manual_seed(0)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """2 singers x 3 one-second clips; enough for plumbing tests."""
    root = tmp_path_factory.mktemp("tiny") / "corpus"
    make_synthetic_corpus(root, n_singers=2, clips_per_singer=3, duration=1.0, seed=3)
    manifest = build_manifest(root, val_fraction=0.2, test_fraction=0.2, seed=0)
    manifest.save(Path(root) / "manifest.jsonl")
    return Path(root), manifest


@pytest.fixture(scope="session")
def tiny_data(tiny_corpus):
    root, manifest = tiny_corpus
    return load_corpus(manifest, cache_dir=root / ".cache")


@pytest.fixture(scope="session")
def tiny_checkpoints(tiny_corpus, tiny_data):
    """Every stage trained for two steps on the tiny corpus (weights barely move)."""
    _, manifest = tiny_corpus
    tcfg = TrainConfig(batch_size=4, max_steps=2, val_every=1, learning_rate=1e-3)
    done = {}
    for stage, deps in [("teacher", ()), ("student_encoder", ("teacher",)), ("sdn", ("student_encoder",)),
                        ("sin", ("student_encoder",)), ("f0", ())]:
        done[stage], _ = run_training_stage(stage, tiny_data, TINY_NET, tcfg, {d: done[d] for d in deps},
                                            manifest.n_singers)
    return CheckpointSet(done)


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    """The desk-scale run: 4 singers x 20 clips, every stage trained with configs/desk.yaml.

    Takes several minutes on one CPU core; shared by every test that needs
    trained networks.
    """
    logging.getLogger("singsep").setLevel(logging.INFO)
    started = time.time()
    cfg = yaml.safe_load(DESK_CONFIG.read_text())
    corpus = cfg["corpus"]
    root = tmp_path_factory.mktemp("desk") / "corpus"
    make_synthetic_corpus(root, n_singers=corpus["n_singers"],
                          clips_per_singer=corpus["clips_per_singer"], duration=corpus["duration"],
                          seed=corpus.get("seed", 0))
    split = cfg["manifest"]
    manifest = build_manifest(root, val_fraction=split["val_fraction"], test_fraction=split["test_fraction"],
                              seed=split.get("seed", 0))
    data = load_corpus(manifest, cache_dir=Path(root) / ".cache")
    done, reports = {}, {}
    for stage, deps in [("teacher", ()), ("student_encoder", ("teacher",)), ("sdn", ("student_encoder",)),
                        ("sin", ("student_encoder",)), ("f0", ())]:
        ncfg, tcfg = stage_configs(cfg, stage)
        done[stage], reports[stage] = run_training_stage(stage, data, ncfg, tcfg, {d: done[d] for d in deps},
                                                         manifest.n_singers)
    return {"root": Path(root), "manifest": manifest, "data": data, "checkpoints": CheckpointSet(done),
            "reports": reports, "config": cfg, "seconds": time.time() - started}


def pytest_collection_modifyitems(config, items):
    # run the long end-to-end fixture users last so fast failures surface first
    for item in items:
        if "desk" in getattr(item, "fixturenames", ()):
            item.add_marker(pytest.mark.slow)
    items.sort(key=lambda item: "desk" in getattr(item, "fixturenames", ()))


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"AC{number} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
