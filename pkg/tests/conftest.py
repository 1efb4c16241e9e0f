import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from geonet.cli import main
from geonet.config import load_config
from geonet.trainer import read_metrics

DESK_CFG = """\
# desk-scale synthetic run
input_size = 64
n_slices = 200
phantom_size = 80
epochs = 32
batch_size = 16
learning_rate = 0.01
seed = 0
"""

ACCEPTANCE = {}


def record(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@dataclass
class DeskRun:
    config_path: Path
    out_dir: Path
    checkpoint: Path
    metrics_path: Path
    seconds: float

    @property
    def config(self):
        return load_config(self.config_path)

    @property
    def metrics(self):
        return read_metrics(self.metrics_path)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """One full desk-scale training run through the CLI, shared by all tests."""
    root = tmp_path_factory.mktemp("desk")
    cfg = root / "desk.cfg"
    cfg.write_text(DESK_CFG)
    out = root / "run"
    t0 = time.perf_counter()
    code = main(["train", "--config", str(cfg), "--out-dir", str(out)])
    seconds = time.perf_counter() - t0
    assert code == 0
    return DeskRun(cfg, out, out / "model.geon", out / "metrics.csv", seconds)
