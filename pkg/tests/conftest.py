"""Shared fixtures: reference geometries, a small generated dataset, and
quickly trained models reused across test modules.

The acceptance module records one line per criterion; the terminal-summary
hook prints the collected lines after the run so the pass/fail table is
visible regardless of capture settings.
"""

import numpy as np
import pytest

from vardesign import acoustics
from vardesign.acoustics import FrequencyGrid, VarGeometry
from vardesign.apnn import ApnnConfig, train_apnn
from vardesign.arvae import TrainConfig, train_arvae
from vardesign.dataset import Dataset, SamplerConfig, generate


@pytest.fixture(scope="session")
def anchor_geometry() -> VarGeometry:
    """The 870 Hz validation unit (R 14.5, l_a 20, l_b 5, R_n 34.5, R_c 54.5)."""
    return VarGeometry(R=14.5, l_a=20.0, l_b=5.0, R_n=34.5, R_c=54.5)


@pytest.fixture(scope="session")
def default_grid() -> FrequencyGrid:
    return FrequencyGrid.default()


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> Dataset:
    """A 30-sample generated dataset shared by dataset/model/workflow tests."""
    root = tmp_path_factory.mktemp("data") / "small"
    generate(root, SamplerConfig(count=30, seed=7))
    return Dataset(root)


@pytest.fixture(scope="session")
def tiny_arvae_run(tmp_path_factory, small_dataset):
    """A 2-epoch AR-VAE training run on the small dataset (plumbing checks).

    Far too short to reconstruct anything; it exists so that checkpoint
    loading, candidate generation, and report workflows run end to end.
    """
    out = tmp_path_factory.mktemp("arvae_tiny")
    cfg = TrainConfig(batch_size=8, learning_rate=1e-3, epochs=2, seed=3,
                      dtype="float64", channels=(2, 4, 4, 4))
    summary = train_arvae(small_dataset, cfg, out)
    return {"dir": out, "config": cfg, "summary": summary}


@pytest.fixture(scope="session")
def tiny_apnn_run(tmp_path_factory, small_dataset):
    out = tmp_path_factory.mktemp("apnn_tiny")
    cfg = ApnnConfig(hidden=(16, 8), batch_size=16, learning_rate=1e-3,
                     epochs=3, seed=3, dtype="float64")
    summary = train_apnn(small_dataset, cfg, out)
    return {"dir": out, "config": cfg, "summary": summary}


def record_criterion(config, line: str) -> None:
    lines = getattr(config, "_criterion_lines", None)
    if lines is None:
        lines = []
        config._criterion_lines = lines
    lines.append(line)


@pytest.fixture
def record(request):
    """Criterion recorder: call with one line; it prints after the run."""
    def _record(line: str) -> None:
        record_criterion(request.config, line)
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
