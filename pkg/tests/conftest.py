import json
import shutil
from pathlib import Path

import pytest

from interp_lab.cli import config as cfgmod
from interp_lab.cli import runner

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def gallery_runs(tmp_path_factory):
    """Every bundled config run once; maps name to (run dir, manifest, summary)."""
    root = tmp_path_factory.mktemp("gallery")
    out = {}
    for name, path in sorted(cfgmod.gallery().items()):
        conf = json.loads(path.read_text())
        d = runner.execute(conf, root / name)
        out[name] = (d, json.loads((d / "manifest.json").read_text()),
                     json.loads((d / "summary.json").read_text()))
    yield out
    shutil.rmtree(root, ignore_errors=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
