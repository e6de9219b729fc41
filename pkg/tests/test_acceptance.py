"""Acceptance criteria 1-15, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line as it finishes; the same lines
are repeated in the terminal summary (see ``conftest.py``). The whole suite
takes several minutes. Set ``REPP_ACCEPTANCE_SEED`` to change the seed and
``REPP_ACCEPTANCE_OUT`` to keep the artifacts.
"""
import json
import os
from pathlib import Path

import pytest

from repp_lab.acceptance import CRITERIA, AcceptanceSuite

SEED = int(os.environ.get("REPP_ACCEPTANCE_SEED", "7"))

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = os.environ.get("REPP_ACCEPTANCE_OUT")
    out = Path(out) if out else tmp_path_factory.mktemp("acceptance")
    out.mkdir(parents=True, exist_ok=True)
    return AcceptanceSuite(SEED, out)


def _brief(metrics):
    keep = {k: v for k, v in metrics.items() if isinstance(v, (int, float, bool, str)) and not isinstance(v, bool)}
    return json.dumps(dict(list(keep.items())[:4]), default=str)


@pytest.mark.parametrize("cid", CRITERIA, ids=[f"criterion{c:02d}" for c in CRITERIA])
def test_criterion(cid, suite, capsys, acceptance_lines):
    (oc,) = suite.run([cid])
    line = f"[{'PASS' if oc.passed else 'FAIL'}] {cid:2d} {oc.title}  {_brief(oc.metrics)}"
    acceptance_lines.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert oc.passed, line
