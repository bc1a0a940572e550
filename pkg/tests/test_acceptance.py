"""One test per acceptance criterion, each at its declared tolerance.

Every test prints a ``[PASS]``/``[FAIL]`` line; the lines are also
collected into an "acceptance criteria" section of the terminal summary.
"""

import pytest
from conftest import ACCEPTANCE

from funcoord.acceptance import CRITERIA, TOLERANCES
from funcoord.cli import main

SEED = 0


def report(request, cid, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {cid:>2} {name}: {detail}"
    print(line)
    request.config.stash[ACCEPTANCE].append((cid, line))


def describe(crit):
    parts = []
    for ch in crit.checks:
        op = ">" if ch.above else "<"
        parts.append(f"{ch.name} = {ch.value:.3g} ({op} {ch.tolerance:g})")
    return "; ".join(parts)


@pytest.mark.parametrize("fn", CRITERIA, ids=[fn.__name__.removeprefix("criterion_") for fn in CRITERIA])
def test_criterion(fn, request):
    crit = fn(dict(TOLERANCES), SEED)
    report(request, crit.cid, crit.name, crit.passed, describe(crit))
    failed = [ch for ch in crit.checks if not ch.passed]
    assert not failed, describe(crit)


def test_repro_determinism(tmp_path, request):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = (main(["repro", "--seed", str(SEED), "--out", str(a)]),
             main(["repro", "--seed", str(SEED), "--out", str(b)]))
    same = (a / "repro.csv").read_bytes() == (b / "repro.csv").read_bytes()
    report(request, 12, "determinism of repeated runs", same and codes == (0, 0),
           f"byte-identical repro.csv = {same}, exit codes = {codes}")
    assert codes == (0, 0)
    assert same
