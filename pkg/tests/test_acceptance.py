"""Acceptance criteria, one test per criterion.

Each test runs the corresponding verification suite on its acceptance
fixture, checks the runtime budget and every contract, and records a
one-line verdict. The verdicts are printed together at the end of the
session (see ``conftest.pytest_terminal_summary``) and immediately when
pytest runs with ``-s``.

Kuwada ratios and brute-force slopes are regression baselines: the first
run writes them to ``tests/fixtures`` and later runs compare against the
stored values.
"""

import json
from pathlib import Path

import numpy as np

from qflow.suites import REGISTRY

FIXTURES = Path(__file__).parent / "fixtures"
VERDICTS: list = []


def _record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    VERDICTS.append(line)
    print(line)


def _run(name: str):
    return REGISTRY[name].run()


def _failures(*results) -> list:
    return [f"{r.name}: {c.name} observed {c.observed:.6g} vs limit {c.limit:.6g}"
            for r in results for c in r.checks if not c.passed]


def _baseline(name: str, values: dict, rel: float) -> list:
    """Compare against a stored baseline, writing it on the first run."""
    path = FIXTURES / f"{name}.json"
    if not path.exists():
        FIXTURES.mkdir(exist_ok=True)
        path.write_text(json.dumps(values, indent=1, sort_keys=True) + "\n")
        return []
    stored = json.loads(path.read_text())
    drift = []
    for key, value in values.items():
        ref = stored.get(key)
        if ref is None or not np.allclose(value, ref, rtol=rel, atol=0.0):
            drift.append(f"baseline {name}[{key}]: {value} vs stored {ref}")
    return drift


def _verdict(number, title, budget, results, extra=()):
    elapsed = sum(r.elapsed for r in results)
    problems = _failures(*results) + list(extra)
    if elapsed > budget:
        problems.append(f"runtime {elapsed:.1f}s over budget {budget:.0f}s")
    summary = "; ".join(f"{c.name} = {c.observed:.4g}" for r in results for c in r.checks)
    _record(number, title, not problems, f"{elapsed:.1f}s/{budget:.0f}s; {summary}")
    assert not problems, "\n".join(problems)


class TestAcceptance:
    def test_criterion_01_exact_identities(self):
        _verdict(1, "exact identities", 5.0, [_run("calculus")])

    def test_criterion_02_p_logarithm(self):
        _verdict(2, "p-logarithm", 1.0, [_run("plog")])

    def test_criterion_03_heat_flow_structure(self):
        _verdict(3, "heat-flow structure", 60.0, [_run("heat-structure")])

    def test_criterion_04_dissipation_refinement(self):
        _verdict(4, "dissipation identity refinement", 120.0, [_run("dissipation")])

    def test_criterion_05_momentum_entropy(self):
        _verdict(5, "momentum-entropy bound", 60.0, [_run("momentum"), _run("mass-preservation")])

    def test_criterion_06_transport_exactness(self):
        _verdict(6, "transport exactness", 30.0, [_run("transport")])

    def test_criterion_07_kuwada(self):
        result = _run("kuwada")
        rows = result.data["rows"]
        values = {f"n{r['n']}_{key}": r[key] for r in rows for key in ("kappa_max", "kappa_max_standard")}
        _verdict(7, "Kuwada ratios", 300.0, [result], _baseline("kuwada_baseline", values, 1e-6))

    def test_criterion_08_identification(self):
        _verdict(8, "identification and uniqueness", 600.0, [_run("identify"), _run("uniqueness")])

    def test_criterion_09_slope_oracles(self):
        result = _run("slope")
        values = {f"{r['space']}_p{r['p']}_{'_'.join(f'{m:.4g}' for m in r['mu0'])}": r["bruteforce"]
                  for r in result.data["rows"]}
        drift = _baseline("slope_baseline", values, 1e-9)
        search = FIXTURES / "slope_search.json"
        if not search.exists():
            search.write_text(json.dumps(result.data["search"], indent=1) + "\n")
        _verdict(9, "slope oracles", 120.0, [result], drift)

    def test_criterion_10_convexity(self):
        _verdict(10, "Fisher convexity witnesses", 30.0, [_run("convexity")])
