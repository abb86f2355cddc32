"""Shared fixtures: cached fits on the synthetic presets and the acceptance report."""
from __future__ import annotations

import dataclasses
import re
import time

import numpy as np
import pytest

from mhmmr import synthetic
from mhmmr.baselines import gmm_fit, kmeans_fit
from mhmmr.em import FitConfig, init_params, run_em
from mhmmr.evaluation import channel_subset, evaluate
from mhmmr.inference import decode

ACTIVITY_SEEDS = tuple(range(5))
MONOTONE_SEEDS = tuple(range(20))
SENSOR_PAIRS = {
    "chest+ankle": ("chest", "ankle"),
    "chest+thigh": ("chest", "thigh"),
    "thigh+ankle": ("thigh", "ankle"),
}

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
ACCEPTANCE_COUNT = 9


@pytest.fixture
def record():
    """Store one pass/fail line for an acceptance criterion and echo it."""

    def _record(criterion: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[criterion] = (bool(ok), detail)
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    crashed = set()
    for key in ("failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = re.search(r"test_criterion_(\d+)_", rep.nodeid)
            if m:
                crashed.add(int(m.group(1)))
    if not ACCEPTANCE and not crashed:
        return
    terminalreporter.section("acceptance criteria")
    for c in range(1, ACCEPTANCE_COUNT + 1):
        if c in ACCEPTANCE:
            ok, detail = ACCEPTANCE[c]
            terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'}  {detail}")
        elif c in crashed:
            terminalreporter.write_line(f"criterion {c}: FAIL  (error before a result was recorded)")
        else:
            terminalreporter.write_line(f"criterion {c}: NOT RUN")


# --- fitting helpers ----------------------------------------------------------------

@dataclasses.dataclass
class FitRecord:
    label: str
    series: object
    cfg: FitConfig
    result: object


def fit_all_starts(series, cfg: FitConfig):
    """Every EM run ``fit`` performs for the ``auto`` strategy, plus the one it keeps."""
    runs = [run_em(series, init_params(series, cfg, s), cfg, r)
            for r, s in enumerate(("changepoint", "cluster"))]
    best = runs[0]
    for r in runs[1:]:
        if r.loglik > best.loglik:
            best = r
    return best, runs


def accuracy(params, series) -> float:
    seg, _ = decode(params, series, "viterbi")
    return evaluate(seg.states, series.labels).accuracy


def _activity_study(seed: int) -> dict:
    series, truth = synthetic.activity_protocol(seed)
    cfg = FitConfig(K=12, p=3, seed=seed)
    out = {"series": series, "truth": truth, "cfg": cfg, "records": [], "accuracy": {}}
    t0 = time.perf_counter()
    best, runs = fit_all_starts(series, cfg)
    out["seconds"] = time.perf_counter() - t0
    out["mhmmr"] = best
    out["accuracy"]["mhmmr"] = accuracy(best.params, series)
    out["records"] += [FitRecord(f"mhmmr seed {seed} start {r.restart_index}", series, cfg, r) for r in runs]

    cfg0 = dataclasses.replace(cfg, p=0)
    best0, runs0 = fit_all_starts(series, cfg0)
    out["accuracy"]["hmm_p0"] = accuracy(best0.params, series)
    out["records"] += [FitRecord(f"hmm_p0 seed {seed} start {r.restart_index}", series, cfg0, r) for r in runs0]

    out["accuracy"]["kmeans"] = evaluate(kmeans_fit(series.values, 12, seed).assignments, series.labels).accuracy
    out["accuracy"]["gmm"] = evaluate(gmm_fit(series.values, 12, seed).assignments, series.labels).accuracy

    for name, groups in SENSOR_PAIRS.items():
        sub = channel_subset(series, groups)
        b, rs = fit_all_starts(sub, cfg)
        out["accuracy"][name] = accuracy(b.params, sub)
        out["records"] += [FitRecord(f"{name} seed {seed} start {r.restart_index}", sub, cfg, r) for r in rs]
    return out


@pytest.fixture(scope="session")
def activity_study():
    """Seeds 0-4 of the twelve-activity preset: MHMMR, every baseline and every sensor pair."""
    return {seed: _activity_study(seed) for seed in ACTIVITY_SEEDS}


@pytest.fixture(scope="session")
def monotone_records(activity_study):
    """MHMMR runs (both starts) on twenty seeds of the twelve-activity preset."""
    recs = []
    for seed in MONOTONE_SEEDS:
        if seed in activity_study:
            recs += [r for r in activity_study[seed]["records"] if r.label.startswith("mhmmr")]
            continue
        series, _ = synthetic.activity_protocol(seed)
        cfg = FitConfig(K=12, p=3, seed=seed)
        _, runs = fit_all_starts(series, cfg)
        recs += [FitRecord(f"mhmmr seed {seed} start {r.restart_index}", series, cfg, r) for r in runs]
    return recs


@pytest.fixture(scope="session")
def separated_fit():
    from mhmmr.em import fit

    series, truth = synthetic.simulate_preset("separated", 0)
    cfg = FitConfig(K=3, p=1, seed=0)
    t0 = time.perf_counter()
    result = fit(series, cfg)
    seconds = time.perf_counter() - t0
    return {"series": series, "truth": truth, "cfg": cfg, "result": result, "seconds": seconds,
            "accuracy": accuracy(result.params, series)}


@pytest.fixture(scope="session")
def all_fit_records(activity_study, monotone_records, separated_fit):
    """Every fit produced for the recovery, monotonicity, baseline and ablation checks."""
    recs = list(monotone_records)
    seen = {r.label for r in recs}
    for study in activity_study.values():
        recs += [r for r in study["records"] if r.label not in seen]
    recs.append(FitRecord("separated seed 0", separated_fit["series"], separated_fit["cfg"],
                          separated_fit["result"]))
    return recs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
