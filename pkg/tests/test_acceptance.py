"""Acceptance criteria 1-10, one PASS/FAIL line each.

Criterion 10 talks to a real chat endpoint and only runs when
BALANCESIM_LIVE_URL is set (optionally BALANCESIM_LIVE_MODEL,
BALANCESIM_LIVE_DIALECT and the token in OPENAI_API_KEY).
"""

import csv
import io
import json
import os
import random
import time
from collections import defaultdict
from contextlib import contextmanager
from pathlib import Path

import pytest

from balancesim import analytics
from balancesim.agents import RuleAgent
from balancesim.cli import golden_cases
from balancesim.dynamics import ExperimentConfig, InitMode, Trajectory, synchronous_step
from balancesim.gateway import EndpointConfig
from balancesim.graph import (
    BalancedTriadClass,
    all_ternary_matrices,
    balanced_triad_matrix,
    enumerate_triad_initializations,
    enumerate_triads,
    is_clustering_balanced,
    is_structurally_balanced,
    is_symmetric,
    triad_initialization,
)
from balancesim.kinds import InteractionKind, PromptDialect, UpdateMechanism
from balancesim.parser import ParsedAnswer, cooccurrence_report, extract_sign, scan_keywords
from balancesim.runner import build_manifest, replay, run_experiment
from oracles import oracle_clustering, oracle_structural

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def check(number, title):
        try:
            yield
        except BaseException as exc:
            outcome = "SKIP" if isinstance(exc, pytest.skip.Exception) else "FAIL"
            with capsys.disabled():
                print(f"\ncriterion {number:>2}: {outcome} - {title}")
            raise
        with capsys.disabled():
            print(f"\ncriterion {number:>2}: PASS - {title}")

    return check


def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(Path(path).iterdir()) if p.is_file()}


def test_criterion_01_balance_oracle(criterion):
    with criterion(1, "729 m=3 states: 4 structural, 5 clustering, oracle agrees, < 1 s"):
        start = time.perf_counter()
        structural = clustering = 0
        for M in all_ternary_matrices(3):
            s, c = is_structurally_balanced(M), is_clustering_balanced(M)
            assert s == oracle_structural(3, M.values()) and c == oracle_clustering(3, M.values())
            structural += s
            clustering += c
        elapsed = time.perf_counter() - start
        assert (structural, clustering) == (4, 5)
        assert elapsed < 1.0, elapsed


def test_criterion_02_initialization_census(criterion):
    with criterion(2, "64 distinct triad initializations"):
        inits = enumerate_triad_initializations()
        assert len(inits) == 64 and len(set(inits)) == 64


def test_criterion_03_triad_census(criterion):
    with criterion(3, "20 triads for m=6, 120 for m=10"):
        assert len(enumerate_triads(6)) == 20
        assert len(enumerate_triads(10)) == 120


def test_criterion_04_bookkeeping(criterion, rule_sweep_m3, rule_sweep_large):
    with criterion(4, "decisions per setting 38400 (m=3), 3000 (m=6), 9000 (m=10); m=3 sweep < 2 min"):
        for run, expected in ((rule_sweep_m3, 38400), (rule_sweep_large[6], 3000), (rule_sweep_large[10], 9000)):
            per_setting = defaultdict(int)
            with (run.result.run_dir / "decisions.jsonl").open() as fh:
                for line in fh:
                    per_setting[json.loads(line)["setting"]] += 1
            assert len(per_setting) == 6
            assert set(per_setting.values()) == {expected}, per_setting
        assert rule_sweep_m3.seconds < 120, rule_sweep_m3.seconds


def test_criterion_05_prompt_goldens(criterion):
    with criterion(5, "rendered prompts match golden files for 6 settings x 2 dialects"):
        cases = list(golden_cases())
        m3 = [(c, e, r) for c, e, r in cases if c["matrix"]["m"] == 3]
        assert len({(c["kind"], c["mechanism"], c["dialect"]) for c, _, _ in m3}) == 12
        mismatched = [c["file"] for c, expected, rendered in cases if expected != rendered]
        assert not mismatched, mismatched


def test_criterion_06_parser_fixtures(criterion):
    with criterion(6, "recorded transcripts parse to their stated signs; keyword claims hold"):
        records = [json.loads(line) for line in (FIXTURES / "recorded_transcripts.jsonl").read_text().splitlines()]
        assert len(records) >= 18
        for r in records:
            assert extract_sign(r["raw"], r["kind"]) is ParsedAnswer(r["expected"]), r["id"]
        by_model = defaultdict(list)
        for r in records:
            by_model[r["model"]].append(scan_keywords(r["raw"]))
        assert cooccurrence_report(by_model["llama-3-70B"]) == 0.0
        assert cooccurrence_report(by_model["llama-3-8B"]) > 0.0
        social = {(r["model"], r["kind"], r["mechanism"]) for r in records
                  if scan_keywords(r["raw"]).contains("social balance")}
        assert social == {("llama-3-70B", "appraisal", "influence")}


def test_criterion_07_rule_symmetry(criterion):
    with criterion(7, "rule-agent homophily step is symmetric for 64/64 initializations"):
        symmetric = sum(
            is_symmetric(synchronous_step(M, RuleAgent(), InteractionKind.RELATIONSHIP, UpdateMechanism.HOMOPHILY)[0])
            for M in enumerate_triad_initializations()
        )
        assert symmetric == 64


def test_criterion_08_determinism_and_replay(criterion, tmp_path):
    with criterion(8, "same seed gives bit-identical logs; replay gives byte-identical reports"):
        manifest = lambda: build_manifest(m=6, n=10, T=10, seed=7)  # noqa: E731
        a = run_experiment(manifest(), tmp_path / "a", charts=True)
        b = run_experiment(manifest(), tmp_path / "b", charts=True)
        for name in ("decisions.jsonl", "simulations.jsonl"):
            assert (a.run_dir / name).read_bytes() == (b.run_dir / name).read_bytes()
        assert read_dir(a.run_dir / "reports") == read_dir(b.run_dir / "reports")
        rep = replay(a.run_dir, tmp_path / "replayed", charts=True)
        assert not rep.parser_changed
        assert read_dir(tmp_path / "replayed") == read_dir(a.run_dir / "reports")


def test_criterion_09_planted_stability(criterion):
    with criterion(9, "stability metrics recover planted labels in 1000/1000 cases"):
        rnd = random.Random(20240901)
        cfg = ExperimentConfig(T=10, init_mode=InitMode.BALANCED_TRIAD)
        correct = 0
        for _ in range(1000):
            start = balanced_triad_matrix(rnd.choice(list(BalancedTriadClass)))
            last_change = rnd.choice([0] + list(range(1, 11)))  # 0: never changes
            mats = [start]
            for t in range(1, 11):
                if t == last_change or (t < last_change and rnd.random() < 0.5):
                    nxt = triad_initialization(rnd.randrange(64))
                    while nxt == mats[-1]:
                        nxt = triad_initialization(rnd.randrange(64))
                    mats.append(nxt)
                else:
                    mats.append(mats[-1])
            tr = Trajectory(cfg, mats)
            ok = analytics.is_stable_last_half(tr) == (last_change <= 5)
            ok &= analytics.unchanged_from_start(tr) == (last_change == 0)
            ok &= analytics.stability_initially_balanced([tr]) == (1.0 if last_change == 0 else 0.0)
            correct += ok
        assert correct == 1000, correct


@pytest.mark.live
def test_criterion_10_live_smoke(criterion, tmp_path):
    with criterion(10, "live endpoint: 10-simulation m=3 appraisal/homophily run with report"):
        url = os.environ.get("BALANCESIM_LIVE_URL")
        if not url:
            pytest.skip("BALANCESIM_LIVE_URL not set")
        model = os.environ.get("BALANCESIM_LIVE_MODEL", EndpointConfig.model)
        dialect = PromptDialect(os.environ.get("BALANCESIM_LIVE_DIALECT", "llama"))
        endpoint = EndpointConfig(base_url=url, model=model)
        manifest = build_manifest(kinds=[InteractionKind.APPRAISAL], mechanisms=[UpdateMechanism.HOMOPHILY],
                                  m=3, n=10, T=10, backend="llm", init_mode=InitMode.RADEMACHER,
                                  dialect=dialect, model=model, endpoint=endpoint)
        result = run_experiment(manifest, tmp_path, workers=4, charts=True)
        assert result.executed == 10
        (row,) = csv.DictReader(io.StringIO((result.run_dir / "reports" / "balance_frequency.csv").read_text()))
        assert int(row["simulations"]) == 10
        assert row["refusals"].isdigit() and row["type"] in {"S", "C", "x", "---"}
        print(f"\nlive run: refusals={row['refusals']} frequency={row['frequency']} type={row['type']}")
