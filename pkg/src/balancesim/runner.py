"""Sweeps over settings with append-only logs, resumption and replay.

Layout of one experiment directory::

    <root>/<experiment_id>/
        manifest.json
        decisions.jsonl     one DecisionRecord per line
        simulations.jsonl   one line per finished simulation (written after its decisions)
        reports/            derived CSV/SVG, never a source of truth
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence

from . import reports
from .agents import AgentBackend, FixtureError, ScriptedAgent, make_agent
from .analytics import DEFAULT_REFUSAL_THRESHOLD
from .dynamics import (
    DecisionRecord,
    ExperimentConfig,
    InitMode,
    Trajectory,
    run_simulation,
)
from .gateway import EndpointConfig
from .graph import InteractionMatrix
from .kinds import InteractionKind, PromptDialect, UpdateMechanism
from .parser import PARSER_VERSION

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
DECISIONS = "decisions.jsonl"
SIMULATIONS = "simulations.jsonl"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return {k: (v.value if hasattr(v, "value") else v) for k, v in d.items()}


def config_from_dict(d: dict) -> ExperimentConfig:
    return ExperimentConfig(**d)


@dataclass
class RunManifest:
    configs: list[ExperimentConfig]
    endpoint: Optional[EndpointConfig] = None
    created_at: str = ""
    refusal_threshold: float = DEFAULT_REFUSAL_THRESHOLD
    paths: dict[str, str] = field(default_factory=dict)

    @property
    def experiment_id(self) -> str:
        """Hash of everything that determines results; machine-independent."""
        ident = {"configs": [config_to_dict(c) for c in self.configs]}
        if self.endpoint is not None and any(c.backend == "llm" for c in self.configs):
            e = self.endpoint
            ident["endpoint"] = {"model": e.model, "temperature": e.temperature, "max_tokens": e.max_tokens}
        return hashlib.sha256(_dumps(ident).encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        endpoint = None
        if self.endpoint is not None:
            endpoint = dataclasses.asdict(self.endpoint)
        return {
            "experiment_id": self.experiment_id,
            "created_at": self.created_at,
            "configs": [config_to_dict(c) for c in self.configs],
            "endpoint": endpoint,
            "refusal_threshold": self.refusal_threshold,
            "paths": self.paths,
            "parser_version": PARSER_VERSION,
        }

    @classmethod
    def from_json(cls, d: dict) -> RunManifest:
        endpoint = EndpointConfig(**d["endpoint"]) if d.get("endpoint") else None
        return cls(
            configs=[config_from_dict(c) for c in d["configs"]],
            endpoint=endpoint,
            created_at=d.get("created_at", ""),
            refusal_threshold=float(d.get("refusal_threshold", DEFAULT_REFUSAL_THRESHOLD)),
            paths=dict(d.get("paths", {})),
        )


def build_manifest(
    kinds: Sequence[InteractionKind] = tuple(InteractionKind),
    mechanisms: Sequence[UpdateMechanism] = tuple(UpdateMechanism),
    m: int = 3,
    n: int = 10,
    T: int = 10,
    seed: int = 0,
    backend: str = "rule",
    init_mode: Optional[InitMode] = None,
    dialect: PromptDialect = PromptDialect.LLAMA,
    model: str = "",
    endpoint: Optional[EndpointConfig] = None,
    refusal_threshold: float = DEFAULT_REFUSAL_THRESHOLD,
) -> RunManifest:
    if init_mode is None:
        init_mode = InitMode.EXHAUSTIVE_TRIAD if m == 3 else InitMode.RADEMACHER
    if backend == "llm" and not model and endpoint is not None:
        model = endpoint.model
    configs = [
        ExperimentConfig(m=m, n=n, T=T, kind=k, mechanism=mech, backend=backend, seed=seed,
                         init_mode=init_mode, dialect=dialect, model=model)
        for k, mech in product(kinds, mechanisms)
    ]
    return RunManifest(configs, endpoint=endpoint, refusal_threshold=refusal_threshold)


# ---------------------------------------------------------------- persistence


def _simulation_line(tr: Trajectory) -> dict:
    return {
        "setting": tr.setting.slug,
        "simulation": tr.simulation,
        "init_index": tr.init_index,
        "init": tr.matrices[0].to_list(),
        "status": tr.status,
        "error": tr.error,
        "decisions": len(tr.decisions) if tr.status != "aborted" else 0,
        "refusals": tr.refusals,
    }


def _read_jsonl(path: Path, required: Sequence[str]) -> tuple[list[dict], int]:
    rows, bad = [], 0
    if not path.exists():
        return rows, bad
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if not all(k in row for k in required):
                    raise KeyError
            except (ValueError, KeyError):
                bad += 1
                continue
            rows.append(row)
    if bad:
        log.warning("%s: skipped %d corrupt line(s)", path.name, bad)
    return rows, bad


@dataclass
class RunLog:
    """Parsed contents of an experiment directory."""

    manifest: RunManifest
    simulations: dict[tuple[str, int], dict]
    decisions: dict[tuple[str, int], list[dict]]
    corrupt: int = 0
    # finished simulations whose decision lines are missing or damaged
    incomplete: set[tuple[str, int]] = field(default_factory=set)

    def config_for(self, setting: str) -> ExperimentConfig:
        for cfg in self.manifest.configs:
            if cfg.setting.slug == setting:
                return cfg
        raise KeyError(f"setting {setting!r} not in manifest")


def load_run(run_dir: Path) -> RunLog:
    run_dir = Path(run_dir)
    manifest = RunManifest.from_json(json.loads((run_dir / MANIFEST).read_text(encoding="utf-8")))
    sim_rows, bad_s = _read_jsonl(run_dir / SIMULATIONS, ("setting", "simulation", "status", "init"))
    dec_rows, bad_d = _read_jsonl(run_dir / DECISIONS, ("setting", "simulation", "t", "focal", "target", "raw", "sign"))
    sims: dict[tuple[str, int], dict] = {}
    for row in sim_rows:
        sims[(row["setting"], int(row["simulation"]))] = row  # last line wins
    decisions: dict[tuple[str, int], list[dict]] = defaultdict(list)
    for row in dec_rows:
        key = (row["setting"], int(row["simulation"]))
        if key in sims and sims[key]["status"] != "aborted":
            decisions[key].append(row)
    # a simulation rerun after an abort may have left stale duplicates
    for key, rows in decisions.items():
        dedup = {(r["t"], r["focal"], r["target"]): r for r in rows}
        decisions[key] = [dedup[k] for k in sorted(dedup)]
    incomplete = {
        key for key, row in sims.items()
        if row["status"] != "aborted" and len(decisions.get(key, [])) != int(row.get("decisions", -1))
    }
    if incomplete:
        log.warning("%d simulation(s) have incomplete decision logs", len(incomplete))
    return RunLog(manifest, sims, dict(decisions), bad_s + bad_d, incomplete)


def trajectory_from_log(cfg: ExperimentConfig, sim: dict, decisions: Sequence[dict]) -> Trajectory:
    """Rebuild every matrix from the initial state plus logged signs."""
    init = InteractionMatrix.from_list(cfg.m, sim["init"])
    records = [DecisionRecord.from_json(d) for d in decisions]
    tr = Trajectory(cfg, [init], records, simulation=int(sim["simulation"]),
                    init_index=int(sim["init_index"]), status=sim["status"], error=sim.get("error", ""))
    if sim["status"] == "aborted":
        return tr
    by_t: dict[int, dict] = defaultdict(dict)
    for r in records:
        by_t[r.t][(r.focal, r.target)] = r.sign
    M = init
    for t in range(1, cfg.T + 1):
        M = M.with_updates(by_t.get(t, {}))
        tr.matrices.append(M)
    return tr


def trajectories_from_log(runlog: RunLog) -> list[Trajectory]:
    out = []
    for (setting, sim_idx), sim in sorted(runlog.simulations.items()):
        if (setting, sim_idx) in runlog.incomplete:
            continue
        cfg = runlog.config_for(setting)
        out.append(trajectory_from_log(cfg, sim, runlog.decisions.get((setting, sim_idx), [])))
    return out


def _compact_decisions(run_dir: Path, keep: set[tuple[str, int]]) -> None:
    """Drop decision lines of simulations that never finished (crash mid-run)."""
    path = run_dir / DECISIONS
    if not path.exists():
        return
    kept, dropped = [], 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            try:
                row = json.loads(line)
                ok = (row["setting"], int(row["simulation"])) in keep
            except (ValueError, KeyError):
                ok = False
            if ok:
                kept.append(line if line.endswith("\n") else line + "\n")
            else:
                dropped += 1
    if dropped:
        log.info("dropping %d decision line(s) from unfinished simulations", dropped)
        tmp = path.with_suffix(".tmp")
        tmp.write_text("".join(kept), encoding="utf-8")
        tmp.replace(path)


# ---------------------------------------------------------------- execution


AgentFactory = Callable[[ExperimentConfig], AgentBackend]


def default_agent_factory(endpoint: Optional[EndpointConfig] = None) -> AgentFactory:
    clients = {}

    def factory(cfg: ExperimentConfig) -> AgentBackend:
        if cfg.backend == "llm":
            from .gateway import ChatClient

            if "client" not in clients:
                clients["client"] = ChatClient(endpoint or EndpointConfig())
            return make_agent("llm", cfg.dialect, client=clients["client"])
        return make_agent(cfg.backend, cfg.dialect)

    return factory


@dataclass
class RunResult:
    run_dir: Path
    experiment_id: str
    trajectories: list[Trajectory]
    executed: int
    skipped: int
    report_files: list[Path]


def run_experiment(
    manifest: RunManifest,
    root: Path,
    agent_factory: Optional[AgentFactory] = None,
    workers: int = 1,
    charts: bool = True,
    max_simulations: Optional[int] = None,
) -> RunResult:
    """Execute every pending simulation, append its logs, then write reports.

    Finished simulations already present in the log are skipped, so a rerun
    after an interruption resumes. ``max_simulations`` caps how many new
    simulations run in this call.
    """
    experiment_id = manifest.experiment_id
    run_dir = Path(root) / experiment_id
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / MANIFEST
    if manifest_path.exists():
        manifest.created_at = json.loads(manifest_path.read_text(encoding="utf-8")).get("created_at", "")
    if not manifest.created_at:
        manifest.created_at = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    manifest.paths = {"decisions": DECISIONS, "simulations": SIMULATIONS, "reports": "reports"}
    manifest_path.write_text(json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    prior = load_run(run_dir)
    done = {k for k, v in prior.simulations.items() if v["status"] != "aborted"} - prior.incomplete
    _compact_decisions(run_dir, done)
    factory = agent_factory or default_agent_factory(manifest.endpoint)

    trajectories: dict[tuple[str, int], Trajectory] = {
        (tr.setting.slug, tr.simulation): tr for tr in trajectories_from_log(load_run(run_dir))
    }
    executed = skipped = 0
    budget = max_simulations
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool, \
            (run_dir / DECISIONS).open("a", encoding="utf-8") as dec_fh, \
            (run_dir / SIMULATIONS).open("a", encoding="utf-8") as sim_fh:
        for cfg in manifest.configs:
            slug = cfg.setting.slug
            agent = factory(cfg)
            pending = []
            for sim, init_idx, init in cfg.initializations():
                if (slug, sim) in done:
                    skipped += 1
                    continue
                if budget is not None:
                    if budget <= 0:
                        break
                    budget -= 1
                pending.append((sim, init_idx, init))

            def job(item, cfg=cfg, agent=agent):
                sim, init_idx, init = item
                return run_simulation(cfg, init, agent, sim, init_idx, experiment_id)

            # results come back in submission order; this thread is the only writer
            for tr in pool.map(job, pending):
                if tr.status != "aborted":
                    dec_fh.writelines(_dumps(r.to_json()) + "\n" for r in tr.decisions)
                    dec_fh.flush()
                sim_fh.write(_dumps(_simulation_line(tr)) + "\n")
                sim_fh.flush()
                trajectories[(slug, tr.simulation)] = tr
                executed += 1

    ordered = [trajectories[k] for k in sorted(trajectories)]
    files = reports.write_reports(ordered, run_dir / "reports", charts=charts,
                                  refusal_threshold=manifest.refusal_threshold)
    return RunResult(run_dir, experiment_id, ordered, executed, skipped, files)


def report_from_logs(run_dir: Path, out_dir: Optional[Path] = None, charts: bool = True) -> list[Path]:
    runlog = load_run(run_dir)
    trs = trajectories_from_log(runlog)
    return reports.write_reports(trs, Path(out_dir or Path(run_dir) / "reports"), charts=charts,
                                 refusal_threshold=runlog.manifest.refusal_threshold)


@dataclass
class ReplayResult:
    trajectories: list[Trajectory]
    diffs: list[dict]
    skipped: int
    report_files: list[Path]

    @property
    def parser_changed(self) -> bool:
        return bool(self.diffs)


def replay(run_dir: Path, out_dir: Optional[Path] = None, charts: bool = True) -> ReplayResult:
    """Re-simulate every logged simulation from its raw responses.

    Answers that the current parser reads differently from the logged parse
    (or logged under another parser version) are listed in parser_diff.csv.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir or run_dir / "replay")
    if not (run_dir / MANIFEST).exists():
        files = reports.write_reports([], out_dir, charts=False)
        return ReplayResult([], [], 0, files)
    runlog = load_run(run_dir)
    skipped = runlog.corrupt
    trajectories: list[Trajectory] = []
    diffs: list[dict] = []
    for (setting, sim_idx), sim in sorted(runlog.simulations.items()):
        if (setting, sim_idx) in runlog.incomplete:
            skipped += 1
            continue
        cfg = runlog.config_for(setting)
        logged = runlog.decisions.get((setting, sim_idx), [])
        if sim["status"] == "aborted":
            trajectories.append(trajectory_from_log(cfg, sim, []))
            continue
        agent = ScriptedAgent.from_records(logged, cfg.kind, cfg.dialect)
        init = InteractionMatrix.from_list(cfg.m, sim["init"])
        try:
            tr = run_simulation(cfg, init, agent, sim_idx, int(sim["init_index"]),
                                logged[0]["experiment_id"] if logged else "")
        except FixtureError as exc:
            log.warning("%s #%d: incomplete log, skipped (%s)", setting, sim_idx, exc)
            skipped += 1
            continue
        trajectories.append(tr)
        by_key = {(r["t"], r["focal"], r["target"]): r for r in logged}
        for rec in tr.decisions:
            old = by_key[(rec.t, rec.focal, rec.target)]
            if old.get("parsed") != rec.parsed.value or old.get("parser_version") != PARSER_VERSION:
                diffs.append({"setting": setting, "simulation": sim_idx, "t": rec.t, "focal": rec.focal,
                              "target": rec.target, "logged": old.get("parsed"), "replayed": rec.parsed.value,
                              "logged_version": old.get("parser_version"), "replayed_version": PARSER_VERSION})
    files = reports.write_reports(trajectories, out_dir, charts=charts,
                                  refusal_threshold=runlog.manifest.refusal_threshold)
    diff_path = out_dir / "parser_diff.csv"
    if diffs:
        header = list(diffs[0])
        diff_path.write_text(reports._csv_text(header, [[d[h] for h in header] for d in diffs]), encoding="utf-8")
        files.append(diff_path)
        log.warning("replay: %d answer(s) differ from the logged parse", len(diffs))
    elif diff_path.exists():
        diff_path.unlink()
    return ReplayResult(trajectories, diffs, skipped, files)
