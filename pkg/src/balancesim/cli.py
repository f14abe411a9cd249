"""Command line: run, replay, report, validate-prompts.

Every ``run`` flag can also come from an INI config file (``--config``),
section ``[run]``, using the flag name with dashes or underscores::

    [run]
    kinds = appraisal, opinion
    mechanisms = homophily
    m = 3
    n = 10
    T = 10
    backend = llm
    endpoint = http://localhost:8000/v1
    model = llama-3-70B-instruct

Flags given on the command line win over the file. The API token is read
from the environment variable named by ``api-key-env`` and is never a flag.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .dynamics import InitMode, build_context
from .gateway import EndpointConfig
from .graph import InteractionMatrix
from .kinds import InteractionKind, PromptDialect, UpdateMechanism
from .prompts import render_prompt

RUN_DEFAULTS = {
    "kinds": "relationship,appraisal,opinion",
    "mechanisms": "homophily,influence",
    "m": 3,
    "n": 10,
    "T": 10,
    "seed": 0,
    "backend": "rule",
    "init_mode": "",
    "dialect": "llama",
    "model": "",
    "endpoint": "http://localhost:8000/v1",
    "api_key_env": "OPENAI_API_KEY",
    "temperature": 0.0,
    "max_tokens": 512,
    "timeout": 120.0,
    "retries": 3,
    "max_in_flight": 8,
    "workers": 1,
    "refusal_threshold": 0.9,
    "out": "runs",
    "max_simulations": None,
    "charts": True,
}


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("run"):
        raise SystemExit(f"{path}: missing [run] section")
    out = {}
    for key, value in parser.items("run"):
        name = key.replace("-", "_")
        if name not in RUN_DEFAULTS:
            raise SystemExit(f"{path}: unknown key {key!r}")
        out[name] = value
    return out


def _coerce(name: str, value):
    default = RUN_DEFAULTS[name]
    if value is None:
        return None
    if isinstance(default, bool):
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if name == "max_simulations":
        return int(value)
    return str(value)


def _run_settings(args: argparse.Namespace) -> dict:
    settings = dict(RUN_DEFAULTS)
    settings.update(_load_config(args.config))
    for name in RUN_DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    return {k: _coerce(k, v) for k, v in settings.items()}


def cmd_run(args: argparse.Namespace) -> int:
    from .runner import build_manifest, run_experiment

    s = _run_settings(args)
    endpoint = EndpointConfig(
        base_url=s["endpoint"], model=s["model"] or EndpointConfig.model, temperature=s["temperature"],
        max_tokens=s["max_tokens"], timeout=s["timeout"], retries=s["retries"],
        api_key_env=s["api_key_env"], max_in_flight=s["max_in_flight"],
    )
    manifest = build_manifest(
        kinds=[InteractionKind(k) for k in _split(s["kinds"])],
        mechanisms=[UpdateMechanism(k) for k in _split(s["mechanisms"])],
        m=s["m"], n=s["n"], T=s["T"], seed=s["seed"], backend=s["backend"],
        init_mode=InitMode(s["init_mode"]) if s["init_mode"] else None,
        dialect=PromptDialect(s["dialect"]), model=s["model"],
        endpoint=endpoint if s["backend"] == "llm" else None,
        refusal_threshold=s["refusal_threshold"],
    )
    result = run_experiment(manifest, Path(s["out"]), workers=s["workers"], charts=s["charts"],
                            max_simulations=s["max_simulations"])
    print(f"experiment {result.experiment_id}: {result.executed} simulation(s) run, "
          f"{result.skipped} already done -> {result.run_dir}")
    print((result.run_dir / "reports" / "balance_frequency.csv").read_text(encoding="utf-8"), end="")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    from .runner import replay

    result = replay(Path(args.run_dir), Path(args.out) if args.out else None, charts=not args.no_charts)
    print(f"replayed {len(result.trajectories)} simulation(s), {result.skipped} skipped")
    if result.parser_changed:
        print(f"parser output differs from the log for {len(result.diffs)} answer(s); see parser_diff.csv")
        return 3
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .runner import report_from_logs

    files = report_from_logs(Path(args.run_dir), Path(args.out) if args.out else None, charts=not args.no_charts)
    for f in files:
        print(f)
    return 0


def golden_cases(directory: Optional[Path] = None):
    """Yield (case, expected text, rendered text) for each golden prompt file."""
    base = Path(directory) if directory else Path(str(resources.files("balancesim") / "golden"))
    cases = json.loads((base / "cases.json").read_text(encoding="utf-8"))["cases"]
    for case in cases:
        mx = case["matrix"]
        pairs = {tuple(int(x) for x in k.split(",")): v for k, v in mx["entries"].items()}
        M = InteractionMatrix.from_pairs(mx["m"], pairs)
        ctx = build_context(M, case["focal"], case["target"], case["kind"], case["mechanism"])
        expected = (base / case["file"]).read_bytes().decode("utf-8")
        yield case, expected, render_prompt(ctx, PromptDialect(case["dialect"]))


def cmd_validate_prompts(args: argparse.Namespace) -> int:
    failures = 0
    for case, expected, rendered in golden_cases(Path(args.fixtures) if args.fixtures else None):
        ok = expected == rendered
        failures += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {case['file']}")
        if not ok and args.verbose:
            print(f"  expected: {expected!r}\n  rendered: {rendered!r}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="balancesim", description=__doc__.splitlines()[0], allow_abbrev=False)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep of simulations", allow_abbrev=False)
    run.add_argument("--config", help="INI file with a [run] section")
    run.add_argument("--kinds", help="comma list of relationship, appraisal, opinion")
    run.add_argument("--mechanisms", help="comma list of homophily, influence")
    run.add_argument("-m", "--m", type=int, dest="m", help="population size")
    run.add_argument("-n", "--n", type=int, dest="n", help="simulations (per initialization for m=3)")
    run.add_argument("-T", "--T", type=int, dest="T", help="iterations")
    run.add_argument("--seed", type=int)
    run.add_argument("--backend", help="rule | echo | constant:+1 | constant:-1 | llm")
    run.add_argument("--init-mode", dest="init_mode", choices=[m.value for m in InitMode])
    run.add_argument("--dialect", choices=[d.value for d in PromptDialect])
    run.add_argument("--model", help="model name sent to the endpoint and used as the report label")
    run.add_argument("--endpoint", help="base URL of an OpenAI-compatible API")
    run.add_argument("--api-key-env", dest="api_key_env", help="environment variable holding the token")
    run.add_argument("--temperature", type=float)
    run.add_argument("--max-tokens", dest="max_tokens", type=int)
    run.add_argument("--timeout", type=float)
    run.add_argument("--retries", type=int)
    run.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--refusal-threshold", dest="refusal_threshold", type=float)
    run.add_argument("--out", help="root directory for experiment folders")
    run.add_argument("--max-simulations", dest="max_simulations", type=int,
                     help="stop after this many new simulations (rerun to resume)")
    run.add_argument("--no-charts", dest="charts", action="store_false", default=None)
    run.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-parse logged responses and rebuild reports")
    rp.add_argument("run_dir")
    rp.add_argument("--out")
    rp.add_argument("--no-charts", action="store_true")
    rp.set_defaults(func=cmd_replay)

    rep = sub.add_parser("report", help="rebuild reports from logged signs")
    rep.add_argument("run_dir")
    rep.add_argument("--out")
    rep.add_argument("--no-charts", action="store_true")
    rep.set_defaults(func=cmd_report)

    vp = sub.add_parser("validate-prompts", help="compare rendered prompts with golden files")
    vp.add_argument("--fixtures", help="directory with cases.json and golden .txt files")
    vp.set_defaults(func=cmd_validate_prompts)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
