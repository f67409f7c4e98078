"""Command line entry point: ``facetflow <prox|facet1d|evolve|suite> --config FILE``."""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, parse_mapping
from .scenarios import REGISTRY, run_scenario

FAMILIES = ("prox", "facet1d", "evolve")
SUITE_DEFAULT = ("explicit1d", "nonexistence", "prox_properties", "comparison", "lip_bound", "wulff_shrink")


def _out_root(args, cfg: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get("FACETFLOW_OUT", "facetflow_out")) / cfg.scenario


def _rerun(args, seed: int, out: Path, scenario: str | None = None) -> str:
    parts = ["facetflow", args.command, "--config", args.config, "--seed", str(seed), "--out", str(out)]
    if scenario is not None:
        parts = ["facetflow", REGISTRY[scenario].family, "--config", f"<config with scenario = \"{scenario}\">",
                 "--seed", str(seed), "--out", str(out)]
    return " ".join(shlex.quote(p) if not p.startswith("<") else p for p in parts)


def _run_one(cfg: RunConfig, out: Path):
    try:
        res = run_scenario(cfg, out)
    except Exception as exc:  # noqa: BLE001 - one broken scenario must not sink a suite
        return cfg.scenario, [f"[ERROR] {exc}"], False
    return res.name, [c.line() for c in res.checks], res.ok


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="facetflow", description=__doc__)
    ap.add_argument("command", choices=FAMILIES + ("suite",))
    ap.add_argument("--config", required=True, help="TOML or JSON run configuration")
    ap.add_argument("--out", help="output directory (default: $FACETFLOW_OUT/<scenario>)")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--jobs", type=int, default=1, help="run suite scenarios concurrently")
    args = ap.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"facetflow: invalid config {args.config}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"facetflow: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)

    if args.command != "suite":
        if cfg.scenario == "suite" or REGISTRY[cfg.scenario].family != args.command:
            fam = "suite" if cfg.scenario == "suite" else REGISTRY[cfg.scenario].family
            print(f"facetflow: scenario {cfg.scenario!r} belongs to '{fam}', not '{args.command}'", file=sys.stderr)
            return 2
        jobs = [(cfg, _out_root(args, cfg))]
    elif cfg.scenario == "suite":
        names = cfg["suite"].get("scenarios") or list(SUITE_DEFAULT)
        root = Path(args.out) if args.out else Path(cfg.out or os.environ.get("FACETFLOW_OUT", "facetflow_out")) / "suite"
        jobs = []
        for name in names:
            try:
                sub = parse_mapping({"scenario": name, "seed": cfg.seed})
            except ConfigError as exc:
                print(f"facetflow: invalid config {args.config}: suite.scenarios: {exc}", file=sys.stderr)
                return 2
            jobs.append((sub, root / name))
    else:
        jobs = [(cfg, _out_root(args, cfg))]

    failed = []
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_run_one, [c for c, _ in jobs], [o for _, o in jobs]))
    else:
        results = [_run_one(c, o) for c, o in jobs]
    for (c, out), (name, lines, ok) in zip(jobs, results):
        print(f"== {name} -> {out}")
        for line in lines:
            print("  " + line)
        if not ok:
            failed.append((c, out))
    if failed:
        print(f"{len(failed)} scenario(s) failed an embedded check", file=sys.stderr)
        for c, out in failed:
            sc = None if args.command != "suite" or cfg.scenario != "suite" else c.scenario
            print(f"rerun with: {_rerun(args, c.seed, out, sc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
