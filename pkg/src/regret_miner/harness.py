"""End-to-end experiment pipelines.

deploy -> score -> mine -> build_subsets -> finetune_and_redeploy, plus the
report renderers. Every stage is a pure function of (config, seeds) and the
files the previous stage wrote, so a rerun from the same config reproduces
every artifact byte for byte (manifest timestamp aside).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import simkit
from .baselines import label_scenes, scene_prediction_errors, write_comparison
from .core import RngStream
from .planner import PlannerHandle, RewardWeights
from .predictor import (
    PredictorParams,
    TablePredictor,
    fit,
    params_from_json,
    params_to_json,
)
from .regret import (
    LuceShepard,
    mine_top_quantile,
    mined_to_doc,
    reports_to_jsonl,
    score_scene,
)

ARMS = ("Base", "HighRegretFT", "LowRegretFT", "RandomFT", "AllFT")
SPLITS = ("high", "low")
CORE_METRICS = ("collision_cost", "collision_severity", "mean_regret")
ALL_METRICS = CORE_METRICS + ("ade", "fde")

_ARM_STREAM = {"HighRegretFT": 21, "LowRegretFT": 22, "RandomFT": 23, "AllFT": 24}
_SUBSET_STREAM = 31


def _threads() -> int:
    raw = os.environ.get("REGRET_MINER_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map(fn, items: Sequence):
    items = list(items)
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything a pipeline run depends on; YAML-round-trippable."""

    families: tuple[tuple[str, int], ...] = (("StrandedTruck", 20),
                                             ("SparseCruise", 76))
    base_seed: int = 99
    pretrain_families: tuple[tuple[str, int], ...] = (("SparseCruise", 24),
                                                      ("Intersection", 24))
    pretrain_seed: int = 7
    seeds: tuple[int, ...] = (101, 202, 303)
    p: float = 20.0
    holdout_frac: float = 0.2
    finetune_lambda: float = 0.5
    aggregation: str = "mean"
    replan_every: int = 10
    planner: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    predictor: dict = field(default_factory=dict)
    out_dir: str = "runs/case-study"

    def __post_init__(self):
        self.families = tuple((str(f), int(n)) for f, n in self.families)
        self.pretrain_families = tuple((str(f), int(n))
                                       for f, n in self.pretrain_families)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.families:
            raise ValueError("families must be non-empty")
        for fam, n in self.families + self.pretrain_families:
            if fam not in simkit.FAMILIES:
                raise ValueError(f"unknown family {fam!r}")
            if n < 1:
                raise ValueError(f"family count must be >= 1, got {n}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not (0.0 < self.p < 100.0):
            raise ValueError("p must be in (0, 100)")
        if not (0.0 < self.holdout_frac < 1.0):
            raise ValueError("holdout_frac must be in (0, 1)")
        if not (0.0 < self.finetune_lambda <= 1.0):
            raise ValueError("finetune_lambda must be in (0, 1]")
        if self.aggregation not in ("mean", "worst"):
            raise ValueError("aggregation must be 'mean' or 'worst'")
        if self.replan_every < 1:
            raise ValueError("replan_every must be >= 1")

    def planner_handle(self) -> PlannerHandle:
        kw = dict(self.planner)
        if "steer_profiles" in kw:
            kw["steer_profiles"] = tuple(kw["steer_profiles"])
        if "accel_levels" in kw:
            kw["accel_levels"] = tuple(kw["accel_levels"])
        return PlannerHandle(weights=RewardWeights(**self.weights), **kw)

    def fresh_predictor(self) -> PredictorParams:
        kw = {k: v for k, v in self.predictor.items() if k != "yield_radius"}
        return PredictorParams.fresh(**kw)

    def fit_kwargs(self) -> dict:
        out = {}
        if "yield_radius" in self.predictor:
            out["yield_radius"] = self.predictor["yield_radius"]
        return out

    def n_scenarios(self) -> int:
        return sum(n for _, n in self.families)

    def to_dict(self) -> dict:
        return {
            "families": [list(x) for x in self.families],
            "base_seed": self.base_seed,
            "pretrain_families": [list(x) for x in self.pretrain_families],
            "pretrain_seed": self.pretrain_seed,
            "seeds": list(self.seeds),
            "p": self.p,
            "holdout_frac": self.holdout_frac,
            "finetune_lambda": self.finetune_lambda,
            "aggregation": self.aggregation,
            "replan_every": self.replan_every,
            "planner": dict(self.planner),
            "weights": dict(self.weights),
            "predictor": dict(self.predictor),
            "out_dir": self.out_dir,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        known = set(ExperimentConfig().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("families", "pretrain_families"):
            if key in kw:
                kw[key] = tuple((f, n) for f, n in kw[key])
        if "seeds" in kw:
            kw["seeds"] = tuple(kw["seeds"])
        return ExperimentConfig(**kw)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def config_to_yaml(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
    return path


def config_from_yaml(path) -> ExperimentConfig:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError("config file must contain a mapping")
    return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# Deployment
# ---------------------------------------------------------------------------

def _batch_specs(families, base_seed) -> list[simkit.ScenarioSpec]:
    specs = []
    for fam, n in families:
        specs.extend(simkit.generate_scenario_batch(fam, n, base_seed))
    return specs


def pretrain_predictor(config: ExperimentConfig) -> PredictorParams:
    """Base predictor: fit on closed-loop runs of the pretraining families
    under the ground-truth-future predictor (clean demonstrations)."""
    if not config.pretrain_families:
        raise ValueError("pretrain_families must be non-empty")
    specs = _batch_specs(config.pretrain_families, config.pretrain_seed)
    handle = config.planner_handle()

    def run(spec):
        return simkit.run_closed_loop(spec, handle, simkit.OraclePredictor(),
                                      config.replan_every)

    scenes = _map(run, specs)
    return fit(scenes, init=config.fresh_predictor(), learning="full",
               **config.fit_kwargs())


def deploy(config: ExperimentConfig, params: PredictorParams,
           out_dir=None) -> tuple[list, dict[str, Path]]:
    """Closed-loop deployment of every configured scenario with the base
    predictor; writes scenes.jsonl, scenarios.json, predictor_base.json, and
    manifest.json (the only file carrying a timestamp)."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = _batch_specs(config.families, config.base_seed)
    handle = config.planner_handle()

    def run(spec):
        return simkit.run_closed_loop(spec, handle, TablePredictor(params),
                                      config.replan_every)

    scenes = _map(run, specs)
    paths = {
        "scenes": out / "scenes.jsonl",
        "scenarios": out / "scenarios.json",
        "predictor_base": out / "predictor_base.json",
        "manifest": out / "manifest.json",
    }
    simkit.scenes_to_jsonl(paths["scenes"], scenes)
    paths["scenarios"].write_text(json.dumps({
        "schema": "scenarios/1",
        "scenarios": [simkit.spec_to_dict(s) for s in specs],
    }, indent=2))
    paths["predictor_base"].write_text(params_to_json(params))
    paths["manifest"].write_text(json.dumps({
        "schema": "manifest/1",
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "n_scenes": len(scenes),
        "aborted_ids": sorted(s.scenario_id for s in scenes if s.aborted),
    }, indent=2))
    return scenes, paths


def load_deployment(out_dir) -> tuple[ExperimentConfig, list, dict, PredictorParams]:
    """(config, scenes, specs_by_id, base params) from a deployment directory."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    config = ExperimentConfig.from_dict(manifest["config"])
    scenes = simkit.scenes_from_jsonl(out / "scenes.jsonl")
    doc = json.loads((out / "scenarios.json").read_text())
    specs = [simkit.spec_from_dict(d) for d in doc["scenarios"]]
    params = params_from_json((out / "predictor_base.json").read_text())
    return config, scenes, {s.scenario_id: s for s in specs}, params


# ---------------------------------------------------------------------------
# Scoring and subset construction
# ---------------------------------------------------------------------------

def score_deployment(scenes: Sequence, config: ExperimentConfig):
    """(scores by scenario id, full per-scene regret reports)."""
    model = LuceShepard(config.planner_handle().weights)

    def one(scene):
        return score_scene(model, scene, aggregation=config.aggregation)

    reports = _map(one, scenes)
    scores = {r.scenario_id: r.score for r in reports}
    return scores, reports


@dataclass(frozen=True)
class Subsets:
    """Holdout/fine-tuning split of a scored deployment."""

    holdout_high: frozenset[str]
    holdout_low: frozenset[str]
    pool_high: frozenset[str]
    pool_low: frozenset[str]
    pool_random: frozenset[str]
    pool_all: frozenset[str]

    def __post_init__(self):
        holdouts = self.holdout_high | self.holdout_low
        for name in ("pool_high", "pool_low", "pool_random", "pool_all"):
            if getattr(self, name) & holdouts:
                raise ValueError(f"{name} overlaps a holdout set")
        if not self.pool_random <= self.pool_all:
            raise ValueError("pool_random must be a subset of pool_all")

    def to_dict(self) -> dict:
        return {"schema": "subsets/1",
                **{k: sorted(getattr(self, k)) for k in (
                    "holdout_high", "holdout_low", "pool_high", "pool_low",
                    "pool_random", "pool_all")}}

    @staticmethod
    def from_dict(d: dict) -> "Subsets":
        if d.get("schema") != "subsets/1":
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        return Subsets(**{k: frozenset(d[k]) for k in (
            "holdout_high", "holdout_low", "pool_high", "pool_low",
            "pool_random", "pool_all")})


def _rng_sample(ids: Sequence[str], k: int, rng: RngStream) -> frozenset[str]:
    ids = sorted(ids)
    gen = rng.generator()
    take = gen.choice(len(ids), size=k, replace=False)
    return frozenset(ids[int(j)] for j in take)


def build_subsets(scene_ids: Sequence[str], scores: dict[str, float],
                  p: float, holdout_frac: float, rng: RngStream) -> Subsets:
    """Mine the top-p% as the high-regret set, hold out holdout_frac of both
    halves (ceil), and build equal-size fine-tuning pools.

    pool_high: mined scenes not held out. pool_low: the |pool_high|
    lowest-scoring non-holdout scenes. pool_random: |pool_high| scenes
    sampled uniformly from pool_all (everything not held out).
    """
    ids = list(scene_ids)
    missing = [i for i in ids if i not in scores]
    if missing:
        raise ValueError(f"scores missing for {missing[:3]}...")
    mined = mine_top_quantile(sorted((i, scores[i]) for i in ids), p)
    low = [i for i in ids if i not in mined]
    n_hold_high = math.ceil(holdout_frac * len(mined))
    n_hold_low = math.ceil(holdout_frac * len(low))
    holdout_high = _rng_sample(sorted(mined), n_hold_high, rng.derive(0))
    holdout_low = _rng_sample(low, n_hold_low, rng.derive(1))
    pool_high = frozenset(mined) - holdout_high
    pool_all = frozenset(ids) - holdout_high - holdout_low
    k = len(pool_high)
    if k < 1:
        raise ValueError("pool_high is empty after holdout")
    low_candidates = sorted((i for i in low if i not in holdout_low),
                            key=lambda i: (scores[i], i))
    if len(low_candidates) < k:
        raise ValueError(f"need {k} low-regret scenes, have {len(low_candidates)}")
    pool_low = frozenset(low_candidates[:k])
    if len(pool_all) < k:
        raise ValueError(f"need {k} scenes for the random pool, have {len(pool_all)}")
    pool_random = _rng_sample(sorted(pool_all), k, rng.derive(2))
    return Subsets(holdout_high=holdout_high, holdout_low=holdout_low,
                   pool_high=pool_high, pool_low=pool_low,
                   pool_random=pool_random, pool_all=pool_all)


# ---------------------------------------------------------------------------
# Fine-tuning case study
# ---------------------------------------------------------------------------

@dataclass
class CaseStudyReport:
    """Per-arm, per-split, per-seed closed-loop metrics.

    values[arm][split] is a list of cells aligned with seeds; each cell holds
    the five metrics plus per-scene collision costs and the frame count.
    """

    seeds: tuple[int, ...]
    values: dict[str, dict[str, list[dict]]]

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        for arm, by_split in self.values.items():
            for split, cells in by_split.items():
                if len(cells) != len(self.seeds):
                    raise ValueError(f"{arm}/{split}: {len(cells)} cells for "
                                     f"{len(self.seeds)} seeds")
                for cell in cells:
                    per_scene = cell["per_scene_collision_cost"]
                    total = sum(per_scene.values())
                    frames = cell["collision_frames"]
                    sev = cell["collision_severity"]
                    expect = total / frames if frames > 0 else 0.0
                    if abs(sev - expect) > 1e-9:
                        raise ValueError(f"{arm}/{split}: severity {sev} "
                                         f"inconsistent with {expect}")
                    mean_cost = total / len(per_scene) if per_scene else 0.0
                    if abs(cell["collision_cost"] - mean_cost) > 1e-9:
                        raise ValueError(f"{arm}/{split}: collision_cost "
                                         "inconsistent with per-scene costs")

    def metric_over_seeds(self, arm: str, split: str, metric: str) -> list[float]:
        return [cell[metric] for cell in self.values[arm][split]]

    def aggregate(self, arm: str, split: str, metric: str) -> tuple[float, float]:
        vals = np.array(self.metric_over_seeds(arm, split, metric))
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        return float(vals.mean()), sd

    def pooled_scene_costs(self, arm: str, split: str) -> list[float]:
        out = []
        for cell in self.values[arm][split]:
            out.extend(cell["per_scene_collision_cost"][k]
                       for k in sorted(cell["per_scene_collision_cost"]))
        return out

    def median_collision_cost(self, arm: str, split: str) -> float:
        return float(np.median(self.pooled_scene_costs(arm, split)))

    def to_dict(self) -> dict:
        return {"schema": "casestudy/1", "seeds": list(self.seeds),
                "arms": list(self.values), "values": self.values}

    @staticmethod
    def from_dict(d: dict) -> "CaseStudyReport":
        if d.get("schema") != "casestudy/1":
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        return CaseStudyReport(seeds=tuple(d["seeds"]), values=d["values"])


def finetune_params(arm: str, config: ExperimentConfig,
                    base_params: PredictorParams, subsets: Subsets,
                    scenes_by_id: dict, seed: int) -> PredictorParams:
    """One arm's predictor for one seed: bootstrap-resample the arm's pool
    and blend the refit counts into the base table. Base passes through."""
    if arm == "Base":
        return base_params
    pool_ids = sorted({
        "HighRegretFT": subsets.pool_high,
        "LowRegretFT": subsets.pool_low,
        "RandomFT": subsets.pool_random,
        "AllFT": subsets.pool_all,
    }[arm])
    if not pool_ids:
        raise ValueError(f"{arm}: empty fine-tuning pool")
    gen = RngStream(seed, _ARM_STREAM[arm]).generator()
    take = gen.integers(0, len(pool_ids), size=len(pool_ids))
    scenes = [scenes_by_id[pool_ids[int(j)]] for j in take]
    return fit(scenes, init=base_params, learning="finetune",
               lam=config.finetune_lambda, **config.fit_kwargs())


def _split_cell(scenes: Sequence, config: ExperimentConfig) -> dict:
    model = LuceShepard(config.planner_handle().weights)
    per_scene = {s.scenario_id: s.total_collision_cost for s in scenes}
    frames = sum(s.collision_frames for s in scenes)
    total = sum(per_scene.values())
    regrets = [score_scene(model, s, aggregation=config.aggregation).score
               for s in scenes]
    errs = [scene_prediction_errors(s) for s in scenes]
    return {
        "collision_cost": total / len(per_scene) if per_scene else 0.0,
        "collision_severity": total / frames if frames > 0 else 0.0,
        "mean_regret": float(np.mean(regrets)) if regrets else 0.0,
        "ade": float(np.mean([e[0] for e in errs])) if errs else 0.0,
        "fde": float(np.mean([e[1] for e in errs])) if errs else 0.0,
        "collision_frames": frames,
        "per_scene_collision_cost": per_scene,
    }


def finetune_and_redeploy(config: ExperimentConfig, scenes_by_id: dict,
                          specs_by_id: dict, subsets: Subsets,
                          base_params: PredictorParams,
                          arms: Sequence[str] = ARMS,
                          fitted: Optional[dict] = None) -> CaseStudyReport:
    """Refit per (arm, seed), re-run the holdout scenarios closed-loop, and
    collect metrics.

    The Base arm never refits, so its redeployment is seed-independent and is
    run once. Pass fitted={(arm, seed): params} to reuse saved predictors.
    """
    handle = config.planner_handle()
    split_ids = {"high": sorted(subsets.holdout_high),
                 "low": sorted(subsets.holdout_low)}
    for split, ids in split_ids.items():
        missing = [i for i in ids if i not in specs_by_id]
        if missing:
            raise ValueError(f"{split} holdout specs missing: {missing[:3]}")

    def run_split(params, ids):
        def one(sid):
            return simkit.run_closed_loop(specs_by_id[sid], handle,
                                          TablePredictor(params),
                                          config.replan_every)
        return _split_cell(_map(one, ids), config)

    values: dict[str, dict[str, list[dict]]] = {}
    base_cells = None
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}; known: {ARMS}")
        values[arm] = {"high": [], "low": []}
        if arm == "Base":
            base_cells = {split: run_split(base_params, ids)
                          for split, ids in split_ids.items()}
            for split in SPLITS:
                values[arm][split] = [dict(base_cells[split])
                                      for _ in config.seeds]
            continue
        for seed in config.seeds:
            if fitted is not None and (arm, seed) in fitted:
                params = fitted[(arm, seed)]
            else:
                params = finetune_params(arm, config, base_params, subsets,
                                         scenes_by_id, seed)
            for split, ids in split_ids.items():
                values[arm][split].append(run_split(params, ids))
    return CaseStudyReport(seeds=config.seeds, values=values)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def write_case_markdown(report: CaseStudyReport, path) -> Path:
    """Arm x split table of the three closed-loop metrics (mean +/- sd over
    seeds), with prediction errors in a second table."""
    path = Path(path)
    lines = ["# Fine-tuning case study", "",
             f"Seeds: {', '.join(str(s) for s in report.seeds)}", ""]
    lines += ["## Closed-loop metrics", "",
              "| arm | split | collision cost | collision severity | mean regret |",
              "| --- | --- | --- | --- | --- |"]
    for arm in report.values:
        for split in SPLITS:
            cells = [f"{report.aggregate(arm, split, m)[0]:.4f} ± "
                     f"{report.aggregate(arm, split, m)[1]:.4f}"
                     for m in CORE_METRICS]
            lines.append(f"| {arm} | {split} | " + " | ".join(cells) + " |")
    lines += ["", "## Prediction errors", "",
              "| arm | split | ADE | FDE |", "| --- | --- | --- | --- |"]
    for arm in report.values:
        for split in SPLITS:
            cells = [f"{report.aggregate(arm, split, m)[0]:.4f} ± "
                     f"{report.aggregate(arm, split, m)[1]:.4f}"
                     for m in ("ade", "fde")]
            lines.append(f"| {arm} | {split} | " + " | ".join(cells) + " |")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_case_csv(report: CaseStudyReport, path) -> Path:
    """Long-form arm,split,seed,metric,value rows at full float precision."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["arm", "split", "seed", "metric", "value"])
        for arm, by_split in report.values.items():
            for split in SPLITS:
                for seed, cell in zip(report.seeds, by_split[split]):
                    for metric in ALL_METRICS:
                        w.writerow([arm, split, seed, metric,
                                    repr(float(cell[metric]))])
    return path


def read_case_csv(path) -> dict[tuple[str, str, int, str], float]:
    out = {}
    with open(path) as f:
        for row in csv.DictReader(f):
            key = (row["arm"], row["split"], int(row["seed"]), row["metric"])
            out[key] = float(row["value"])
    return out


def write_regret_histogram(scores: dict[str, float], p: float, path,
                           bins: int = 16) -> Path:
    """Hand-rolled SVG histogram of per-scene regret with the mining
    threshold marked."""
    path = Path(path)
    vals = np.array([scores[k] for k in sorted(scores)])
    if vals.size < 1:
        raise ValueError("scores must be non-empty")
    mined = mine_top_quantile(sorted(scores.items()), p)
    threshold = min(scores[i] for i in mined)
    counts, edges = np.histogram(vals, bins=bins)
    W, H, ml, mb, mt, mr = 640, 360, 60, 40, 24, 16
    pw, ph = W - ml - mr, H - mt - mb
    cmax = max(1, int(counts.max()))
    lo, hi = float(edges[0]), float(edges[-1])
    span = hi - lo if hi > lo else 1.0

    def x_at(v):
        return ml + (v - lo) / span * pw

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{ml}" y="16" font-family="sans-serif" font-size="13">'
             f'Scene regret distribution (N={vals.size}, p={p:g}%)</text>']
    for i, c in enumerate(counts):
        x0, x1 = x_at(edges[i]), x_at(edges[i + 1])
        h = ph * c / cmax
        parts.append(f'<rect x="{x0:.2f}" y="{mt + ph - h:.2f}" '
                     f'width="{max(0.5, x1 - x0 - 1):.2f}" height="{h:.2f}" '
                     f'fill="#4c78a8"/>')
    tx = x_at(threshold)
    parts.append(f'<line x1="{tx:.2f}" y1="{mt}" x2="{tx:.2f}" y2="{mt + ph}" '
                 f'stroke="#d62728" stroke-width="1.5" stroke-dasharray="5,3"/>')
    parts.append(f'<text x="{min(tx + 4, W - 130):.2f}" y="{mt + 12}" '
                 f'font-family="sans-serif" font-size="11" fill="#d62728">'
                 f'mine threshold {threshold:.4g}</text>')
    parts.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" '
                 f'stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * span
        parts.append(f'<text x="{x_at(v):.2f}" y="{H - 14}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{v:.4g}</text>')
    parts.append(f'<text x="{ml - 8}" y="{mt + 4}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="11">{cmax}</text>')
    parts.append(f'<text x="{ml - 8}" y="{mt + ph}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="11">0</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path


def report(case: Optional[CaseStudyReport], formats: Sequence[str], out_dir,
           scores: Optional[dict[str, float]] = None,
           p: float = 20.0) -> list[Path]:
    """Render the requested formats: md/csv need the case study, svg needs
    deployment scores."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "md":
            if case is None:
                raise ValueError("markdown report needs a case study")
            written.append(write_case_markdown(case, out_dir / "case_study.md"))
        elif fmt == "csv":
            if case is None:
                raise ValueError("csv report needs a case study")
            written.append(write_case_csv(case, out_dir / "case_study.csv"))
        elif fmt == "svg":
            if scores is None:
                raise ValueError("svg histogram needs deployment scores")
            written.append(write_regret_histogram(scores, p,
                                                  out_dir / "regret_hist.svg"))
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def run_full_pipeline(config: ExperimentConfig,
                      out_dir=None) -> dict[str, Path]:
    """pretrain -> deploy -> score -> mine -> compare -> subsets ->
    finetune/redeploy -> reports, all under one output directory."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    paths["config"] = config_to_yaml(config, out / "config.yaml")

    base_params = pretrain_predictor(config)
    scenes, dep_paths = deploy(config, base_params, out)
    paths.update(dep_paths)

    scores, reports = score_deployment(scenes, config)
    paths["reports"] = out / "reports.jsonl"
    reports_to_jsonl(paths["reports"], reports)
    paths["scores"] = out / "scores.json"
    paths["scores"].write_text(json.dumps({
        "schema": "scores/1", "aggregation": config.aggregation,
        "scores": {k: scores[k] for k in sorted(scores)}}, indent=2))
    paths["mined"] = out / "mined.json"
    paths["mined"].write_text(json.dumps(
        mined_to_doc(sorted(scores.items()), config.p, config.aggregation),
        indent=2))

    labelings = label_scenes(scenes, weights=config.planner_handle().weights,
                             p=config.p, handle=config.planner_handle(),
                             aggregation=config.aggregation)
    for pth in write_comparison(labelings, out / "comparison"):
        paths[f"comparison/{pth.name}"] = pth

    subsets = build_subsets([s.scenario_id for s in scenes], scores, config.p,
                            config.holdout_frac,
                            RngStream(config.base_seed, _SUBSET_STREAM))
    paths["subsets"] = out / "subsets.json"
    paths["subsets"].write_text(json.dumps(subsets.to_dict(), indent=2))

    scenes_by_id = {s.scenario_id: s for s in scenes}
    specs_by_id = {s.scenario_id: s
                   for s in _batch_specs(config.families, config.base_seed)}
    pred_dir = out / "predictors"
    pred_dir.mkdir(exist_ok=True)
    fitted = {}
    for arm in ARMS:
        if arm == "Base":
            continue
        for seed in config.seeds:
            params = finetune_params(arm, config, base_params, subsets,
                                     scenes_by_id, seed)
            fitted[(arm, seed)] = params
            fp = pred_dir / f"{arm}-{seed}.json"
            fp.write_text(params_to_json(params))
            paths[f"predictors/{fp.name}"] = fp

    case = finetune_and_redeploy(config, scenes_by_id, specs_by_id, subsets,
                                 base_params, fitted=fitted)
    paths["case_study"] = out / "case_study.json"
    paths["case_study"].write_text(json.dumps(case.to_dict(), indent=2))

    rep_dir = out / "report"
    for pth in report(case, ("md", "csv", "svg"), rep_dir, scores=scores,
                      p=config.p):
        paths[f"report/{pth.name}"] = pth
    return paths
