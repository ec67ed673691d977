"""Experiment orchestration.

Config-file ingestion, the named sweep recipes, multi-seed runs,
curve aggregation (trailing moving averages, standard errors) and
deterministic CSV emission. Output bytes are a pure function of the
spec and its seeds.
"""

from __future__ import annotations

import dataclasses
import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .agent import AgentConfig, DQNAgent, TrainResult
from .baselines import RandomPolicy, evaluate_policy
from .env import (
    CognitiveRadioEnv,
    ConfigError,
    ScenarioConfig,
    make_observation_normalizer,
)
from .network import QNetwork, save_checkpoint
from .streams import derive_streams

#: Accepted spellings of the sweepable scenario knobs -> canonical name.
SWEEP_VARIABLES = {
    "pu1_slots": "pu1_slots",
    "A": "pu1_slots",
    "harvest_threshold": "harvest_threshold",
    "lambda": "harvest_threshold",
    "ts_fraction": "ts_fraction",
    "rho": "ts_fraction",
    "battery_capacity": "battery_capacity",
    "C_max": "battery_capacity",
}

#: Short scenario-key aliases accepted in config files; each expands to
#: one or more ScenarioConfig fields.
SCENARIO_KEY_ALIASES = {
    "A": ("pu1_slots",),
    "rho": ("ts_fraction",),
    "C_max": ("battery_capacity",),
    "lambda": ("harvest_threshold_pu1", "harvest_threshold_pu2"),
    "harvest_threshold": ("harvest_threshold_pu1", "harvest_threshold_pu2"),
}

PER_SEED_COLUMNS = (
    "sweep_value",
    "seed",
    "episode",
    "return",
    "moving_avg",
    "epsilon",
    "mean_loss",
)
AGGREGATED_COLUMNS = ("sweep_value", "episode", "mean_return", "moving_avg", "stderr")
TRACE_COLUMNS = (
    "episode",
    "slot",
    "nu",
    "kappa",
    "power",
    "mu",
    "reward",
    "battery_before",
    "battery_after",
    "ts_energy",
    "ambient_energy",
    "violation",
)

POLICIES = ("dqn", "random")


def apply_sweep(scenario: ScenarioConfig, variable: str, value) -> ScenarioConfig:
    """Return a copy of ``scenario`` with one sweep knob replaced.
    ``harvest_threshold`` sets both primaries' thresholds."""
    canonical = SWEEP_VARIABLES.get(variable)
    if canonical is None:
        raise ConfigError(
            f"unknown sweep variable {variable!r}; choose from "
            f"{sorted(set(SWEEP_VARIABLES))}"
        )
    if canonical == "pu1_slots":
        if int(value) != value:
            raise ConfigError(f"pu1_slots sweep values must be integers, got {value}")
        return replace(scenario, pu1_slots=int(value))
    if canonical == "harvest_threshold":
        return replace(
            scenario,
            harvest_threshold_pu1=float(value),
            harvest_threshold_pu2=float(value),
        )
    if canonical == "ts_fraction":
        return replace(scenario, ts_fraction=float(value))
    return replace(scenario, battery_capacity=float(value))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a scenario, learning settings, an optional sweep
    over a single scenario knob, and the seeds to repeat each cell with.

    Cells with the same seed share identical channel, primary-power and
    ambient-energy streams across sweep values and policies (streams
    derive from the seed alone), giving variance-reduced comparisons.
    """

    scenario: ScenarioConfig = ScenarioConfig()
    agent: AgentConfig = AgentConfig()
    policy: str = "dqn"
    sweep_variable: str | None = None
    sweep_values: tuple = ()
    seeds: tuple[int, ...] = (1,)
    episodes: int | None = None  # None -> agent.episodes
    window: int = 50
    output_dir: str | None = None
    record_trace: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if len(self.seeds) < 1:
            raise ConfigError("at least one seed is required")
        if self.episodes is not None and self.episodes < 0:
            raise ConfigError(f"episodes must be >= 0, got {self.episodes}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.sweep_variable is not None:
            if len(self.sweep_values) == 0:
                raise ConfigError("a sweep needs at least one value")
            for value in self.sweep_values:
                # Raises ConfigError for values breaking scenario invariants.
                apply_sweep(self.scenario, self.sweep_variable, value)
        elif len(self.sweep_values) > 0:
            raise ConfigError("sweep_values given without a sweep_variable")

    @property
    def episode_count(self) -> int:
        return self.agent.episodes if self.episodes is None else self.episodes

    def cell_scenarios(self) -> list[tuple]:
        """(sweep_value, scenario) per sweep cell; a single ``(None,
        scenario)`` when nothing is swept."""
        if self.sweep_variable is None:
            return [(None, self.scenario)]
        return [
            (value, apply_sweep(self.scenario, self.sweep_variable, value))
            for value in self.sweep_values
        ]


def _dataclass_from_mapping(cls, mapping: dict, section: str):
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(mapping) - valid
    if unknown:
        raise ConfigError(
            f"unknown {section} key(s) {sorted(unknown)}; valid keys: {sorted(valid)}"
        )
    try:
        return cls(**mapping)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {section} configuration: {exc}") from exc


def _build_scenario(mapping: dict) -> ScenarioConfig:
    expanded: dict = {}
    for key, value in mapping.items():
        for field_name in SCENARIO_KEY_ALIASES.get(key, (key,)):
            if field_name in expanded and expanded[field_name] != value:
                raise ConfigError(
                    f"scenario key {key!r} conflicts with an earlier value for "
                    f"{field_name!r}"
                )
            expanded[field_name] = value
    return _dataclass_from_mapping(ScenarioConfig, expanded, "scenario")


def _build_agent(mapping: dict) -> AgentConfig:
    mapping = dict(mapping)
    if "hidden_dims" in mapping:
        mapping["hidden_dims"] = tuple(mapping["hidden_dims"])
    return _dataclass_from_mapping(AgentConfig, mapping, "agent")


def load_config(path) -> ExperimentSpec:
    """Parse a YAML experiment file into a validated spec.

    Recognised sections: ``scenario``, ``agent`` and ``experiment`` (with
    ``sweep: {variable, values}``, ``seeds``, ``episodes``, ``window``,
    ``policy``, ``output_dir``, ``record_trace``, ``workers``). Absent
    keys keep package defaults; an empty file yields the default spec.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        # YAML errors carry line/column marks.
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(raw).__name__}")
    unknown = set(raw) - {"scenario", "agent", "experiment"}
    if unknown:
        raise ConfigError(
            f"unknown top-level section(s) {sorted(unknown)}; "
            "valid sections: ['agent', 'experiment', 'scenario']"
        )
    scenario = _build_scenario(raw.get("scenario") or {})
    agent = _build_agent(raw.get("agent") or {})
    exp = dict(raw.get("experiment") or {})
    sweep = exp.pop("sweep", None) or {}
    if sweep and set(sweep) - {"variable", "values"}:
        raise ConfigError("sweep accepts only 'variable' and 'values'")
    sweep_variable = sweep.get("variable")
    if sweep_variable is not None:
        if sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"unknown sweep variable {sweep_variable!r}; choose from "
                f"{sorted(set(SWEEP_VARIABLES))}"
            )
        sweep_variable = SWEEP_VARIABLES[sweep_variable]
    known = {
        "seeds",
        "episodes",
        "window",
        "policy",
        "output_dir",
        "record_trace",
        "workers",
    }
    unknown = set(exp) - known
    if unknown:
        raise ConfigError(
            f"unknown experiment key(s) {sorted(unknown)}; valid keys: "
            f"{sorted(known | {'sweep'})}"
        )
    return ExperimentSpec(
        scenario=scenario,
        agent=agent,
        policy=exp.get("policy", "dqn"),
        sweep_variable=sweep_variable,
        sweep_values=tuple(sweep.get("values", ())),
        seeds=tuple(exp.get("seeds", (1,))),
        episodes=exp.get("episodes"),
        window=exp.get("window", 50),
        output_dir=exp.get("output_dir"),
        record_trace=bool(exp.get("record_trace", False)),
        workers=int(exp.get("workers", 1)),
    )


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean: element ``i`` averages elements
    ``max(0, i - window + 1) .. i`` (shorter prefixes average what
    exists)."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n == 0:
        return x.copy()
    csum = np.cumsum(x)
    out = np.empty(n)
    head = min(window, n)
    out[:head] = csum[:head] / np.arange(1, head + 1)
    if n > window:
        out[window:] = (csum[window:] - csum[:-window]) / window
    return out


@dataclass
class CellResult:
    """Curve of one (sweep value, seed) cell."""

    sweep_value: object
    seed: int
    returns: np.ndarray
    moving_avg: np.ndarray
    epsilons: np.ndarray
    mean_losses: np.ndarray
    network: QNetwork | None
    trace: list | None


@dataclass
class AggregateCurve:
    """Across-seed aggregate for one sweep value: per-episode mean return,
    its trailing moving average, and the standard error over seeds."""

    sweep_value: object
    mean_return: np.ndarray
    moving_avg: np.ndarray
    stderr: np.ndarray


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    cells: list[CellResult]
    aggregates: list[AggregateCurve]
    output_files: list[Path]

    def cell(self, sweep_value, seed) -> CellResult:
        for c in self.cells:
            if c.sweep_value == sweep_value and c.seed == seed:
                return c
        raise KeyError((sweep_value, seed))

    def aggregate(self, sweep_value) -> AggregateCurve:
        for a in self.aggregates:
            if a.sweep_value == sweep_value:
                return a
        raise KeyError(sweep_value)


def run_single(
    scenario: ScenarioConfig,
    agent_config: AgentConfig,
    policy: str,
    seed: int,
    episodes: int,
    record_trace: bool = False,
) -> tuple[TrainResult, CognitiveRadioEnv]:
    """Train once (or roll out the random baseline once); deterministic
    per seed."""
    streams = derive_streams(seed)
    env = CognitiveRadioEnv(scenario, streams, record_trace=record_trace)
    if policy == "random":
        result = evaluate_policy(
            RandomPolicy(env.action_count, streams["exploration"]), env, episodes
        )
    elif policy == "dqn":
        agent = DQNAgent(
            env,
            agent_config,
            streams,
            obs_transform=make_observation_normalizer(scenario),
        )
        result = agent.train(episodes)
    else:
        raise ConfigError(f"policy must be one of {POLICIES}, got {policy!r}")
    return result, env


def _run_cell(args) -> CellResult:
    (sweep_value, scenario, agent_config, policy, seed, episodes, window, trace) = args
    result, env = run_single(scenario, agent_config, policy, seed, episodes, trace)
    return CellResult(
        sweep_value=sweep_value,
        seed=seed,
        returns=result.returns,
        moving_avg=moving_average(result.returns, window),
        epsilons=result.epsilons,
        mean_losses=result.mean_losses,
        network=result.network,
        trace=list(env.trace) if trace else None,
    )


def aggregate_cells(cells: list[CellResult], window: int) -> AggregateCurve:
    """Across-seed mean/stderr of per-episode returns for one sweep value
    (stderr is 0 with a single seed)."""
    matrix = np.vstack([c.returns for c in cells])
    mean = matrix.mean(axis=0)
    if matrix.shape[0] > 1:
        stderr = matrix.std(axis=0, ddof=1) / math.sqrt(matrix.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return AggregateCurve(
        sweep_value=cells[0].sweep_value,
        mean_return=mean,
        moving_avg=moving_average(mean, window),
        stderr=stderr,
    )


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every (sweep value, seed) cell of ``spec``, aggregate across
    seeds, and -- when ``output_dir`` is set -- write the CSV artifacts
    and final checkpoints.

    A failing cell aborts the experiment with a ``RuntimeError``; cells
    already finished are still written, alongside a ``FAILED.txt`` marker
    describing the broken cell.
    """
    episodes = spec.episode_count
    tasks = [
        (value, scenario, spec.agent, spec.policy, seed, episodes, spec.window,
         spec.record_trace)
        for value, scenario in spec.cell_scenarios()
        for seed in spec.seeds
    ]
    cells: list[CellResult] = []
    try:
        if spec.workers > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                futures = [pool.submit(_run_cell, task) for task in tasks]
                for future in futures:
                    cells.append(future.result())
        else:
            for task in tasks:
                cells.append(_run_cell(task))
    except Exception as exc:
        if spec.output_dir is not None:
            partial = ExperimentResult(spec, cells, [], [])
            emit_csv(partial, spec.output_dir)
            marker = Path(spec.output_dir) / "FAILED.txt"
            marker.write_text(
                f"experiment aborted after {len(cells)}/{len(tasks)} cells\n"
                f"{traceback.format_exc()}"
            )
        raise RuntimeError(
            f"cell {len(cells)} of {len(tasks)} failed: {exc}"
        ) from exc

    aggregates = []
    for value, _ in spec.cell_scenarios():
        group = [c for c in cells if c.sweep_value == value]
        aggregates.append(aggregate_cells(group, spec.window))
    result = ExperimentResult(spec, cells, aggregates, [])
    if spec.output_dir is not None:
        result.output_files = emit_csv(result, spec.output_dir)
    return result


def _fmt(value) -> str:
    """Stable, round-trippable cell formatting (shortest float repr)."""
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_sweep_value(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def _header_lines(spec: ExperimentSpec) -> list[str]:
    scenario = json.dumps(dataclasses.asdict(spec.scenario), sort_keys=True)
    agent = json.dumps(dataclasses.asdict(spec.agent), sort_keys=True)
    values = list(spec.sweep_values) if spec.sweep_variable else []
    return [
        "# ehcrn run v1",
        f"# root_seeds={list(spec.seeds)}",
        f"# policy={spec.policy} episodes={spec.episode_count} "
        f"window={spec.window} sweep={spec.sweep_variable} values={values}",
        f"# scenario={scenario}",
        f"# agent={agent}",
    ]


def _cell_tag(spec: ExperimentSpec, cell: CellResult) -> str:
    if spec.sweep_variable is None:
        return f"seed{cell.seed}"
    return f"{spec.sweep_variable}_{cell.sweep_value}_seed{cell.seed}"


def emit_csv(result: ExperimentResult, output_dir) -> list[Path]:
    """Write ``per_seed.csv``, ``aggregated.csv``, final checkpoints and
    (when traced) per-cell ``trace_*.csv``; byte-identical across repeated
    runs of the same spec."""
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    header = _header_lines(spec)
    written: list[Path] = []

    per_seed = outdir / "per_seed.csv"
    lines = list(header)
    lines.append(",".join(PER_SEED_COLUMNS))
    for cell in result.cells:
        for ep in range(len(cell.returns)):
            lines.append(
                ",".join(
                    (
                        _fmt(cell.sweep_value),
                        str(cell.seed),
                        str(ep + 1),
                        _fmt(float(cell.returns[ep])),
                        _fmt(float(cell.moving_avg[ep])),
                        _fmt(float(cell.epsilons[ep])),
                        _fmt(float(cell.mean_losses[ep])),
                    )
                )
            )
    per_seed.write_text("\n".join(lines) + "\n")
    written.append(per_seed)

    aggregated = outdir / "aggregated.csv"
    lines = list(header)
    lines.append(",".join(AGGREGATED_COLUMNS))
    for agg in result.aggregates:
        for ep in range(len(agg.mean_return)):
            lines.append(
                ",".join(
                    (
                        _fmt(agg.sweep_value),
                        str(ep + 1),
                        _fmt(float(agg.mean_return[ep])),
                        _fmt(float(agg.moving_avg[ep])),
                        _fmt(float(agg.stderr[ep])),
                    )
                )
            )
    aggregated.write_text("\n".join(lines) + "\n")
    written.append(aggregated)

    for cell in result.cells:
        if cell.trace is not None:
            trace_path = outdir / f"trace_{_cell_tag(spec, cell)}.csv"
            lines = list(header)
            lines.append(",".join(TRACE_COLUMNS))
            for row in cell.trace:
                lines.append(",".join(_fmt(v) for v in row))
            trace_path.write_text("\n".join(lines) + "\n")
            written.append(trace_path)
        if cell.network is not None:
            ckpt = outdir / f"checkpoint_{_cell_tag(spec, cell)}.npz"
            save_checkpoint(cell.network, ckpt)
            written.append(ckpt)
    return written


def read_per_seed_csv(path) -> list[dict]:
    """Parse a ``per_seed.csv`` back into typed row dicts (exact floats)."""
    rows = []
    with open(path) as fh:
        columns = None
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if columns is None:
                columns = line.split(",")
                continue
            parts = line.split(",")
            row = dict(zip(columns, parts))
            row["sweep_value"] = _parse_sweep_value(row["sweep_value"])
            row["seed"] = int(row["seed"])
            row["episode"] = int(row["episode"])
            for key in ("return", "moving_avg", "epsilon", "mean_loss"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


def read_aggregated_csv(path) -> list[dict]:
    """Parse an ``aggregated.csv`` back into typed row dicts."""
    rows = []
    with open(path) as fh:
        columns = None
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if columns is None:
                columns = line.split(",")
                continue
            parts = line.split(",")
            row = dict(zip(columns, parts))
            row["sweep_value"] = _parse_sweep_value(row["sweep_value"])
            row["episode"] = int(row["episode"])
            for key in ("mean_return", "moving_avg", "stderr"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


def summarize(result: ExperimentResult, final_window: int = 1000) -> list[dict]:
    """Final-window summary per sweep value: mean return over the last
    ``final_window`` episodes of each seed, averaged across seeds."""
    summary = []
    for agg in result.aggregates:
        group = [c for c in result.cells if c.sweep_value == agg.sweep_value]
        finals = np.array([c.returns[-final_window:].mean() for c in group])
        summary.append(
            {
                "sweep_value": agg.sweep_value,
                "seeds": len(group),
                "episodes": len(agg.mean_return),
                "final_mean": float(finals.mean()),
                "final_stderr": float(
                    finals.std(ddof=1) / math.sqrt(len(finals))
                )
                if len(finals) > 1
                else 0.0,
            }
        )
    return summary


def report(output_dir, final_window: int = 1000, window: int = 50) -> list[dict]:
    """Recompute aggregates from an output directory's ``per_seed.csv``,
    rewrite ``aggregated.csv`` to match, and return final-window summary
    rows per sweep value."""
    outdir = Path(output_dir)
    rows = read_per_seed_csv(outdir / "per_seed.csv")
    if not rows:
        raise ConfigError(f"{outdir / 'per_seed.csv'} holds no data rows")
    by_cell: dict[tuple, list] = {}
    for row in rows:
        by_cell.setdefault((row["sweep_value"], row["seed"]), []).append(row)
    cells = []
    for (value, seed), cell_rows in by_cell.items():
        cell_rows.sort(key=lambda r: r["episode"])
        returns = np.array([r["return"] for r in cell_rows])
        cells.append(
            CellResult(
                sweep_value=value,
                seed=seed,
                returns=returns,
                moving_avg=moving_average(returns, window),
                epsilons=np.array([r["epsilon"] for r in cell_rows]),
                mean_losses=np.array([r["mean_loss"] for r in cell_rows]),
                network=None,
                trace=None,
            )
        )
    values = list(dict.fromkeys(c.sweep_value for c in cells))
    aggregates = [
        aggregate_cells([c for c in cells if c.sweep_value == value], window)
        for value in values
    ]
    summary = []
    for agg in aggregates:
        group = [c for c in cells if c.sweep_value == agg.sweep_value]
        finals = np.array([c.returns[-final_window:].mean() for c in group])
        summary.append(
            {
                "sweep_value": agg.sweep_value,
                "seeds": len(group),
                "episodes": len(agg.mean_return),
                "final_mean": float(finals.mean()),
                "final_stderr": float(finals.std(ddof=1) / math.sqrt(len(finals)))
                if len(finals) > 1
                else 0.0,
            }
        )
    return summary


_PRESET_DIR = Path(__file__).parent / "presets"

#: The named experiment recipes, each a tuple of bundled config files.
PRESETS = {
    "convergence-A": ("convergence_a.yaml",),
    "vs-random": ("vs_random_dqn.yaml", "vs_random_baseline.yaml"),
    "lambda-sweep": ("lambda_sweep.yaml",),
    "capacity-rho-sweep": ("capacity_sweep_rho04.yaml", "capacity_sweep_rho08.yaml"),
}


def preset_specs(
    name: str,
    seeds: tuple[int, ...] | None = None,
    episodes: int | None = None,
    output_dir=None,
    workers: int | None = None,
) -> list[ExperimentSpec]:
    """Load one named recipe as ready-to-run specs; optional overrides.
    With ``output_dir`` set, each spec writes into a subdirectory named
    after its config file."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        )
    specs = []
    for filename in PRESETS[name]:
        spec = load_config(_PRESET_DIR / filename)
        overrides: dict = {}
        if seeds is not None:
            overrides["seeds"] = tuple(seeds)
        if episodes is not None:
            overrides["episodes"] = episodes
        if workers is not None:
            overrides["workers"] = workers
        if output_dir is not None:
            overrides["output_dir"] = str(Path(output_dir) / Path(filename).stem)
        if overrides:
            spec = replace(spec, **overrides)
        specs.append(spec)
    return specs
