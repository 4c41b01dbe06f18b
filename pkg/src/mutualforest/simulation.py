"""Simulation scenarios, evaluation metrics and replicated experiments.

Four scenarios are provided:

* ``null-a``: nine nominal variables with 2..20 categories plus one
  standard-normal variable, outcome independent of all of them.
* ``null-b``: ten genotype variables with minor allele frequencies 0.05
  to 0.50, outcome independent.
* ``correlation``: a regression outcome driven by six standard-normal
  variables, with blocks of correlated companions at r = 0.9 / 0.6 / 0.3
  and independent filler variables.
* ``null-binary``: independent standard-normal predictors with an
  independent balanced binary outcome, for type-I error estimation.

Replicate ``r`` of an experiment is seeded by (base_seed, r), so runs are
deterministic and replicates independent.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .data_model import (
    Classification,
    Dataset,
    ForestParams,
    Outcome,
    Regression,
    Survival,
    categorical,
    continuous,
    genotype,
)
from .forest import predict, train_forest
from .importance import air, impurity_importance, mir, surrogate_minimal_depth
from .pipeline import AnalysisConfig, analyze_dataset
from .relations import compute_mfi
from .surrogates import mean_adjusted_agreement

NULL_A_CATEGORIES = (2, 3, 4, 5, 6, 7, 8, 10, 20)
NULL_B_MAFS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)

SURVIVAL_EVENT_RATE = 0.5
SURVIVAL_CENSOR_RATE = 0.1

# anchor column, target correlation, group label
CORRELATED_GROUPS = (
    (0, 0.9, "cX1"),
    (1, 0.6, "cX2"),
    (2, 0.3, "cX3"),
    (6, 0.9, "cX7"),
    (7, 0.6, "cX8"),
    (8, 0.3, "cX9"),
)
GROUP_SIZE = 10
N_BASE = 9
N_CORRELATED = len(CORRELATED_GROUPS) * GROUP_SIZE


@dataclass
class ScenarioSpec:
    scenario: str  # null-a | null-b | correlation | null-binary
    n: int = 100
    p_total: int = 0
    outcome_type: str = "classification"
    replicates: int = 100
    base_seed: int = 0
    n_cases: int = 50
    n_controls: int = 50


@dataclass
class SimTruth:
    relevant: Set[int]
    causal: Set[int]
    groups: Dict[str, List[int]]
    target_corr: Dict[int, float] = field(default_factory=dict)


@dataclass
class MetricsReport:
    scenario: str
    replicates: int
    selection_frequency: Dict[str, Dict[str, float]] = field(default_factory=dict)
    group_frequency: Dict[str, Dict[str, float]] = field(default_factory=dict)
    jaccard_stability: Dict[str, float] = field(default_factory=dict)
    empirical_power: Dict[str, float] = field(default_factory=dict)
    fpr: Dict[str, float] = field(default_factory=dict)
    type1_error: Dict[str, float] = field(default_factory=dict)
    medians: Dict[str, object] = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    ntree: int = 100
    mtry: Optional[int] = None  # None: round(p^(3/4)) of the original feature count
    min_node_size: int = 1
    s: int = 3
    alpha: float = 0.01
    null_method: str = "auto"
    repetitions: int = 100
    min_nonpositive: int = 100
    air_min_nonpositive: int = 100
    threads: int = 1
    noise_sd: float = 0.2


@dataclass
class ExperimentResult:
    metrics: MetricsReport
    records: List[dict]  # long format: replicate, item, method, value, p, selected
    per_replicate: List[dict]


# ---------------------------------------------------------------------------
# generators


def _null_outcome(n: int, outcome_type: str, rng: np.random.Generator) -> Outcome:
    if outcome_type == "classification":
        return Classification(rng.integers(0, 2, size=n), 2)
    if outcome_type == "regression":
        return Regression(rng.standard_normal(n))
    if outcome_type == "survival":
        event = rng.exponential(scale=1.0 / SURVIVAL_EVENT_RATE, size=n)
        censor = rng.exponential(scale=1.0 / SURVIVAL_CENSOR_RATE, size=n)
        return Survival(np.minimum(event, censor), (event <= censor).astype(np.int64))
    raise ValueError(f"unknown outcome type {outcome_type!r}")


def simulate_null_a(n: int, outcome_type: str, rng: np.random.Generator) -> Dataset:
    """Nominal variables with growing category counts, outcome-independent."""
    cols = [rng.integers(0, k, size=n).astype(np.float64) for k in NULL_A_CATEGORIES]
    cols.append(rng.standard_normal(n))
    kinds = [categorical(k) for k in NULL_A_CATEGORIES] + [continuous()]
    names = [f"X{i + 1}" for i in range(len(cols))]
    return Dataset(np.column_stack(cols), kinds, names, _null_outcome(n, outcome_type, rng))


def simulate_null_b(n: int, outcome_type: str, rng: np.random.Generator) -> Dataset:
    """Genotype variables with growing minor allele frequency, outcome-independent."""
    cols = [rng.binomial(2, maf, size=n).astype(np.float64) for maf in NULL_B_MAFS]
    kinds = [genotype() for _ in NULL_B_MAFS]
    names = [f"X{i + 1}" for i in range(len(cols))]
    return Dataset(np.column_stack(cols), kinds, names, _null_outcome(n, outcome_type, rng))


def simulate_correlation_study(
    n: int, p_total: int, rng: np.random.Generator, noise_sd: float = 0.2
) -> Tuple[Dataset, SimTruth]:
    """Regression outcome on six causal variables plus correlated companions."""
    if p_total < N_BASE + N_CORRELATED:
        raise ValueError(f"p_total must be at least {N_BASE + N_CORRELATED}, got {p_total}")
    base = rng.standard_normal((n, N_BASE))
    cols = [base]
    names = [f"X{i + 1}" for i in range(N_BASE)]
    groups: Dict[str, List[int]] = {f"X{i + 1}": [i] for i in range(N_BASE)}
    target_corr: Dict[int, float] = {}
    col_index = N_BASE
    for anchor, r, label in CORRELATED_GROUPS:
        noise = rng.standard_normal((n, GROUP_SIZE))
        block = r * base[:, [anchor]] + np.sqrt(1 - r * r) * noise
        cols.append(block)
        groups[label] = list(range(col_index, col_index + GROUP_SIZE))
        for k in range(GROUP_SIZE):
            names.append(f"{label}_{k + 1}")
            target_corr[col_index + k] = r
        col_index += GROUP_SIZE
    n_filler = p_total - col_index
    filler = rng.standard_normal((n, n_filler))
    cols.append(filler)
    groups["ncV"] = list(range(col_index, col_index + n_filler))
    names.extend(f"ncV_{k + 1}" for k in range(n_filler))
    x = np.hstack(cols)
    y = base[:, :6].sum(axis=1) + noise_sd * rng.standard_normal(n)
    causal = set(range(6))
    relevant = causal | set(groups["cX1"]) | set(groups["cX2"]) | set(groups["cX3"])
    truth = SimTruth(relevant, causal, groups, target_corr)
    dataset = Dataset(x, [continuous()] * p_total, names, Regression(y))
    return dataset, truth


def simulate_null_binary(
    n_cases: int, n_controls: int, p: int, rng: np.random.Generator
) -> Tuple[Dataset, SimTruth]:
    """Independent predictors with an independent binary outcome."""
    if n_cases < 1 or n_controls < 1:
        raise ValueError("need at least one case and one control")
    n = n_cases + n_controls
    x = rng.standard_normal((n, p))
    labels = np.concatenate([np.zeros(n_controls, dtype=np.int64), np.ones(n_cases, dtype=np.int64)])
    names = [f"X{j + 1}" for j in range(p)]
    truth = SimTruth(set(), set(), {"all": list(range(p))})
    return Dataset(x, [continuous()] * p, names, Classification(labels, 2)), truth


# ---------------------------------------------------------------------------
# metrics


def jaccard(set_a: Set[int], set_b: Set[int]) -> float:
    """Intersection over union; 1.0 when both sets are empty."""
    set_a, set_b = set(set_a), set(set_b)
    if not set_a and not set_b:
        return 1.0
    return len(set_a & set_b) / len(set_a | set_b)


def empirical_power(selections: Sequence[Set[int]], members: Sequence[int]) -> float:
    """Mean selection indicator over replicates and group members."""
    if not selections:
        raise ValueError("need at least one replicate")
    if not members:
        return 0.0
    hits = sum(int(m in sel) for sel in selections for m in members)
    return hits / (len(selections) * len(members))


def fpr(
    selected: Set[int],
    truth: SimTruth,
    x: np.ndarray,
    correlation_guard: float = 0.2,
) -> float:
    """Selected fraction of features neither causal nor correlated to a causal one."""
    p = x.shape[1]
    causal = sorted(truth.causal)
    null_mask = np.ones(p, dtype=bool)
    if causal:
        corr = np.corrcoef(x, rowvar=False)
        max_corr = np.abs(corr[:, causal]).max(axis=1)
        null_mask &= max_corr < correlation_guard
        null_mask[causal] = False
    n_null = int(null_mask.sum())
    if n_null == 0:
        raise ValueError("no null features left after applying the correlation guard")
    return sum(1 for j in selected if null_mask[j]) / n_null


# ---------------------------------------------------------------------------
# experiment runner


def _resolve_params(config: ExperimentConfig, p: int, seed: int) -> ForestParams:
    mtry = config.mtry if config.mtry is not None else int(round(p**0.75))
    return ForestParams(
        ntree=config.ntree,
        mtry=mtry,
        min_node_size=config.min_node_size,
        s=config.s,
        seed=seed,
        threads=1,
    )


def _replicate_seeds(base_seed: int, r: int) -> Tuple[np.random.Generator, np.random.Generator, int, int]:
    """Data rng, pipeline rng and two forest seeds for replicate r."""
    mask = 0xFFFFFFFFFFFFFFFF
    data_rng = np.random.default_rng(np.random.SeedSequence((base_seed & mask, r, 0)))
    pipe_rng = np.random.default_rng(np.random.SeedSequence((base_seed & mask, r, 1)))
    plain_seed = int(np.random.SeedSequence((base_seed & mask, r, 2)).generate_state(1)[0])
    aug_seed = int(np.random.SeedSequence((base_seed & mask, r, 3)).generate_state(1)[0])
    return data_rng, pipe_rng, plain_seed, aug_seed


def _bias_replicate(args) -> dict:
    spec, config, r = args
    data_rng, pipe_rng, plain_seed, aug_seed = _replicate_seeds(spec.base_seed, r)
    if spec.scenario == "null-a":
        dataset = simulate_null_a(spec.n, spec.outcome_type, data_rng)
    else:
        dataset = simulate_null_b(spec.n, spec.outcome_type, data_rng)
    p = dataset.p
    plain = train_forest(dataset, _resolve_params(config, p, plain_seed))
    raw_m = mean_adjusted_agreement(plain, p).m
    smd = surrogate_minimal_depth(plain, p)
    mfi_res = compute_mfi(dataset, _resolve_params(config, p, aug_seed), pipe_rng)
    imp = impurity_importance(mfi_res.forest, 2 * p)
    air_values = air(imp, p)
    mir_values = mir(air_values, mfi_res.mfi)
    return {
        "replicate": r,
        "raw_m": raw_m,
        "mfi": mfi_res.mfi.values,
        "air": air_values,
        "mir": mir_values,
        "smd": smd,
        "impurity_x": imp[:p],
        "names": dataset.names,
    }


def _correlation_replicate(args) -> dict:
    spec, config, r = args
    data_rng, pipe_rng, _, aug_seed = _replicate_seeds(spec.base_seed, r)
    dataset, truth = simulate_correlation_study(spec.n, spec.p_total, data_rng, config.noise_sd)
    analysis_cfg = AnalysisConfig(
        alpha=config.alpha,
        null_method=config.null_method,
        repetitions=config.repetitions,
        min_nonpositive=config.min_nonpositive,
        air_min_nonpositive=config.air_min_nonpositive,
        compute_smd=False,
    )
    result = analyze_dataset(dataset, _resolve_params(config, dataset.p, aug_seed), analysis_cfg, pipe_rng)
    mir_sel = set(int(j) for j in result.mir_selected.selected)
    air_sel = (
        set(int(j) for j in result.air_selected.selected) if result.air_selected is not None else set()
    )
    return {
        "replicate": r,
        "truth": truth,
        "x": dataset.x,
        "names": dataset.names,
        "mir_selected": mir_sel,
        "air_selected": air_sel,
        "p_mir": result.report.p_mir,
        "p_air": result.report.p_air,
        "air": result.report.air,
        "mir": result.report.mir,
    }


def _null_binary_replicate(args) -> dict:
    spec, config, r = args
    data_rng, pipe_rng, _, aug_seed = _replicate_seeds(spec.base_seed, r)
    dataset, truth = simulate_null_binary(spec.n_cases, spec.n_controls, spec.p_total, data_rng)
    analysis_cfg = AnalysisConfig(
        alpha=config.alpha,
        null_method=config.null_method,
        repetitions=config.repetitions,
        min_nonpositive=config.min_nonpositive,
        air_min_nonpositive=config.air_min_nonpositive,
        compute_smd=False,
    )
    result = analyze_dataset(dataset, _resolve_params(config, dataset.p, aug_seed), analysis_cfg, pipe_rng)
    mir_sel = set(int(j) for j in result.mir_selected.selected)
    air_sel = (
        set(int(j) for j in result.air_selected.selected) if result.air_selected is not None else set()
    )
    return {
        "replicate": r,
        "mir_selected": mir_sel,
        "air_selected": air_sel,
        "p": dataset.p,
        "names": dataset.names,
    }


_REPLICATE_FN = {
    "null-a": _bias_replicate,
    "null-b": _bias_replicate,
    "correlation": _correlation_replicate,
    "null-binary": _null_binary_replicate,
}


def _run_replicates(spec: ScenarioSpec, config: ExperimentConfig) -> List[dict]:
    fn = _REPLICATE_FN.get(spec.scenario)
    if fn is None:
        raise ValueError(f"unknown scenario {spec.scenario!r}")
    tasks = [(spec, config, r) for r in range(spec.replicates)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _bias_metrics(spec: ScenarioSpec, results: List[dict]) -> Tuple[MetricsReport, List[dict]]:
    names = results[0]["names"]
    metrics = MetricsReport(spec.scenario, spec.replicates)
    metrics.medians = {
        "raw_m": np.median(np.stack([r["raw_m"] for r in results]), axis=0),
        "mfi": np.median(np.stack([r["mfi"] for r in results]), axis=0),
        "air": np.median(np.stack([r["air"] for r in results]), axis=0),
        "mir": np.median(np.stack([r["mir"] for r in results]), axis=0),
        "smd": np.median(np.stack([r["smd"] for r in results]), axis=0),
        "impurity_x": np.median(np.stack([r["impurity_x"] for r in results]), axis=0),
        "names": names,
    }
    records = []
    for res in results:
        for i, name in enumerate(names):
            for method in ("air", "mir", "smd", "impurity_x"):
                records.append(
                    {"replicate": res["replicate"], "item": name, "method": method.upper(),
                     "value": float(res[method][i]), "p": "", "selected": ""}
                )
            for j, partner in enumerate(names):
                if i == j:
                    continue
                records.append(
                    {"replicate": res["replicate"], "item": f"{name}~{partner}", "method": "M",
                     "value": float(res["raw_m"][i, j]), "p": "", "selected": ""}
                )
                records.append(
                    {"replicate": res["replicate"], "item": f"{name}~{partner}", "method": "MFI",
                     "value": float(res["mfi"][i, j]), "p": "", "selected": ""}
                )
    return metrics, records


def _correlation_metrics(spec: ScenarioSpec, results: List[dict]) -> Tuple[MetricsReport, List[dict]]:
    names = results[0]["names"]
    truth: SimTruth = results[0]["truth"]
    metrics = MetricsReport(spec.scenario, spec.replicates)
    records = []
    for method in ("mir", "air"):
        selections = [res[f"{method}_selected"] for res in results]
        freq = {
            name: float(np.mean([int(j in sel) for sel in selections]))
            for j, name in enumerate(names)
        }
        metrics.selection_frequency[method] = freq
        metrics.group_frequency[method] = {
            label: float(np.mean([freq[names[j]] for j in members]))
            for label, members in truth.groups.items()
        }
        pairs = [
            jaccard(selections[2 * k], selections[2 * k + 1])
            for k in range(len(selections) // 2)
        ]
        if pairs:
            metrics.jaccard_stability[method] = float(np.mean(pairs))
        metrics.empirical_power[method] = empirical_power(selections, sorted(truth.relevant))
        rates = [
            fpr(res[f"{method}_selected"], res["truth"], res["x"]) for res in results
        ]
        metrics.fpr[method] = float(np.mean(rates))
    for res in results:
        for j, name in enumerate(names):
            for method in ("mir", "air"):
                pvals = res[f"p_{method}"]
                records.append(
                    {"replicate": res["replicate"], "item": name, "method": method.upper(),
                     "value": float(res[method][j]),
                     "p": float(pvals[j]) if pvals is not None else "",
                     "selected": int(j in res[f"{method}_selected"])}
                )
    return metrics, records


def _null_binary_metrics(spec: ScenarioSpec, results: List[dict]) -> Tuple[MetricsReport, List[dict]]:
    metrics = MetricsReport(spec.scenario, spec.replicates)
    records = []
    for method in ("mir", "air"):
        rates = [len(res[f"{method}_selected"]) / res["p"] for res in results]
        metrics.type1_error[method] = float(np.mean(rates))
        for res, rate in zip(results, rates):
            records.append(
                {"replicate": res["replicate"], "item": "all", "method": method.upper(),
                 "value": rate, "p": "", "selected": len(res[f"{method}_selected"])}
            )
    return metrics, records


def run_experiment(spec: ScenarioSpec, config: ExperimentConfig) -> ExperimentResult:
    """Simulate, analyze and aggregate ``spec.replicates`` replicates."""
    results = _run_replicates(spec, config)
    if spec.scenario in ("null-a", "null-b"):
        metrics, records = _bias_metrics(spec, results)
    elif spec.scenario == "correlation":
        metrics, records = _correlation_metrics(spec, results)
    else:
        metrics, records = _null_binary_metrics(spec, results)
    return ExperimentResult(metrics, records, results)


def paired_classification_error(
    train_dataset: Dataset,
    test_dataset: Dataset,
    selected: Sequence[int],
    params: ForestParams,
) -> float:
    """Train on the selected features of one dataset, score on its pair."""
    selected = sorted(int(j) for j in selected)
    if not selected:
        raise ValueError("cannot evaluate an empty selection")
    sub_train = Dataset(
        train_dataset.x[:, selected],
        [train_dataset.kinds[j] for j in selected],
        [train_dataset.names[j] for j in selected],
        train_dataset.outcome,
    )
    params = replace(params, mtry=min(params.mtry, len(selected)))
    forest = train_forest(sub_train, params)
    pred = predict(forest, test_dataset.x[:, selected])
    labels = test_dataset.outcome.labels
    return float((pred != labels).mean())
