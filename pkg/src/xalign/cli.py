"""Experiment runner: every pipeline as a replayable command.

Each command resolves its configuration (INI file sections overridden by
flags), writes CSV tables and figures into a run directory, and records a
manifest sufficient to replay the run bit-for-bit.  ``replay`` re-executes
a manifest and can verify that every delimited artifact hashes identically.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import casestudy as casestudy_mod
from . import datagen
from . import lime as lime_mod
from . import metrics, mitigate, models, plots, runio, shapley, theorylab
from .rng import derive_seed, substream

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DATA_ERRORS = (FileNotFoundError, casestudy_mod.CaseDataError)
_NUMERIC_ERRORS = (
    models.TrainingBandError,
    datagen.StructuralFaultError,
    lime_mod.SingularSystemError,
    theorylab.PowerIterationError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration plumbing
# ---------------------------------------------------------------------------


def _load_ini(path: str | None) -> dict[str, dict[str, str]]:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _coerce(value: str, like) -> object:
    if isinstance(like, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def resolve_config(
    defaults: dict, file_section: dict[str, str], overrides: dict
) -> dict:
    """defaults <- config file section <- non-None command-line flags."""
    cfg = dict(defaults)
    for key, raw in file_section.items():
        if key not in cfg:
            raise ConfigError(f"unknown config field {key!r}")
        cfg[key] = _coerce(raw, cfg[key]) if cfg[key] is not None else raw
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if str(v).strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if str(v).strip()]


def _make_run(args_out, base_cmd: str, config: dict, seed: int) -> runio.RunDir:
    out = Path(args_out) if args_out else runio.default_run_dir("runs", base_cmd)
    return runio.RunDir(out, base_cmd, config, seed)


def _component_seeds(master_seed: int, labels: list[str]) -> dict[str, int]:
    """Derived per-component seeds, recorded for the manifest."""
    return {label: derive_seed(master_seed, label) for label in labels}


def _log(run: runio.RunDir, lines: list[str]) -> None:
    (run.path / "log").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# gen / train / explain / eval
# ---------------------------------------------------------------------------

GEN_DEFAULTS = {
    "generator": "loan_correlated",
    "rows": 5000,
    "seed": 0,
    "d": 10,
    "independent": False,
}


def run_gen(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    run = _make_run(out, "gen", config, config["seed"])
    ds, gt = datagen.generate(
        config["generator"],
        config["rows"],
        config["seed"],
        d=config.get("d", 10),
        independent=config.get("independent", False),
    )
    datagen.save_dataset(ds, run.path / "dataset.csv", run.path / "dataset_manifest.json")
    run.attach("dataset.csv")
    run.attach("dataset_manifest.json")
    _log(run, [f"generated {config['generator']} rows={config['rows']} "
               f"columns={ds.n_features}"])
    run.finalize({"component_seeds": _component_seeds(
        config["seed"], ["feature", "label", "split"])})
    return run


TRAIN_DEFAULTS = {
    "dataset": "",
    "hidden_nodes": 100,
    "seed": 0,
    "epochs": 150,
    "target_auc": 0.0,  # 0 disables band targeting
    "tolerance": 0.02,
    "max_epochs": 400,
    "lr": models.DEFAULT_LEARNING_RATE,
    "batch_size": models.DEFAULT_BATCH_SIZE,
}


def _load_dataset_dir(path_str: str) -> datagen.Dataset:
    p = Path(path_str)
    if p.is_dir():
        return datagen.load_dataset(p / "dataset.csv", p / "dataset_manifest.json")
    return datagen.load_dataset(p, p.with_name(p.stem + "_manifest.json"))


def run_train(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    if not config["dataset"]:
        raise ConfigError("train requires 'dataset' (a gen run directory)")
    run = _make_run(out, "train", config, config["seed"])
    ds = _load_dataset_dir(config["dataset"])
    if config["target_auc"]:
        model = models.train_to_target(
            ds,
            config["hidden_nodes"],
            models.PerformanceTarget(
                config["target_auc"], config["tolerance"], config["max_epochs"]
            ),
            seed=config["seed"],
            lr=config["lr"],
            batch_size=config["batch_size"],
        )
    else:
        model = models.train(
            ds,
            config["hidden_nodes"],
            seed=config["seed"],
            epochs=config["epochs"],
            lr=config["lr"],
            batch_size=config["batch_size"],
        )
    models.save_model(model, run.path / "model_weights.npz", run.path / "model_meta.json")
    run.attach("model_meta.json")
    log_rows = [
        [entry.get("epoch"), entry.get("train_auc", ""), entry.get("test_auc", "")]
        for entry in model.training_log
    ]
    run.write_csv(
        "training_log.csv", ["epoch", "train_auc", "test_auc"], log_rows,
        comment="per-epoch checkpoint trajectory",
    )
    scores = model.predict_proba(ds.test_X)
    final = [
        ["test_auc", models.auc(scores, ds.test_y)],
        ["test_accuracy", models.accuracy(scores, ds.test_y)],
    ]
    run.write_csv("performance.csv", ["metric", "value"], final)
    _log(run, [f"trained hidden={config['hidden_nodes']} seed={config['seed']}"])
    run.finalize({"component_seeds": _component_seeds(
        config["seed"], ["init", "shuffle"])})
    return run


EXPLAIN_DEFAULTS = {
    "dataset": "",
    "model": "",
    "explainer": "lime",  # lime | lime-averaged | shap | shap-normalized | random
    "m_instances": 100,
    "seed": 0,
    "nu": 0.0,  # 0 means the 0.75*sqrt(D) default
    "n_samples": lime_mod.DEFAULT_N_SAMPLES,
    "ridge_lambda": lime_mod.DEFAULT_RIDGE_LAMBDA,
    "discretize": False,
    "n_seeds": 10,
    "method": "auto",
    "n_permutations": 64,
}


def _pick_instances(ds: datagen.Dataset, m: int, seed: int) -> tuple[np.ndarray, list[int]]:
    m = min(m, len(ds.test_idx))
    pick = np.sort(substream(seed, "instances").choice(len(ds.test_idx), m, replace=False))
    return ds.test_X[pick], [int(ds.test_idx[i]) for i in pick]


def run_explain(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    if not config["dataset"] or not config["model"]:
        raise ConfigError("explain requires 'dataset' and 'model' run directories")
    run = _make_run(out, "explain", config, config["seed"])
    ds = _load_dataset_dir(config["dataset"])
    model_dir = Path(config["model"])
    model = models.load_model(
        model_dir / "model_weights.npz", model_dir / "model_meta.json"
    )
    instances, instance_ids = _pick_instances(ds, config["m_instances"], config["seed"])
    background = ds.train_X.mean(axis=0)
    kind = config["explainer"]
    mask = None
    seeds = []
    rows = []
    for i, xi in enumerate(instances):
        inst_seed = derive_seed(config["seed"], "explain", i)
        seeds.append(inst_seed)
        if kind in ("lime", "lime-averaged"):
            lcfg = lime_mod.LimeConfig(
                nu=config["nu"] or None,
                n_samples=config["n_samples"],
                ridge_lambda=config["ridge_lambda"],
                discretize=config["discretize"],
                quartiles=lime_mod.training_quartiles(ds.train_X)
                if config["discretize"]
                else None,
                seed=inst_seed,
            )
            if kind == "lime":
                rows.append(lime_mod.explain(model.predict_proba, xi, lcfg).coefficients)
            else:
                rows.append(
                    lime_mod.explain_averaged(
                        model.predict_proba, xi, lcfg, config["n_seeds"]
                    ).coefficients
                )
        elif kind in ("shap", "shap-normalized"):
            scfg = shapley.ShapConfig(
                method=config["method"],
                background=background,
                n_permutations=config["n_permutations"],
                seed=inst_seed,
            )
            expl = shapley.explain(model.predict_proba, xi, scfg)
            if kind == "shap":
                rows.append(expl.phi)
            else:
                norm = shapley.normalize_shap(expl, xi, background)
                rows.append(np.nan_to_num(norm.values, nan=0.0))
                mask = np.vstack([mask, norm.undefined[None, :]]) if mask is not None else norm.undefined[None, :]
        elif kind == "random":
            rows.append(metrics.random_explainer(1, ds.n_features, inst_seed)[0])
        else:
            raise ConfigError(f"unknown explainer {kind!r}")
    runio.write_explanations(
        run, "explanations.csv", np.array(rows), ds.feature_names, kind,
        seeds, instance_ids, undefined_mask=mask,
    )
    _log(run, [f"explained {len(rows)} instances with {kind}"])
    run.finalize({"component_seeds": {"instances": derive_seed(config["seed"], "instances"),
                                      "per_instance": seeds}})
    return run


EVAL_DEFAULTS = {
    "dataset": "",
    "explanations": "",
    "eps1": metrics.DEFAULT_EPS1,
    "eps2": metrics.DEFAULT_EPS2,
    "ks": "",
    "seed": 0,
}


def run_eval(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    if not config["dataset"] or not config["explanations"]:
        raise ConfigError("eval requires 'dataset' and 'explanations' paths")
    run = _make_run(out, "eval", config, config["seed"])
    ds = _load_dataset_dir(config["dataset"])
    values, mask, names = runio.read_explanations(Path(config["explanations"]))
    if names != ds.feature_names:
        raise ConfigError("explanation columns do not match the dataset manifest")
    beta = np.array([ds.manifest["beta"][n] for n in names])
    ks = _int_list(config["ks"]) if config["ks"] else None
    report = metrics.evaluate(
        np.nan_to_num(values, nan=0.0),
        beta,
        ks=ks,
        eps1=config["eps1"],
        eps2=config["eps2"],
        undefined_mask=mask,
        feature_names=names,
    )
    runio.write_alignment_report(run, report, experiment="eval")
    if plots_on:
        plots.plot_alignment({"eval": report}, run.path)
    _log(run, [f"evaluated {report.n_instances} instances"])
    run.finalize({"figures": ["directionality.png", "concordance.png", "relevance.png"] if plots_on else []})
    return run


# ---------------------------------------------------------------------------
# mitigate
# ---------------------------------------------------------------------------

MITIGATE_DEFAULTS = {
    "generator": "loan_independent",
    "rows": 5000,
    "seed": 0,
    "strategy": "lime-track",  # lime-track | shap-track
    "hidden_grid": "2,5,10,15,20",
    "seed_grid": "1,2,3",
    "epsilon_auc": 0.02,
    "n_models": 10,
    "n_explainer_seeds": 10,
    "lime_nu": 10000.0,
    "lime_n_samples": 10000,
    "shap_n_permutations": 64,
    "train_epochs": 150,
    "m_instances": 100,
    "baseline_hidden": 100,
    "baseline_target_auc": 0.93,
    "baseline_tolerance": 0.02,
    "baseline_max_epochs": 400,
}


def run_mitigate(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    run = _make_run(out, "mitigate", config, config["seed"])
    ds, gt = datagen.generate(config["generator"], config["rows"], config["seed"])
    beta = gt.beta_vector(ds.feature_names)
    instances, instance_ids = _pick_instances(ds, config["m_instances"], config["seed"])
    background = ds.train_X.mean(axis=0)

    baseline_model = models.train_to_target(
        ds,
        config["baseline_hidden"],
        models.PerformanceTarget(
            config["baseline_target_auc"],
            config["baseline_tolerance"],
            config["baseline_max_epochs"],
        ),
        seed=derive_seed(config["seed"], "baseline-model"),
    )
    use_exact = ds.n_features <= shapley.EXACT_MAX_FEATURES
    base_rows = []
    for i, xi in enumerate(instances):
        if config["strategy"] == "shap-track":
            scfg = shapley.ShapConfig(
                method="exact" if use_exact else "permutation-sampling",
                background=background,
                n_permutations=config["shap_n_permutations"],
                seed=derive_seed(config["seed"], "baseline-shap", i),
            )
            base_rows.append(shapley.explain(baseline_model.predict_proba, xi, scfg).phi)
        else:
            lcfg = lime_mod.LimeConfig(seed=derive_seed(config["seed"], "baseline-lime", i))
            base_rows.append(
                lime_mod.explain(baseline_model.predict_proba, xi, lcfg).coefficients
            )
    baseline = np.array(base_rows)

    pipe_cfg = mitigate.PipelineConfig(
        hidden_grid=_int_list(config["hidden_grid"]),
        seed_grid=_int_list(config["seed_grid"]),
        epsilon_auc=config["epsilon_auc"],
        n_models=config["n_models"],
        n_explainer_seeds=config["n_explainer_seeds"],
        lime_nu=config["lime_nu"],
        lime_n_samples=config["lime_n_samples"],
        shap_n_permutations=config["shap_n_permutations"],
        train_epochs=config["train_epochs"],
        master_seed=config["seed"],
    )
    mitigated, mask, pipe_manifest = mitigate.recommended_pipeline(
        ds, config["strategy"], pipe_cfg, instances
    )

    old_scores = metrics.per_instance_scores(baseline, beta)
    new_scores = metrics.per_instance_scores(
        np.nan_to_num(mitigated, nan=0.0), beta, undefined_mask=mask
    )
    verdicts = casestudy_mod.improvement_verdicts(old_scores, new_scores, ds.feature_names)

    base_report = metrics.evaluate(baseline, beta, feature_names=ds.feature_names)
    mit_report = metrics.evaluate(
        np.nan_to_num(mitigated, nan=0.0), beta, undefined_mask=mask,
        feature_names=ds.feature_names,
    )
    runio.write_alignment_report(run, base_report, "baseline", prefix="baseline_")
    runio.write_alignment_report(run, mit_report, config["strategy"], prefix="mitigated_")
    runio.write_verdicts(run, verdicts, "verdicts.csv")
    if plots_on:
        plots.plot_alignment(
            {"baseline": base_report, config["strategy"]: mit_report}, run.path
        )
    _log(run, [f"strategy={config['strategy']} overall="
               + ",".join(f"{m}:{v.overall}" for m, v in verdicts.items())])
    run.finalize({"pipeline": pipe_manifest, "instance_rows": instance_ids})
    return run


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------

THEORY_DEFAULTS = {
    "grid": "full",  # full | custom
    "nus": "0.1,1,10,10000",
    "ns": "10,100,1000,10000,1000000",
    "ds": "5,10,100",
    "replicates": 10,
    "seed": 0,
}


def run_theory(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    run = _make_run(out, "theory", config, config["seed"])
    if config["grid"] == "full":
        grid = theorylab.ConvergenceGrid(replicates=config["replicates"])
    else:
        grid = theorylab.ConvergenceGrid(
            nus=_float_list(config["nus"]),
            ns=_int_list(config["ns"]),
            ds=_int_list(config["ds"]),
            replicates=config["replicates"],
        )
    result = theorylab.run_grid(grid, config["seed"])
    run.write_csv(
        "operator_gap_cells.csv",
        ["nu", "n", "d", "replicate", "gap", "status"],
        [
            [c.nu, c.n, c.d, c.replicate, "" if c.gap is None else c.gap, c.status]
            for c in result.cells
        ],
        comment="figure: log-log operator gap vs N, one curve per (nu, D)",
    )
    means = result.mean_gaps()
    run.write_csv(
        "operator_gap_mean.csv",
        ["nu", "n", "d", "mean_gap"],
        [[nu, n, d, g] for (nu, n, d), g in sorted(means.items())],
        comment="figure: log-log operator gap vs N, one curve per (nu, D)",
    )
    if plots_on and means:
        plots.plot_operator_gap(means, run.path)
    _log(run, [f"grid cells={len(result.cells)}"])
    run.finalize({"component_seeds": _component_seeds(config["seed"], ["grid"])})
    return run


# ---------------------------------------------------------------------------
# casestudy
# ---------------------------------------------------------------------------

CASESTUDY_DEFAULTS = {
    "data": "",  # real CSV path; empty selects the synthetic fallback
    "synth_rows": 3000,
    "seed": 0,
    "hidden_grid": "",  # empty selects the full 2..100 grid
    "seed_grid": "1,2,3,4,5,6,7,8,9,10",
    "epsilon_auc": 0.02,
    "n_models": 10,
    "n_explainer_seeds": 10,
    "lime_nu": 10000.0,
    "lime_n_samples": 10000,
    "train_epochs": 150,
    "m_instances": 100,
    "baseline_hidden": 100,
    "baseline_target_auc": 0.93,
    "baseline_tolerance": 0.02,
}


def run_casestudy(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    run = _make_run(out, "casestudy", config, config["seed"])
    if config["data"]:
        ds, gt = casestudy_mod.load_case_data(config["data"], seed=config["seed"])
    else:
        ds, gt = casestudy_mod.synth_case_data(config["synth_rows"], config["seed"])
    hidden_grid = (
        _int_list(config["hidden_grid"])
        if config["hidden_grid"]
        else models.full_hidden_grid()
    )
    cs_cfg = casestudy_mod.CaseStudyConfig(
        pipeline=mitigate.PipelineConfig(
            hidden_grid=hidden_grid,
            seed_grid=_int_list(config["seed_grid"]),
            epsilon_auc=config["epsilon_auc"],
            n_models=config["n_models"],
            n_explainer_seeds=config["n_explainer_seeds"],
            lime_nu=config["lime_nu"],
            lime_n_samples=config["lime_n_samples"],
            train_epochs=config["train_epochs"],
        ),
        baseline_hidden=config["baseline_hidden"],
        baseline_target_auc=config["baseline_target_auc"],
        baseline_tolerance=config["baseline_tolerance"],
        m_instances=config["m_instances"],
    )
    result = casestudy_mod.run_case_study(ds, gt, config["seed"], cs_cfg)
    for track, cmp in result.tracks.items():
        runio.write_alignment_report(
            run, cmp.baseline_report, f"{track}-baseline", prefix=f"{track}_baseline_"
        )
        runio.write_alignment_report(
            run, cmp.mitigated_report, f"{track}-mitigated", prefix=f"{track}_mitigated_"
        )
        runio.write_verdicts(run, cmp.verdicts, f"{track}_verdicts.csv")
        if plots_on:
            plots.plot_alignment(
                {"baseline": cmp.baseline_report, "mitigated": cmp.mitigated_report},
                run.path,
                prefix=f"{track}_",
            )
    _log(run, [
        f"{track}: " + ",".join(f"{m}:{v.overall}" for m, v in cmp.verdicts.items())
        for track, cmp in result.tracks.items()
    ])
    run.finalize({"case_study": result.manifest})
    return run


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SWEEP_DEFAULTS = {
    "datasets": 100,
    "seed": 0,
    "d_min": 3,
    "d_max": 100,
    "d_list": "",  # fixed cycle of dimensions instead of random draws
    "rows_min": 100,
    "rows_max": 10000,
    "rows": 0,  # fixed row count instead of random draws
    "m_instances": 50,
    "hidden_nodes": 50,
    "epochs": 120,
    "n_permutations": 64,
    "lime_n_samples": lime_mod.DEFAULT_N_SAMPLES,
    "bins": 5,
    "relevance_k": 3,
}


def _sweep_job(payload: dict) -> dict:
    """One dataset of the family: generate, train, explain both ways, score."""
    i = payload["index"]
    seed = payload["seed"]
    d = payload["d"]
    rows = payload["rows"]
    ds, gt = datagen.gen_random_linear(d, rows, derive_seed(seed, "sweep-data", i))
    model = models.train(
        ds, payload["hidden_nodes"], seed=derive_seed(seed, "sweep-model", i),
        epochs=payload["epochs"],
    )
    test_auc = models.auc(model.predict_proba(ds.test_X), ds.test_y)
    beta = gt.beta_vector(ds.feature_names)
    m = min(payload["m_instances"], len(ds.test_idx))
    pick = np.sort(
        substream(seed, "sweep-instances", i).choice(len(ds.test_idx), m, replace=False)
    )
    instances = ds.test_X[pick]
    background = ds.train_X.mean(axis=0)
    k = min(payload["relevance_k"], d - 1)

    lime_rows = []
    shap_rows = []
    for t, xi in enumerate(instances):
        lcfg = lime_mod.LimeConfig(
            n_samples=payload["lime_n_samples"],
            seed=derive_seed(seed, "sweep-lime", i, t),
        )
        lime_rows.append(lime_mod.explain(model.predict_proba, xi, lcfg).coefficients)
        scfg = shapley.ShapConfig(
            method="exact" if d <= shapley.EXACT_MAX_FEATURES else "permutation-sampling",
            background=background,
            n_permutations=payload["n_permutations"],
            seed=derive_seed(seed, "sweep-shap", i, t),
        )
        shap_rows.append(shapley.explain(model.predict_proba, xi, scfg).phi)

    out = {"index": i, "seed_data": derive_seed(seed, "sweep-data", i), "d": d,
           "rows": rows, "test_auc": test_auc}
    for label, E in (("lime", np.array(lime_rows)), ("shap", np.array(shap_rows))):
        rep = metrics.evaluate(E, beta, ks=[k])
        out[label] = {
            "directionality": float(np.mean(rep.directionality)),
            "concordance": rep.concordance_mean,
            "relevance": rep.relevance[k][0],
        }
    return out


def run_sweep(config: dict, out, plots_on: bool, jobs: int = 1) -> runio.RunDir:
    run = _make_run(out, "sweep", config, config["seed"])
    seed = config["seed"]
    d_list = _int_list(config["d_list"]) if config["d_list"] else None
    payloads = []
    for i in range(config["datasets"]):
        if d_list:
            d = d_list[i % len(d_list)]
        else:
            d = int(substream(seed, "sweep-d", i).integers(config["d_min"], config["d_max"] + 1))
        rows = config["rows"] or int(
            substream(seed, "sweep-rows", i).integers(config["rows_min"], config["rows_max"] + 1)
        )
        payloads.append(
            {
                "index": i,
                "seed": seed,
                "d": d,
                "rows": rows,
                "hidden_nodes": config["hidden_nodes"],
                "epochs": config["epochs"],
                "m_instances": config["m_instances"],
                "n_permutations": config["n_permutations"],
                "lime_n_samples": config["lime_n_samples"],
                "relevance_k": config["relevance_k"],
            }
        )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, payloads))
    else:
        results = [_sweep_job(p) for p in payloads]

    per_dataset_rows = []
    for r in results:
        for label in ("lime", "shap"):
            per_dataset_rows.append(
                [r["index"], r["d"], r["rows"], r["test_auc"], label,
                 r[label]["directionality"], r[label]["concordance"],
                 r[label]["relevance"]]
            )
    run.write_csv(
        "sweep_datasets.csv",
        ["index", "d", "rows", "test_auc", "explainer",
         "mean_directionality", "mean_concordance", f"relevance_{config['relevance_k']}"],
        per_dataset_rows,
        comment="one row per dataset and explainer",
    )

    # Equal-width bins over [1, 100] by feature count.
    edges = np.linspace(1.0, 100.0, config["bins"] + 1)
    summary_rows = []
    bins_for_plot: list[tuple[str, dict[str, float]]] = []
    for b in range(config["bins"]):
        lo, hi = edges[b], edges[b + 1]
        members = [r for r in results if lo <= r["d"] < hi or (b == config["bins"] - 1 and r["d"] == hi)]
        label = f"[{lo:g},{hi:g})"
        plot_vals: dict[str, float] = {}
        for expl in ("lime", "shap"):
            if members:
                dir_mean = float(np.mean([r[expl]["directionality"] for r in members]))
                conc_mean = float(np.mean([r[expl]["concordance"] for r in members]))
                rel_mean = float(np.mean([r[expl]["relevance"] for r in members]))
            else:
                dir_mean = conc_mean = rel_mean = float("nan")
            summary_rows.append(
                [label, expl, len(members), dir_mean, conc_mean, rel_mean]
            )
            if members:
                plot_vals[f"{expl}-directionality"] = dir_mean
                plot_vals[f"{expl}-concordance"] = conc_mean
        if plot_vals:
            bins_for_plot.append((label, plot_vals))
    run.write_csv(
        "sweep_bins.csv",
        ["bin", "explainer", "datasets", "mean_directionality",
         "mean_concordance", "mean_relevance"],
        summary_rows,
        comment="figure: binned alignment vs feature count",
    )
    if plots_on and bins_for_plot:
        plots.plot_sweep_bins(bins_for_plot, run.path)
    _log(run, [f"swept {len(results)} datasets"])
    run.finalize({"component_seeds": {
        "datasets": [derive_seed(seed, "sweep-data", i) for i in range(config["datasets"])],
        "models": [derive_seed(seed, "sweep-model", i) for i in range(config["datasets"])],
    }})
    return run


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

RUNNERS = {
    "gen": (GEN_DEFAULTS, run_gen),
    "train": (TRAIN_DEFAULTS, run_train),
    "explain": (EXPLAIN_DEFAULTS, run_explain),
    "eval": (EVAL_DEFAULTS, run_eval),
    "mitigate": (MITIGATE_DEFAULTS, run_mitigate),
    "theory": (THEORY_DEFAULTS, run_theory),
    "casestudy": (CASESTUDY_DEFAULTS, run_casestudy),
    "sweep": (SWEEP_DEFAULTS, run_sweep),
}


def run_replay(manifest_path, out, plots_on: bool, check: bool, jobs: int = 1) -> int:
    p = Path(manifest_path)
    if p.is_dir():
        p = p / runio.MANIFEST_NAME
    manifest = runio.load_manifest(p)
    command = manifest["command"]
    if command not in RUNNERS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    _, runner = RUNNERS[command]
    run = runner(manifest["config"], out, plots_on, jobs)
    if not check:
        return 0
    old = manifest["artifacts"]
    new = run.artifacts
    mismatched = sorted(
        set(old) ^ set(new)
        | {name for name in set(old) & set(new) if old[name] != new[name]}
    )
    if mismatched:
        print(f"replay differs on: {', '.join(mismatched)}", file=sys.stderr)
        return 1
    print(f"replay verified: {len(new)} artifacts identical")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--config", default=None, help="INI config file")
    sub.add_argument("--out", default=None, help="run directory")
    sub.add_argument("--jobs", type=int, default=1, help="worker processes")
    sub.add_argument("--no-plots", action="store_true", help="skip figure rendering")


_FLAG_SPECS: dict[str, dict[str, type]] = {
    "gen": {"generator": str, "rows": int, "d": int},
    "train": {"dataset": str, "hidden_nodes": int, "epochs": int,
              "target_auc": float, "tolerance": float, "max_epochs": int,
              "lr": float, "batch_size": int},
    "explain": {"dataset": str, "model": str, "explainer": str,
                "m_instances": int, "nu": float, "n_samples": int,
                "ridge_lambda": float, "n_seeds": int, "method": str,
                "n_permutations": int},
    "eval": {"dataset": str, "explanations": str, "eps1": float, "eps2": float,
             "ks": str},
    "mitigate": {"generator": str, "rows": int, "strategy": str,
                 "hidden_grid": str, "seed_grid": str, "epsilon_auc": float,
                 "n_models": int, "n_explainer_seeds": int, "lime_nu": float,
                 "lime_n_samples": int, "train_epochs": int, "m_instances": int,
                 "baseline_hidden": int},
    "theory": {"grid": str, "nus": str, "ns": str, "ds": str, "replicates": int},
    "casestudy": {"data": str, "synth_rows": int, "hidden_grid": str,
                  "seed_grid": str, "epsilon_auc": float, "m_instances": int,
                  "train_epochs": int, "baseline_hidden": int},
    "sweep": {"datasets": int, "d_min": int, "d_max": int, "d_list": str,
              "rows_min": int, "rows_max": int, "rows": int, "m_instances": int,
              "hidden_nodes": int, "epochs": int, "n_permutations": int, "bins": int},
}

_BOOL_FLAGS: dict[str, list[str]] = {
    "gen": ["independent"],
    "explain": ["discretize"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xalign",
        description="Reproducible explainer-alignment experiments",
    )
    parser.add_argument("--version", action="version", version=f"xalign {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for command, (defaults, _) in RUNNERS.items():
        sub = subs.add_parser(command)
        _add_common(sub)
        for flag, typ in _FLAG_SPECS.get(command, {}).items():
            sub.add_argument(f"--{flag.replace('_', '-')}", type=typ, default=None,
                             dest=flag)
        for flag in _BOOL_FLAGS.get(command, []):
            sub.add_argument(f"--{flag.replace('_', '-')}", action="store_const",
                             const=True, default=None, dest=flag)
    replay = subs.add_parser("replay")
    replay.add_argument("manifest", help="manifest file or run directory")
    replay.add_argument("--out", default=None)
    replay.add_argument("--jobs", type=int, default=1)
    replay.add_argument("--no-plots", action="store_true")
    replay.add_argument("--check", action="store_true",
                        help="verify artifact hashes against the original run")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return run_replay(
                args.manifest, args.out, not args.no_plots, args.check, args.jobs
            )
        defaults, runner = RUNNERS[args.command]
        sections = _load_ini(args.config)
        file_section = sections.get(args.command, {})
        flag_names = list(_FLAG_SPECS.get(args.command, {}))
        flag_names += _BOOL_FLAGS.get(args.command, [])
        overrides = {name: getattr(args, name, None) for name in flag_names}
        if args.seed is not None:
            overrides["seed"] = args.seed
        config = resolve_config(defaults, file_section, overrides)
        run = runner(config, args.out, not args.no_plots, args.jobs)
        print(f"run complete: {run.path}")
        return 0
    except (ConfigError, configparser.Error) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
