"""Command implementations behind the CLI verbs.

Artifact layout under the configured output directory:

    prep/     train.csv, test.csv, prep_state.json, manifest.json
    models/   qnn.json, qnn_history.csv, qsvm.json, qsvm_kkt.csv,
              forest_<scheme>.json
    reports/  report_{qnn,qsvm,fused_<scheme>}.csv, confusion_*.csv,
              disagreement.csv, meta_{train,test}_<scheme>.csv
    curves/   roc_*.csv, pr_*.csv, reliability_*.csv, noise_sweep.csv

Commands chain through these files only, check their inputs exist, and
are byte-deterministic for a fixed config.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import forest as forest_mod
from . import fusion, metrics, prep, qnn, qsvm
from .config import RunConfig, format_config
from .errors import DataError, MissingArtifactError
from .noise import ChannelKind, NoiseChannel, noisy_embed_sel_expectations
from .util import dump_json, load_json, rng_stream, sha256_file, stratified_kfold_indices, write_delimited


def _dirs(config: RunConfig) -> dict[str, Path]:
    out = Path(config.run_out)
    return {name: out / name for name in ("prep", "models", "reports", "curves")}


def _train_config(config: RunConfig) -> qnn.TrainConfig:
    return qnn.TrainConfig(
        n_qubits=config.qnn_n_qubits,
        layers=config.qnn_layers,
        learning_rate=config.qnn_learning_rate,
        batch_size=config.qnn_batch_size,
        epochs=config.qnn_epochs,
        seed=config.qnn_seed,
        validation_fraction=config.qnn_validation_fraction,
    )


def _forest_config(config: RunConfig) -> forest_mod.ForestConfig:
    return forest_mod.ForestConfig(
        n_trees=config.forest_n_trees,
        max_depth=config.forest_max_depth or None,
        features_per_split=config.forest_features_per_split or None,
        seed=config.forest_seed,
    )


def _write_split(path: Path, ids: np.ndarray, X: np.ndarray, y: np.ndarray) -> None:
    header = ["sample_id"] + [f"f{i}" for i in range(X.shape[1])] + ["label"]
    rows = ([int(i)] + list(x) + [int(label)] for i, x, label in zip(ids, X, y))
    write_delimited(path, header, rows)


def _read_split(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not path.is_file():
        raise MissingArtifactError(f"missing prep artifact {path}; run the prep command first")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    n_features = len(header) - 2
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    X = np.array([[float(v) for v in r[1 : 1 + n_features]] for r in rows])
    y = np.array([int(r[-1]) for r in rows], dtype=np.int64)
    return ids, X, y


def cmd_prep(config: RunConfig) -> dict[str, Path]:
    """Load, clean, fit preprocessing on train only, persist both splits."""
    dirs = _dirs(config)
    dirs["prep"].mkdir(parents=True, exist_ok=True)
    if not config.data_path:
        raise DataError("data.path is empty; nothing to preprocess")

    table = prep.load_csv(
        config.data_path,
        categorical_columns=config.data_categorical_columns,
        numeric_columns=config.data_numeric_columns,
    )
    dataset = prep.build_dataset(table, config.data_label_column, config.data_positive_label)

    row_pool = np.arange(dataset.labels.size)
    if config.data_subsample and config.data_subsample < row_pool.size:
        rng = rng_stream(config.data_seed, 77)
        row_pool = np.sort(rng.choice(row_pool, size=config.data_subsample, replace=False))
    labels = dataset.labels[row_pool]

    train_rel, test_rel = prep.split(labels, config.prep_train_ratio, config.data_seed)
    train_idx, test_idx = row_pool[train_rel], row_pool[test_rel]

    state = prep.fit_prep(
        dataset, train_idx, config.pca_components, config.data_label_column, config.data_positive_label
    )
    prep.audit_leak_free(state, dataset, train_idx, config.pca_components)

    X_train = prep.apply_prep(state, dataset.features[train_idx])
    X_test = prep.apply_prep(state, dataset.features[test_idx])
    _write_split(dirs["prep"] / "train.csv", dataset.sample_ids[train_idx], X_train, dataset.labels[train_idx])
    _write_split(dirs["prep"] / "test.csv", dataset.sample_ids[test_idx], X_test, dataset.labels[test_idx])
    prep.save_state(dirs["prep"] / "prep_state.json", state)
    dump_json(
        {
            "input_path": str(config.data_path),
            "input_sha256": sha256_file(config.data_path),
            "rows_read": table.n_rows,
            "rows_dropped": dataset.n_dropped,
            "rows_after_subsample": int(row_pool.size),
            "train_rows": int(train_idx.size),
            "test_rows": int(test_idx.size),
            "config": format_config(config),
        },
        dirs["prep"] / "manifest.json",
    )
    return dirs


def cmd_train_qnn(config: RunConfig) -> Path:
    dirs = _dirs(config)
    dirs["models"].mkdir(parents=True, exist_ok=True)
    _, X_train, y_train = _read_split(dirs["prep"] / "train.csv")
    train_config = _train_config(config)
    params, history = qnn.train_qnn(X_train, y_train, train_config)
    qnn.save_qnn(dirs["models"] / "qnn.json", params, train_config)
    write_delimited(
        dirs["models"] / "qnn_history.csv",
        ("epoch", "train_loss", "train_accuracy", "val_accuracy"),
        (
            (e + 1, loss, acc, val)
            for e, (loss, acc, val) in enumerate(
                zip(history.train_loss, history.train_accuracy, history.val_accuracy)
            )
        ),
    )
    return dirs["models"] / "qnn.json"


def cmd_train_qsvm(config: RunConfig) -> Path:
    dirs = _dirs(config)
    dirs["models"].mkdir(parents=True, exist_ok=True)
    _, X_train, y_train = _read_split(dirs["prep"] / "train.csv")
    model, _ = qsvm.train_qsvm(
        X_train,
        y_train,
        C=config.qsvm_c,
        tol=config.qsvm_tol,
        seed=config.data_seed,
        calibration_folds=config.qsvm_calibration_folds,
    )
    qsvm.save_qsvm(dirs["models"] / "qsvm.json", model)
    audit = qsvm.kkt_audit(model, qsvm.compute_kernel_block(X_train, X_train), config.qsvm_tol)
    write_delimited(
        dirs["models"] / "qsvm_kkt.csv",
        ("sample", "alpha", "y_times_f", "kind", "violation"),
        ((r["sample"], r["alpha"], r["y_times_f"], r["kind"], r["violation"]) for r in audit),
    )
    return dirs["models"] / "qsvm.json"


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(f"missing artifact {path}; run {hint} first")
    return path


def _branch_outputs(
    X: np.ndarray,
    ids: np.ndarray,
    qnn_params: qnn.QnnParams,
    svm_model: qsvm.SvmModel,
) -> tuple[fusion.BranchOutputs, fusion.BranchOutputs]:
    logits, probs, _ = qnn.forward_batch(X, qnn_params)
    margins = qsvm.decide(svm_model, X)
    return (
        fusion.BranchOutputs(ids, logits, probs),
        fusion.BranchOutputs(ids, margins, qsvm.predict_proba(svm_model, margins)),
    )


def _oof_branch_outputs(
    X: np.ndarray, y: np.ndarray, ids: np.ndarray, config: RunConfig
) -> tuple[fusion.BranchOutputs, fusion.BranchOutputs]:
    """Out-of-fold branch outputs over the training split (stacking protocol)."""
    logits = np.zeros(y.size)
    probs = np.zeros(y.size)
    margins = np.zeros(y.size)
    svm_probs = np.zeros(y.size)
    train_config = _train_config(config)
    for heldout in stratified_kfold_indices(y, config.fusion_folds, config.fusion_seed):
        rest = np.setdiff1d(np.arange(y.size), heldout)
        fold_params, _ = qnn.train_qnn(X[rest], y[rest], train_config)
        fold_logits, fold_probs, _ = qnn.forward_batch(X[heldout], fold_params)
        logits[heldout], probs[heldout] = fold_logits, fold_probs
        fold_model, _ = qsvm.train_qsvm(
            X[rest],
            y[rest],
            C=config.qsvm_c,
            tol=config.qsvm_tol,
            seed=config.fusion_seed,
            calibration_folds=config.qsvm_calibration_folds,
        )
        fold_margins = qsvm.decide(fold_model, X[heldout])
        margins[heldout] = fold_margins
        svm_probs[heldout] = qsvm.predict_proba(fold_model, fold_margins)
    return (
        fusion.BranchOutputs(ids, logits, probs),
        fusion.BranchOutputs(ids, margins, svm_probs),
    )


def cmd_fuse_eval(config: RunConfig) -> dict[str, metrics.EvalReport]:
    """Fit the meta-forest per scheme on out-of-fold branch outputs, evaluate on test."""
    dirs = _dirs(config)
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    train_ids, X_train, y_train = _read_split(dirs["prep"] / "train.csv")
    test_ids, X_test, y_test = _read_split(dirs["prep"] / "test.csv")
    qnn_params, _ = qnn.load_qnn(_require(dirs["models"] / "qnn.json", "train-qnn"))
    svm_model = qsvm.load_qsvm(_require(dirs["models"] / "qsvm.json", "train-qsvm"))

    oof_qnn, oof_qsvm = _oof_branch_outputs(X_train, y_train, train_ids, config)
    test_qnn, test_qsvm = _branch_outputs(X_test, test_ids, qnn_params, svm_model)

    qnn_report = metrics.evaluate("qnn", y_test, test_qnn.prob)
    qsvm_report = metrics.evaluate("qsvm", y_test, test_qsvm.prob)
    reports = {"qnn": qnn_report, "qsvm": qsvm_report}
    for name, report in reports.items():
        metrics.write_report(dirs["reports"] / f"report_{name}.csv", report)
        metrics.write_curves(dirs["curves"], name, y_test, test_qnn.prob if name == "qnn" else test_qsvm.prob)

    disagreement = fusion.disagreement_report(
        (test_qnn.prob >= 0.5).astype(int), (test_qsvm.prob >= 0.5).astype(int), y_test
    )
    write_delimited(
        dirs["reports"] / "disagreement.csv",
        ("n_samples", "qsvm_errors", "qnn_errors", "both_errors", "disagreement_rate"),
        [
            (
                disagreement.n_samples,
                disagreement.n_qsvm_errors,
                disagreement.n_qnn_errors,
                disagreement.n_both_errors,
                disagreement.disagreement_rate,
            )
        ],
    )

    for scheme in config.fusion_schemes:
        meta_train = fusion.extract_meta_features(oof_qnn, oof_qsvm, scheme, labels=y_train)
        meta_test = fusion.extract_meta_features(test_qnn, test_qsvm, scheme, labels=y_test)
        fusion.write_meta_table(dirs["reports"] / f"meta_train_{scheme}.csv", meta_train)
        fusion.write_meta_table(dirs["reports"] / f"meta_test_{scheme}.csv", meta_test)
        meta_forest = forest_mod.fit_forest(meta_train.features, y_train, _forest_config(config))
        forest_mod.save_forest(dirs["models"] / f"forest_{scheme}.json", meta_forest)
        pred, prob = forest_mod.forest_predict(meta_forest, meta_test.features)
        report = metrics.evaluate(f"fused_{scheme}", y_test, prob, predictions=pred)
        reports[f"fused_{scheme}"] = report
        metrics.write_report(dirs["reports"] / f"report_fused_{scheme}.csv", report)
        metrics.write_curves(dirs["curves"], f"fused_{scheme}", y_test, prob)
        write_delimited(
            dirs["reports"] / f"confusion_fused_{scheme}.csv",
            ("tp", "fp", "tn", "fn"),
            [(report.counts.tp, report.counts.fp, report.counts.tn, report.counts.fn)],
        )
    return reports


def _noisy_branch_outputs(
    X: np.ndarray,
    ids: np.ndarray,
    qnn_params: qnn.QnnParams,
    svm_model: qsvm.SvmModel,
    channel: NoiseChannel,
    config: RunConfig,
    grid_key: tuple[int, int],
) -> tuple[fusion.BranchOutputs, fusion.BranchOutputs]:
    if channel.p == 0.0:
        return _branch_outputs(X, ids, qnn_params, svm_model)
    wiring = qnn.default_wiring(qnn_params)
    logits = np.empty(X.shape[0])
    for i, x in enumerate(X):
        rng = rng_stream(config.noise_seed, 0, *grid_key, i)
        z = noisy_embed_sel_expectations(
            x, qnn_params.theta, wiring, channel, config.noise_trajectories, rng
        )
        logits[i] = float(qnn_params.w @ z + qnn_params.b)
    probs = qnn.sigmoid(logits)
    k_block = qsvm.noisy_kernel_block(
        X,
        svm_model.features,
        channel,
        config.noise_trajectories,
        (config.noise_seed, 1, *grid_key),
    )
    margins = qsvm.decision_values(svm_model, k_block)
    return (
        fusion.BranchOutputs(ids, logits, probs),
        fusion.BranchOutputs(ids, margins, qsvm.predict_proba(svm_model, margins)),
    )


def cmd_noise_sweep(config: RunConfig) -> list[dict]:
    """Re-evaluate the fused pipeline with trajectory noise in both branches."""
    dirs = _dirs(config)
    dirs["curves"].mkdir(parents=True, exist_ok=True)
    test_ids, X_test, y_test = _read_split(dirs["prep"] / "test.csv")
    qnn_params, _ = qnn.load_qnn(_require(dirs["models"] / "qnn.json", "train-qnn"))
    svm_model = qsvm.load_qsvm(_require(dirs["models"] / "qsvm.json", "train-qsvm"))
    forests = {
        scheme: forest_mod.load_forest(
            _require(dirs["models"] / f"forest_{scheme}.json", "fuse-eval")
        )
        for scheme in config.fusion_schemes
    }
    if not config.noise_channels or not config.noise_probabilities:
        raise DataError("noise sweep grid is empty")

    rows = []
    for c_idx, channel_name in enumerate(config.noise_channels):
        for p_idx, p in enumerate(config.noise_probabilities):
            channel = NoiseChannel(ChannelKind(channel_name), float(p))
            noisy_qnn, noisy_qsvm = _noisy_branch_outputs(
                X_test, test_ids, qnn_params, svm_model, channel, config, (c_idx, p_idx)
            )
            for scheme in config.fusion_schemes:
                meta = fusion.extract_meta_features(noisy_qnn, noisy_qsvm, scheme)
                pred, prob = forest_mod.forest_predict(forests[scheme], meta.features)
                _, point = metrics.confusion_and_point_metrics(y_test, pred)
                rows.append(
                    {
                        "channel": channel_name,
                        "p": float(p),
                        "scheme": scheme,
                        "f1": point.f1,
                        "accuracy": point.accuracy,
                    }
                )
    write_delimited(
        dirs["curves"] / "noise_sweep.csv",
        ("channel", "p", "scheme", "f1", "accuracy"),
        ((r["channel"], r["p"], r["scheme"], r["f1"], r["accuracy"]) for r in rows),
    )
    return rows
