"""Leave-one-project-out simulation harness and the table/curve writers.

Each experiment holds one project out as the unlabeled target, trains on the
other projects, and scores a set of treatments; outputs are TSV tables plus
per-fold recall-cost CSVs. Randomized components derive their seed from the
harness seed and the target project name, so a fixed seed gives byte-identical
outputs.
"""

import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import learners
from .corpus import Corpus, build_term_matrix, load_corpus
from .metrics import (
    apfd,
    cohen_small,
    confusion_metrics,
    median_iqr,
    p_at_k,
    recall_cost_curve,
)
from .patterns import MAT_PATTERNS, classify_by_patterns, mine_patterns
from .review import ReviewConfig, init_session, run_simulated

log = logging.getLogger(__name__)

STEP2_LEARNERS = ("lr", "dt", "rf", "svm", "nb")
OVERALL_TREATMENTS = ("easy+hard", "easy+rf", "hard", "mat+rf", "tm", "rf")


@dataclass
class ExperimentConfig:
    data_path: str
    out_dir: str
    corrected_path: str | None = None
    seed: int = 0
    target_recall: float = 0.9
    batch_size: int = 10
    learner: str = "rf"  # review-loop learner for the combined treatments
    step2_learners: tuple[str, ...] = STEP2_LEARNERS
    # per-kind hyperparameter overrides, e.g. {"rf": {"n_estimators": 50}}
    learner_config: dict[str, dict] | None = None
    # which label variant drives step2/overall APFD runs; "corrected" falls
    # back to "original" when no corrected CSV is supplied
    ranking_variant: str = "corrected"
    exclude_projects: tuple[str, ...] = ()


def fold_seed(seed: int, target: str) -> int:
    digest = hashlib.sha256(f"{seed}:{target}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def load_variants(config: ExperimentConfig) -> dict[str, Corpus]:
    variants = {"original": load_corpus(config.data_path, "labeled_csv")}
    if config.corrected_path:
        variants["corrected"] = load_corpus(config.corrected_path, "labeled_csv")
    for name in config.exclude_projects:
        variants = {v: c.without_project(name) for v, c in variants.items()}
    return variants


def _ranking_corpus(config: ExperimentConfig, variants: dict[str, Corpus]) -> tuple[str, Corpus]:
    name = config.ranking_variant
    if name not in variants:
        name = "original"
    return name, variants[name]


def _review_config(config: ExperimentConfig, target: str, learner: str, target_recall):
    overrides = (config.learner_config or {}).get(learner)
    return ReviewConfig(
        learner=learner,
        batch_size=config.batch_size,
        target_recall=target_recall,
        seed=fold_seed(config.seed, target),
        learner_config=overrides,
    )


def _rank_once(session) -> list[int]:
    """Inspection order of a one-time-trained model: score desc, id asc."""
    order = list(session.target_ids)
    order.sort(key=lambda cid: (-session.score_of(cid), cid))
    return order


def _tm_scores(train: Corpus, test: Corpus) -> tuple[list[int], np.ndarray]:
    """Vote-ensemble scores for every test comment (ids aligned with scores)."""
    tm_train = build_term_matrix(train)
    tm_test = build_term_matrix(test, vocabulary=tm_train.vocabulary)
    row_of = {cid: row for row, cid in enumerate(train.ids())}
    labels = train.label_array().astype(np.int64)
    per_project = []
    for project_ids in train.projects.values():
        rows = [row_of[cid] for cid in project_ids]
        per_project.append((tm_train.counts[rows], labels[rows]))
    model = learners.tm_fit(per_project)
    return test.ids(), learners.tm_ranking_score(model, tm_test.counts)


def _score_order(ids, scores) -> list[int]:
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [ids[i] for i in order]


# ---------------------------------------------------------------------------
# step 1: pattern mining vs the fixed keyword baseline
# ---------------------------------------------------------------------------


@dataclass
class Step1Result:
    # variant -> target -> treatment -> ConfusionMetrics
    metrics: dict[str, dict[str, dict[str, object]]]
    # variant -> target -> mined pattern tokens in discovery order
    patterns: dict[str, dict[str, list[str]]]
    targets: list[str] = field(default_factory=list)
    fold_errors: dict[tuple[str, str], str] = field(default_factory=dict)


def run_step1(config: ExperimentConfig) -> Step1Result:
    variants = load_variants(config)
    result = Step1Result(metrics={}, patterns={})
    for variant, corpus in variants.items():
        result.targets = corpus.project_names
        result.metrics[variant] = {}
        result.patterns[variant] = {}
        for target in corpus.project_names:
            started = time.monotonic()
            try:
                train = corpus.without_project(target)
                test = corpus.only_project(target)
                mined = mine_patterns(train)
                truth = test.satd_ids()
                per_treatment = {}
                for name, tokens in (("easy", mined.tokens), ("mat", MAT_PATTERNS)):
                    predicted = set(classify_ids(test, tokens))
                    per_treatment[name] = confusion_metrics(predicted, truth)
            except Exception as exc:
                result.fold_errors[(variant, target)] = str(exc)
                log.error("step1 %s/%s failed: %s", variant, target, exc)
                continue
            result.metrics[variant][target] = per_treatment
            result.patterns[variant][target] = mined.tokens
            log.info(
                "step1 %s/%s: patterns=%s (%.1fs)",
                variant, target, ",".join(mined.tokens), time.monotonic() - started,
            )
    _write_step1(config, result)
    return result


def classify_ids(corpus: Corpus, tokens) -> list[int]:
    return classify_by_patterns(corpus, tokens).easy_satd


def _write_step1(config: ExperimentConfig, result: Step1Result) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["variant\tmetric\ttreatment\t" + "\t".join(result.targets)]
    for variant in result.metrics:
        for metric in ("precision", "recall", "f1"):
            for treatment in ("easy", "mat"):
                row = [variant, metric, treatment]
                for target in result.targets:
                    fold = result.metrics[variant].get(target)
                    if fold is None:
                        row.append("-")
                    else:
                        row.append(f"{getattr(fold[treatment], metric):.4f}")
                lines.append("\t".join(row))
    (out / "step1_metrics.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["variant\ttarget\tpatterns"]
    for variant in result.patterns:
        for target in result.targets:
            tokens = result.patterns[variant].get(target)
            lines.append(f"{variant}\t{target}\t" + ("-" if tokens is None else ",".join(tokens)))
    (out / "step1_patterns.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# step 2: finding the hard SATDs (APFD, P@10, stopping)
# ---------------------------------------------------------------------------


@dataclass
class Step2Result:
    targets: list[str]
    # (learner, hard yes/no) -> target -> apfd
    apfd: dict[tuple[str, str], dict[str, float]]
    # learner -> target -> p@10
    p_at_10: dict[str, dict[str, float]]
    # target -> (recall, cost) with the estimator stopping at the target recall
    stopping: dict[str, tuple[float, float]]
    cohen_threshold: float = 0.0
    best_counts: dict[tuple[str, str], int] = field(default_factory=dict)
    fold_errors: dict[str, str] = field(default_factory=dict)


def _step2_fold(config, corpus, target, apfd_table, p10_table, stopping) -> None:
    train = corpus.without_project(target)
    test = corpus.only_project(target)
    mined = mine_patterns(train)

    # one-time-trained models: ranking APFD and P@10 on the hard remainder
    for kind in config.step2_learners:
        session = init_session(
            train, test, patterns=mined,
            config=_review_config(config, target, kind, None),
        )
        truth = session.target_corpus.satd_ids()
        n_hard = len(session.target_ids)
        order = _rank_once(session)
        curve = recall_cost_curve(order, truth, n_hard)
        apfd_table.setdefault((kind, "no"), {})[target] = apfd(curve)
        if n_hard >= 10:
            p10_table.setdefault(kind, {})[target] = p_at_k(
                session.target_scores, truth, k=10, ids=session.target_ids
            )

        sim = run_simulated(
            train, test, patterns=mined,
            config=_review_config(config, target, kind, None),
        )
        curve = recall_cost_curve(sim.inspection_order, truth, n_hard)
        apfd_table.setdefault((kind, "yes"), {})[target] = apfd(curve)

    # vote-ensemble baseline on the same hard remainder
    train_hard = train.restrict(classify_by_patterns(train, mined.tokens).remainder)
    test_hard = test.restrict(classify_by_patterns(test, mined.tokens).remainder)
    ids, scores = _tm_scores(train_hard, test_hard)
    truth = test_hard.satd_ids()
    order = _score_order(ids, scores)
    curve = recall_cost_curve(order, truth, len(ids))
    apfd_table.setdefault(("tm", "no"), {})[target] = apfd(curve)
    if len(ids) >= 10:
        p10_table.setdefault("tm", {})[target] = p_at_k(scores, truth, k=10, ids=ids)

    # estimator-driven stopping run
    sim = run_simulated(
        train, test, patterns=mined,
        config=_review_config(config, target, config.learner, config.target_recall),
    )
    stopping[target] = (sim.final_recall, sim.final_cost)


def run_step2(config: ExperimentConfig) -> Step2Result:
    variants = load_variants(config)
    variant, corpus = _ranking_corpus(config, variants)
    targets = corpus.project_names
    apfd_table: dict[tuple[str, str], dict[str, float]] = {}
    p10_table: dict[str, dict[str, float]] = {}
    stopping: dict[str, tuple[float, float]] = {}
    fold_errors: dict[str, str] = {}

    for target in targets:
        started = time.monotonic()
        try:
            _step2_fold(config, corpus, target, apfd_table, p10_table, stopping)
        except Exception as exc:
            fold_errors[target] = str(exc)
            log.error("step2 %s/%s failed: %s", variant, target, exc)
            continue
        log.info("step2 %s/%s done (%.1fs)", variant, target, time.monotonic() - started)

    pool = [v for per_target in apfd_table.values() for v in per_target.values()]
    threshold = cohen_small(pool)
    best_counts = {key: 0 for key in apfd_table}
    for target in targets:
        fold = {key: apfd_table[key][target] for key in apfd_table if target in apfd_table[key]}
        if not fold:
            continue
        best = max(fold.values())
        for key, value in fold.items():
            if value >= best - threshold:
                best_counts[key] += 1

    result = Step2Result(
        targets=targets,
        apfd=apfd_table,
        p_at_10=p10_table,
        stopping=stopping,
        cohen_threshold=threshold,
        best_counts=best_counts,
        fold_errors=fold_errors,
    )
    _write_step2(config, result)
    return result


def _write_step2(config: ExperimentConfig, result: Step2Result) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["model\thard\t" + "\t".join(result.targets) + "\tmedian\tiqr\tn_best"]
    for (kind, hard), per_target in result.apfd.items():
        values = [per_target[t] for t in result.targets if t in per_target]
        med, iqr = median_iqr(values)
        row = [kind, hard]
        row.extend(f"{per_target[t]:.4f}" if t in per_target else "-" for t in result.targets)
        row.extend([f"{med:.4f}", f"{iqr:.4f}", str(result.best_counts[(kind, hard)])])
        lines.append("\t".join(row))
    (out / "step2_apfd.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["model\t" + "\t".join(result.targets)]
    for kind, per_target in result.p_at_10.items():
        row = [kind]
        row.extend(f"{per_target[t]:.4f}" if t in per_target else "-" for t in result.targets)
        lines.append("\t".join(row))
    (out / "step2_p_at_10.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["metric\t" + "\t".join(result.targets) + "\tmedian\tiqr"]
    for idx, name in ((0, "recall"), (1, "cost")):
        values = [result.stopping[t][idx] for t in result.targets if t in result.stopping]
        med, iqr = median_iqr(values)
        row = [name]
        row.extend(
            f"{result.stopping[t][idx]:.4f}" if t in result.stopping else "-"
            for t in result.targets
        )
        row.extend([f"{med:.4f}", f"{iqr:.4f}"])
        lines.append("\t".join(row))
    (out / "stopping.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# overall: finding all SATDs with every treatment
# ---------------------------------------------------------------------------


@dataclass
class OverallResult:
    targets: list[str]
    apfd: dict[str, dict[str, float]]  # treatment -> target -> apfd
    cohen_threshold: float
    best_counts: dict[str, int]
    # treatment -> target -> {precision, recall, f1, cost} on original labels
    metrics: dict[str, dict[str, dict[str, float]]]
    fold_errors: dict[str, str] = field(default_factory=dict)


def _overall_fold(config, corpus, target, apfd_table, curves_dir) -> None:
    train = corpus.without_project(target)
    test = corpus.only_project(target)
    truth = test.satd_ids()
    n_total = len(test)
    mined = mine_patterns(train)
    easy_found = set(classify_by_patterns(test, mined.tokens).easy_satd)
    mat_found = set(classify_by_patterns(test, MAT_PATTERNS).easy_satd)

    def record(name: str, order, auto):
        curve = recall_cost_curve(order, truth, n_total, auto_found=auto)
        apfd_table[name][target] = apfd(curve)
        path = curves_dir / f"overall_{name.replace('+', '_')}_{target}.csv"
        path.write_text(curve.to_csv(), encoding="utf-8")

    sim = run_simulated(
        train, test, patterns=mined,
        config=_review_config(config, target, config.learner, None),
    )
    record("easy+hard", sim.inspection_order, easy_found)

    session = init_session(
        train, test, patterns=mined,
        config=_review_config(config, target, "rf", None),
    )
    record("easy+rf", _rank_once(session), easy_found)

    sim = run_simulated(
        train, test, patterns=None,
        config=_review_config(config, target, config.learner, None),
    )
    record("hard", sim.inspection_order, set())

    session = init_session(
        train, test, patterns=MAT_PATTERNS,
        config=_review_config(config, target, "rf", None),
    )
    record("mat+rf", _rank_once(session), mat_found)

    ids, scores = _tm_scores(train, test)
    record("tm", _score_order(ids, scores), set())

    session = init_session(
        train, test, patterns=None,
        config=_review_config(config, target, "rf", None),
    )
    record("rf", _rank_once(session), set())


def run_overall(config: ExperimentConfig) -> OverallResult:
    variants = load_variants(config)
    variant, corpus = _ranking_corpus(config, variants)
    original = variants["original"]
    targets = corpus.project_names
    apfd_table: dict[str, dict[str, float]] = {name: {} for name in OVERALL_TREATMENTS}
    fold_errors: dict[str, str] = {}
    curves_dir = Path(config.out_dir) / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)

    for target in targets:
        started = time.monotonic()
        try:
            _overall_fold(config, corpus, target, apfd_table, curves_dir)
        except Exception as exc:
            fold_errors[target] = str(exc)
            log.error("overall %s/%s failed: %s", variant, target, exc)
            continue
        log.info("overall %s/%s done (%.1fs)", variant, target, time.monotonic() - started)

    pool = [v for per_target in apfd_table.values() for v in per_target.values()]
    threshold = cohen_small(pool)
    best_counts = {name: 0 for name in apfd_table}
    for target in targets:
        fold = {
            name: apfd_table[name][target]
            for name in apfd_table
            if target in apfd_table[name]
        }
        if not fold:
            continue
        best = max(fold.values())
        for name, value in fold.items():
            if value >= best - threshold:
                best_counts[name] += 1

    metrics, metric_errors = _overall_metrics(config, original)
    for target, message in metric_errors.items():
        fold_errors.setdefault(target, message)
    result = OverallResult(
        targets=targets,
        apfd=apfd_table,
        cohen_threshold=threshold,
        best_counts=best_counts,
        metrics=metrics,
        fold_errors=fold_errors,
    )
    _write_overall(config, result)
    return result


def _overall_metrics(
    config: ExperimentConfig, original: Corpus
) -> tuple[dict, dict[str, str]]:
    """Precision/recall/F1/cost on original labels: pattern triage alone, and
    the combined treatment stopping at the configured recall target.

    For the combined treatment, every comment surfaced to a human counts as
    predicted (auto-flagged plus human-verified); the human-verified true ones
    are exactly the confirmed SATDs.
    """
    metrics: dict[str, dict[str, dict[str, float]]] = {"easy": {}, "easy+hard": {}}
    errors: dict[str, str] = {}
    for target in original.project_names:
        try:
            train = original.without_project(target)
            test = original.only_project(target)
            truth = test.satd_ids()
            n_total = len(test)
            mined = mine_patterns(train)
            easy_found = set(classify_by_patterns(test, mined.tokens).easy_satd)

            cm = confusion_metrics(easy_found, truth)
            easy_metrics = {
                "precision": cm.precision, "recall": cm.recall, "f1": cm.f1, "cost": 0.0,
            }

            sim = run_simulated(
                train, test, patterns=mined,
                config=_review_config(config, target, config.learner, config.target_recall),
            )
            verified = set(sim.session.labeled)
            predicted = easy_found | verified
            tp = len(easy_found & truth) + len(sim.session.found_hard)
            precision = tp / len(predicted) if predicted else 0.0
            recall = tp / len(truth) if truth else 1.0
            f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        except Exception as exc:
            errors[target] = str(exc)
            log.error("overall metrics %s failed: %s", target, exc)
            continue
        metrics["easy"][target] = easy_metrics
        metrics["easy+hard"][target] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "cost": len(verified) / n_total if n_total else 0.0,
        }
    return metrics, errors


def _write_overall(config: ExperimentConfig, result: OverallResult) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["treatment\t" + "\t".join(result.targets) + "\tmedian\tiqr\tn_best"]
    for name, per_target in result.apfd.items():
        values = [per_target[t] for t in result.targets if t in per_target]
        med, iqr = median_iqr(values)
        row = [name]
        row.extend(f"{per_target[t]:.4f}" if t in per_target else "-" for t in result.targets)
        row.extend([f"{med:.4f}", f"{iqr:.4f}", str(result.best_counts[name])])
        lines.append("\t".join(row))
    (out / "overall_apfd.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["metric\ttreatment\t" + "\t".join(result.targets) + "\tmedian\tiqr"]
    for metric in ("precision", "recall", "f1", "cost"):
        for treatment in ("easy", "easy+hard"):
            per_target = result.metrics[treatment]
            values = [per_target[t][metric] for t in result.targets if t in per_target]
            med, iqr = median_iqr(values)
            row = [metric, treatment]
            row.extend(
                f"{per_target[t][metric]:.4f}" if t in per_target else "-"
                for t in result.targets
            )
            row.extend([f"{med:.4f}", f"{iqr:.4f}"])
            lines.append("\t".join(row))
    (out / "overall_metrics.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_all(config: ExperimentConfig) -> None:
    run_step1(config)
    run_step2(config)
    run_overall(config)
