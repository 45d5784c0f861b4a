"""Per-category actionability tagging with RBF-kernel SVMs trained by
sequential minimal optimization, plus the keyword-match baseline."""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .categories import ActionabilityType, ActionSet
from .corpus import Message
from .features import DenominatorPolicy, FeatureConfig, KeywordList, vectorize
from .informativeness import read_tensors, write_tensors
from .text import EmbeddingTable, tokenize

ENSEMBLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SvmHyperparams:
    C: float = 20.0
    gamma: float = 3.0
    tolerance: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if min(self.C, self.gamma, self.tolerance) <= 0 or self.max_passes <= 0:
            raise ValueError("all hyperparameters must be positive")


@dataclass
class SvmModel:
    category: ActionabilityType
    support_vectors: np.ndarray  # (n_sv, dim)
    dual_coefs: np.ndarray  # alpha_i * y_i per support vector
    bias: float
    hyperparams: SvmHyperparams
    converged: bool = True


@dataclass
class Ensemble:
    models: dict[ActionabilityType, SvmModel]
    keyword_lists: dict[ActionabilityType, KeywordList]
    table: EmbeddingTable
    feature_config: FeatureConfig

    def __post_init__(self):
        missing = [c for c in ActionabilityType if c not in self.models]
        if missing:
            raise ValueError(f"ensemble missing categories: {[c.code for c in missing]}")


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """K(x, y) = exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def _kernel_matrix(x: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def dual_objective(alphas: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> float:
    """SVM dual objective: sum(alpha) - 1/2 * sum_ij alpha_i alpha_j y_i y_j K_ij."""
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ kernel @ ay)


def downsample_negatives(
    positives: Sequence, negatives: Sequence, seed: int
) -> tuple[list, list]:
    """Randomly drop negatives until classes balance; deterministic for seed."""
    if not positives:
        raise ValueError("no positive examples to balance against")
    if len(negatives) <= len(positives):
        return list(positives), list(negatives)
    rng = random.Random(seed)
    sampled = rng.sample(list(negatives), len(positives))
    return list(positives), sampled


def train_svm(
    x: np.ndarray,
    y: np.ndarray,
    hp: SvmHyperparams = SvmHyperparams(),
    seed: int = 0,
    category: ActionabilityType = ActionabilityType.NEEDS,
    objective_log: list[float] | None = None,
) -> SvmModel:
    """Simplified sequential minimal optimization on the SVM dual.

    Sweeps examples for KKT violations within tolerance; each violator is
    paired with a random second index and the pair is optimized in closed
    form.  Converges after a few consecutive change-free sweeps; if the
    max_passes sweep budget runs out first, the best iterate is returned
    flagged non-converged.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if x.shape[0] != n:
        raise ValueError("X and y length mismatch")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("both classes must be present")

    c, tol = hp.C, hp.tolerance
    kernel = _kernel_matrix(x, hp.gamma)
    alphas = np.zeros(n)
    b = 0.0
    rng = random.Random(seed)

    def f(i: int) -> float:
        return float((alphas * y) @ kernel[:, i] + b)

    clean_sweeps_needed = 3
    passes = 0
    total_sweeps = 0
    converged = True
    while passes < clean_sweeps_needed:
        changed = 0
        for i in range(n):
            e_i = f(i) - y[i]
            if not ((y[i] * e_i < -tol and alphas[i] < c) or (y[i] * e_i > tol and alphas[i] > 0)):
                continue
            j = rng.randrange(n - 1)
            if j >= i:
                j += 1
            e_j = f(j) - y[j]
            a_i_old, a_j_old = alphas[i], alphas[j]
            if y[i] != y[j]:
                low = max(0.0, a_j_old - a_i_old)
                high = min(c, c + a_j_old - a_i_old)
            else:
                low = max(0.0, a_i_old + a_j_old - c)
                high = min(c, a_i_old + a_j_old)
            if low >= high:
                continue
            eta = 2.0 * kernel[i, j] - kernel[i, i] - kernel[j, j]
            if eta >= 0:
                continue
            a_j = a_j_old - y[j] * (e_i - e_j) / eta
            a_j = min(high, max(low, a_j))
            if abs(a_j - a_j_old) < 1e-7:
                continue
            a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
            alphas[i], alphas[j] = a_i, a_j
            b1 = b - e_i - y[i] * (a_i - a_i_old) * kernel[i, i] - y[j] * (a_j - a_j_old) * kernel[i, j]
            b2 = b - e_j - y[i] * (a_i - a_i_old) * kernel[i, j] - y[j] * (a_j - a_j_old) * kernel[j, j]
            if 0 < a_i < c:
                b = b1
            elif 0 < a_j < c:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            changed += 1
            if objective_log is not None:
                objective_log.append(dual_objective(alphas, y, kernel))
        total_sweeps += 1
        if changed == 0:
            passes += 1
        else:
            passes = 0
        if total_sweeps >= hp.max_passes:
            converged = False
            break

    sv_mask = alphas > 1e-8
    if not np.any(sv_mask):
        # Degenerate but possible on pathological data: keep the best-scoring
        # point so the model remains usable.
        sv_mask[np.argmax(alphas)] = True
    return SvmModel(
        category=category,
        support_vectors=x[sv_mask].copy(),
        dual_coefs=(alphas * y)[sv_mask].copy(),
        bias=b,
        hyperparams=hp,
        converged=converged,
    )


def decision_value(model: SvmModel, features: np.ndarray) -> float:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.support_vectors.shape[1],):
        raise ValueError(
            f"feature dimension {features.shape} does not match model "
            f"({model.support_vectors.shape[1]})"
        )
    diff = model.support_vectors - features[None, :]
    k = np.exp(-model.hyperparams.gamma * np.sum(diff * diff, axis=1))
    return float(model.dual_coefs @ k + model.bias)


def classify_one(model: SvmModel, features: np.ndarray) -> tuple[int, float]:
    """(label, margin). A zero margin maps to +1: recall-favoring boundary."""
    margin = decision_value(model, features)
    return (1 if margin >= 0 else -1), margin


def keyword_baseline(tokens: Sequence[str], keywords: KeywordList) -> int:
    """+1 iff any document token equals any keyword, case-insensitively."""
    kw = {k.lower() for k in keywords.keywords}
    return 1 if any(t.lower() in kw for t in tokens) else -1


def classify_actionability(
    ensemble: Ensemble,
    message: Message,
    informativeness_gate: Callable[[Message], bool] | None = None,
) -> ActionSet:
    """Pooled per-category verdicts for one message.

    When a gate is supplied, gate-rejected messages are never vectorized or
    classified: the informativeness filter runs first in the pipeline.
    """
    if informativeness_gate is not None and not informativeness_gate(message):
        return frozenset()
    tokens = tokenize(message.text)
    positive: set[ActionabilityType] = set()
    for category in ActionabilityType:
        fv = vectorize(
            tokens, ensemble.keyword_lists[category], ensemble.table, ensemble.feature_config
        )
        label, _ = classify_one(ensemble.models[category], fv.values)
        if label > 0:
            positive.add(category)
    return frozenset(positive)


def load_tagged_jsonl(path: str | Path) -> list[tuple[Message, ActionSet]]:
    """Load actionability-labeled records: id, text, optional timestamp, actions: [codes]."""
    import json

    from .corpus import Source

    tagged: list[tuple[Message, ActionSet]] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            source = Source(rec["source"]) if "source" in rec else Source.OTHER
            message = Message(
                id=str(rec["id"]),
                text=rec["text"],
                timestamp=int(rec["timestamp"]) if "timestamp" in rec else None,
                source=source,
            )
            actions = frozenset(ActionabilityType.from_code(c) for c in rec.get("actions", []))
            tagged.append((message, actions))
    return tagged


def train_ensemble(
    tagged: Sequence[tuple[Message, ActionSet]],
    keyword_lists: dict[ActionabilityType, KeywordList],
    table: EmbeddingTable,
    feature_config: FeatureConfig = FeatureConfig(),
    hp: SvmHyperparams = SvmHyperparams(),
    seed: int = 0,
) -> Ensemble:
    """Train all nine per-category classifiers with negative downsampling."""
    token_cache = {m.id: tokenize(m.text) for m, _ in tagged}
    models: dict[ActionabilityType, SvmModel] = {}
    for offset, category in enumerate(ActionabilityType):
        positives = [m for m, actions in tagged if category in actions]
        negatives = [m for m, actions in tagged if category not in actions]
        if not positives or not negatives:
            raise ValueError(f"category {category.code}: need both positive and negative examples")
        positives, negatives = downsample_negatives(positives, negatives, seed + offset)
        kws = keyword_lists[category]
        x_rows = []
        y_rows = []
        for m in positives + negatives:
            x_rows.append(vectorize(token_cache[m.id], kws, table, feature_config).values)
            y_rows.append(1.0 if m in positives else -1.0)
        models[category] = train_svm(
            np.array(x_rows), np.array(y_rows), hp, seed=seed + offset, category=category
        )
    return Ensemble(models, keyword_lists, table, feature_config)


# ---------------------------------------------------------------------------
# Grid search


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    pos = [i for i in range(len(y)) if y[i] > 0]
    neg = [i for i in range(len(y)) if y[i] <= 0]
    rng = random.Random(seed)
    rng.shuffle(pos)
    rng.shuffle(neg)
    assignments = [[] for _ in range(folds)]
    for rank, i in enumerate(pos):
        assignments[rank % folds].append(i)
    for rank, i in enumerate(neg):
        assignments[rank % folds].append(i)
    return [np.array(sorted(a), dtype=np.int64) for a in assignments]


@dataclass
class GridSearchResult:
    scores: dict[tuple[float, float], float]  # (C, gamma) -> mean F1
    best: tuple[float, float]

    def heatmap_rows(self) -> list[tuple[float, float, float]]:
        return [(c, g, self.scores[(c, g)]) for (c, g) in sorted(self.scores)]


DEFAULT_C_GRID = (0.5, 1.0, 5.0, 10.0, 20.0, 50.0)
DEFAULT_GAMMA_GRID = (0.1, 0.5, 1.0, 3.0, 10.0)


def grid_search(
    x: np.ndarray,
    y: np.ndarray,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
    folds: int = 3,
    seed: int = 0,
) -> GridSearchResult:
    """Mean cross-validated F1 per (C, gamma) cell.

    Ties break toward smaller gamma, then smaller C: small gamma keeps
    single examples from distorting the boundary.
    """
    from .evaluation import confusion, metrics

    if not c_grid or not gamma_grid:
        raise ValueError("grids must be non-empty")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fold_indices = _stratified_folds(y, folds, seed)
    for k, test_idx in enumerate(fold_indices):
        train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
        if not np.any(y[train_idx] > 0) or not np.any(y[train_idx] < 0):
            raise ValueError(f"fold {k} leaves a training side without positives; use fewer folds")

    scores: dict[tuple[float, float], float] = {}
    for c in c_grid:
        for g in gamma_grid:
            hp = SvmHyperparams(C=c, gamma=g)
            f1s = []
            for k, test_idx in enumerate(fold_indices):
                train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
                model = train_svm(x[train_idx], y[train_idx], hp, seed=seed + k)
                preds = [classify_one(model, x[i])[0] for i in test_idx]
                f1s.append(metrics(confusion(preds, list(y[test_idx].astype(int)))).f1)
            scores[(c, g)] = float(np.mean(f1s))
    best = max(scores, key=lambda cg: (scores[cg], -cg[1], -cg[0]))
    return GridSearchResult(scores, best)


# ---------------------------------------------------------------------------
# Ensemble persistence: one versioned file bundling all nine models,
# keyword lists, the embedding table, and the feature config.

_MAGIC = b"CTAC"


def save_ensemble(ensemble: Ensemble, path: str | Path) -> None:
    import json

    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", ENSEMBLE_FORMAT_VERSION))
        header = {
            "feature_config": {
                "cutoff": ensemble.feature_config.cutoff,
                "denominator_policy": ensemble.feature_config.denominator_policy.value,
            },
            "keyword_lists": {
                c.code: list(ensemble.keyword_lists[c].keywords) for c in ActionabilityType
            },
            "models": {
                c.code: {
                    "bias": m.bias,
                    "C": m.hyperparams.C,
                    "gamma": m.hyperparams.gamma,
                    "tolerance": m.hyperparams.tolerance,
                    "max_passes": m.hyperparams.max_passes,
                    "converged": m.converged,
                }
                for c, m in ensemble.models.items()
            },
            "embedding_dimension": ensemble.table.dimension,
        }
        encoded = json.dumps(header, sort_keys=True).encode("utf-8")
        f.write(struct.pack("<I", len(encoded)))
        f.write(encoded)
        tensors: dict[str, np.ndarray] = {}
        for c, m in ensemble.models.items():
            tensors[f"{c.code}_sv"] = m.support_vectors
            tensors[f"{c.code}_coef"] = m.dual_coefs
        words = sorted(ensemble.table._entries)
        vocab_blob = "\n".join(words).encode("utf-8")
        f.write(struct.pack("<I", len(vocab_blob)))
        f.write(vocab_blob)
        if words:
            tensors["embeddings"] = np.stack([ensemble.table._entries[w] for w in words])
        write_tensors(f, tensors)


def load_ensemble(path: str | Path) -> Ensemble:
    import json

    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not an ensemble file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != ENSEMBLE_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        (header_len,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(header_len).decode("utf-8"))
        (vocab_len,) = struct.unpack("<I", f.read(4))
        vocab_blob = f.read(vocab_len).decode("utf-8")
        words = vocab_blob.split("\n") if vocab_blob else []
        tensors = read_tensors(f)

    dim = header["embedding_dimension"]
    entries = {}
    if words:
        vectors = tensors["embeddings"]
        entries = {w: vectors[i] for i, w in enumerate(words)}
    table = EmbeddingTable(dim, entries)
    fc = FeatureConfig(
        cutoff=header["feature_config"]["cutoff"],
        denominator_policy=DenominatorPolicy(header["feature_config"]["denominator_policy"]),
    )
    keyword_lists = {
        ActionabilityType.from_code(code): KeywordList(
            ActionabilityType.from_code(code), tuple(words_)
        )
        for code, words_ in header["keyword_lists"].items()
    }
    models = {}
    for code, meta in header["models"].items():
        cat = ActionabilityType.from_code(code)
        models[cat] = SvmModel(
            category=cat,
            support_vectors=tensors[f"{code}_sv"],
            dual_coefs=tensors[f"{code}_coef"],
            bias=meta["bias"],
            hyperparams=SvmHyperparams(
                C=meta["C"],
                gamma=meta["gamma"],
                tolerance=meta["tolerance"],
                max_passes=meta["max_passes"],
            ),
            converged=meta["converged"],
        )
    return Ensemble(models, keyword_lists, table, fc)
