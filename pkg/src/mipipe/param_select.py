"""Transductive parameter selection.

Candidates are ranked without test labels: a class-balance gate on the signs
of the test scores, then maximization of the correlation between 40-bin
histograms of train and test classifier outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classify import LdaModel, fit_lda, lda_score
from .config import PipelineConfig, SearchSpace
from .data_model import Trial, TrialSet
from .errors import CriterionUndefinedError
from .features import csp_feature, fit_csp
from .preprocess import bandpass_zero_phase, crop

N_BINS = 40
FEASIBILITY_THRESHOLD = 0.15


@dataclass(frozen=True)
class PdfEstimate:
    bin_edges: np.ndarray  # 41 equally spaced edges
    mass: np.ndarray  # 40 nonnegative masses summing to 1

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if edges.shape != (N_BINS + 1,) or mass.shape != (N_BINS,):
            raise ValueError("expected 41 edges and 40 masses")
        widths = np.diff(edges)
        if np.any(widths <= 0) or np.ptp(widths) > 1e-9 * widths[0]:
            raise ValueError("bin edges must be strictly increasing, equal width")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError("mass must be nonnegative and sum to 1")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "mass", mass)


def estimate_pdf(scores: Sequence[float], score_range: tuple[float, float]) -> PdfEstimate:
    """40-bin normalized histogram; out-of-range scores clip to the end bins."""
    scores = np.asarray(scores, dtype=float)
    lo, hi = score_range
    if len(scores) == 0:
        raise ValueError("empty scores")
    if not hi > lo:
        raise ValueError(f"degenerate range ({lo}, {hi})")
    edges = np.linspace(lo, hi, N_BINS + 1)
    counts, _ = np.histogram(np.clip(scores, lo, hi), bins=edges)
    return PdfEstimate(bin_edges=edges, mass=counts / counts.sum())


def class_balance_penalty(test_scores: Sequence[float]) -> float:
    """|P(+1) - 0.5| where score 0 counts as +1, matching lda_predict."""
    scores = np.asarray(test_scores, dtype=float)
    if len(scores) == 0:
        raise ValueError("empty scores")
    return abs(float(np.mean(scores >= 0)) - 0.5)


def pdf_correlation(train: PdfEstimate, test: PdfEstimate) -> float:
    """Pearson correlation between the two histograms' bin masses."""
    if not np.allclose(train.bin_edges, test.bin_edges, rtol=0, atol=0):
        raise ValueError("histograms have different bin edges")
    for pdf, name in ((train, "train"), (test, "test")):
        if np.ptp(pdf.mass) == 0:
            raise CriterionUndefinedError(
                f"criterion undefined: {name} histogram is flat"
            )
    return float(np.corrcoef(train.mass, test.mass)[0, 1])


@dataclass(frozen=True)
class SearchResult:
    config: PipelineConfig
    rho: float
    balance_penalty: float
    table: tuple[dict, ...]
    winner_index: int


def _prep_trials(ts: TrialSet, band, window, channels) -> list[Trial]:
    fs = ts.sampling_rate_hz
    out = []
    for t in ts:
        data = t.data if channels is None else t.data[list(channels)]
        trial = Trial(data, t.label, t.session_id, t.trial_index)
        trial = bandpass_zero_phase(trial, fs, *band)
        out.append(crop(trial, fs, *window))
    return out


def _stratified_folds(labels: np.ndarray, max_folds: int = 10) -> list[np.ndarray]:
    """Deterministic round-robin fold assignment within each class."""
    neg = np.flatnonzero(labels == -1)
    pos = np.flatnonzero(labels == 1)
    n_folds = min(max_folds, len(neg), len(pos))
    if n_folds < 2:
        raise ValueError("too few labeled trials per class for cross-validation")
    folds = [[] for _ in range(n_folds)]
    for block in (neg, pos):
        for i, idx in enumerate(block):
            folds[i % n_folds].append(idx)
    return [np.array(sorted(f)) for f in folds]


def _fit_and_score(train_trials, train_labels, score_trials, m):
    neg = [t for t, y in zip(train_trials, train_labels) if y == -1]
    pos = [t for t, y in zip(train_trials, train_labels) if y == 1]
    model = fit_csp(neg, pos, m)
    feats = [csp_feature(model, t) for t in train_trials]
    lda = fit_lda(feats, train_labels)
    # unit-norm hyperplane: scores become signed distances, so fold models
    # and the full-fit model land on one comparable scale
    norm = float(np.linalg.norm(lda.w))
    lda = LdaModel(w=lda.w / norm, b=lda.b / norm)
    return [lda_score(lda, csp_feature(model, t)) for t in score_trials]


def candidate_scores(
    train: TrialSet, test: TrialSet, band, window, channels, m
) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold train scores and full-fit test scores for one candidate."""
    train_trials = _prep_trials(train, band, window, channels)
    test_trials = _prep_trials(test, band, window, channels)
    labels = np.array([t.label for t in train.trials])

    train_scores = np.empty(len(train_trials))
    for fold in _stratified_folds(labels):
        mask = np.ones(len(train_trials), dtype=bool)
        mask[fold] = False
        fit_part = [train_trials[i] for i in np.flatnonzero(mask)]
        scores = _fit_and_score(fit_part, labels[mask], [train_trials[i] for i in fold], m)
        train_scores[fold] = scores

    test_scores = np.array(_fit_and_score(train_trials, labels, test_trials, m))
    return train_scores, test_scores


def grid_search(
    train: TrialSet,
    test_unlabeled: TrialSet,
    space: SearchSpace,
    base: PipelineConfig | None = None,
    feasibility_threshold: float = FEASIBILITY_THRESHOLD,
) -> SearchResult:
    """Evaluate every candidate and pick the winner.

    Feasible candidates (balance penalty <= threshold) compete on rho; if none
    is feasible the fallback objective is rho - penalty. Test labels are never
    read. Ties break by enumeration order.
    """
    if base is None:
        base = PipelineConfig()
    if len(test_unlabeled) == 0:
        raise ValueError("test set is empty")
    labels = [t.label for t in train.trials]
    if -1 not in labels or 1 not in labels:
        raise ValueError("training set must contain both classes")

    candidates = list(itertools.product(
        space.bands_hz, space.windows_s, space.channel_sets, space.m_values
    ))
    table = []
    failures = []
    for band, window, channels, m in candidates:
        row = {
            "band_hz": band, "window_s": window,
            "channels": channels, "m": m,
            "rho": None, "penalty": None, "feasible": False, "error": None,
        }
        try:
            tr_scores, te_scores = candidate_scores(
                train, test_unlabeled, band, window, channels, m
            )
            pooled = np.r_[tr_scores, te_scores]
            lo, hi = float(pooled.min()), float(pooled.max())
            if not hi > lo:
                raise CriterionUndefinedError(
                    "criterion undefined: all scores identical"
                )
            rho = pdf_correlation(
                estimate_pdf(tr_scores, (lo, hi)), estimate_pdf(te_scores, (lo, hi))
            )
            penalty = class_balance_penalty(te_scores)
            row.update(
                rho=rho, penalty=penalty,
                feasible=penalty <= feasibility_threshold,
            )
        except CriterionUndefinedError as exc:
            row["error"] = str(exc)
        except ValueError as exc:
            row["error"] = str(exc)
            failures.append(f"band={band} window={window} m={m}: {exc}")
        table.append(row)

    scored = [(i, r) for i, r in enumerate(table) if r["rho"] is not None]
    if not scored:
        raise ValueError(
            "all candidates failed:\n" + "\n".join(failures or ["(flat histograms)"])
        )
    feasible = [(i, r) for i, r in scored if r["feasible"]]
    if feasible:
        winner_index, winner = max(feasible, key=lambda ir: ir[1]["rho"])
    else:
        winner_index, winner = max(
            scored, key=lambda ir: ir[1]["rho"] - ir[1]["penalty"]
        )

    config = base.replace(
        preprocess=base.preprocess.__class__(
            band_hz=winner["band_hz"],
            lowpass_hz=base.preprocess.lowpass_hz,
            spatial_ref=base.preprocess.spatial_ref,
            window_s=winner["window_s"],
            baseline_window_s=base.preprocess.baseline_window_s,
        ),
        m=winner["m"],
        channels=winner["channels"],
    )
    return SearchResult(
        config=config,
        rho=winner["rho"],
        balance_penalty=winner["penalty"],
        table=tuple(table),
        winner_index=winner_index,
    )
