"""Reference metrics and report builders.

SSIM follows the original publication's defaults: an 11x11 Gaussian
window with sigma 1.5, stabilizers C1=(K1*L)^2, C2=(K2*L)^2 with
K1=0.01, K2=0.03 and dynamic range L=1.0. The local statistics use
valid windows only (no padded border), computed per channel and then
averaged across channels unless ``luma_only`` is requested.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve
from scipy.stats import rankdata

from .validation import (
    check_image,
    check_not_constant,
    check_same_shape,
    check_vector_pair,
)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian window (outer product of the 1-D profile)."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def _ssim_plane(x: np.ndarray, y: np.ndarray, window: np.ndarray,
                c1: float, c2: float) -> float:
    mu_x = fftconvolve(x, window, mode="valid")
    mu_y = fftconvolve(y, window, mode="valid")
    xx = fftconvolve(x * x, window, mode="valid")
    yy = fftconvolve(y * y, window, mode="valid")
    xy = fftconvolve(x * y, window, mode="valid")
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(x, y, *, window_size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA,
         data_range: float = 1.0, luma_only: bool = False) -> float:
    """Mean local structural similarity between two [0, 1] RGB images."""
    xa = check_image(x, "x").astype(np.float64)
    ya = check_image(y, "y").astype(np.float64)
    check_same_shape(xa, ya)
    if xa.shape[0] < window_size or xa.shape[1] < window_size:
        raise ValueError(
            f"images must be at least {window_size}x{window_size} for SSIM")
    window = gaussian_window(window_size, sigma)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    if luma_only:
        w = np.asarray(LUMA_WEIGHTS)
        return _ssim_plane(xa @ w, ya @ w, window, c1, c2)
    channels = [_ssim_plane(xa[:, :, c], ya[:, :, c], window, c1, c2)
                for c in range(3)]
    return float(np.mean(channels))


def plcc(a, b) -> float:
    """Sample Pearson linear correlation coefficient."""
    va, vb = check_vector_pair(a, b)
    check_not_constant(va, "a")
    check_not_constant(vb, "b")
    da = va - va.mean()
    db = vb - vb.mean()
    return float((da @ db) / np.sqrt((da @ da) * (db @ db)))


def srocc(a, b) -> float:
    """Spearman rank-order correlation; ties receive averaged ranks."""
    va, vb = check_vector_pair(a, b)
    check_not_constant(va, "a")
    check_not_constant(vb, "b")
    return plcc(rankdata(va), rankdata(vb))


# ---------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------

@dataclass
class MetricReport:
    """Per-item values plus summary statistics recomputable from them."""

    name: str
    per_item: list[tuple[str, float]]
    summary: dict = field(default_factory=dict)

    def to_json(self, path) -> None:
        payload = {
            "name": self.name,
            "per_item": [{"id": i, "value": v} for i, v in self.per_item],
            "summary": self.summary,
        }
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")

    def to_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "value"])
            for item_id, value in self.per_item:
                writer.writerow([item_id, f"{value:.6f}"])


def _basic_summary(values: np.ndarray) -> dict[str, float]:
    return {"mean": float(np.mean(values)), "median": float(np.median(values))}


def score_diff_report(model, pairs) -> MetricReport:
    """Quality-score deltas (optimized minus baseline) for image pairs.

    ``model`` needs a ``predict_one(image) -> float`` method; ``pairs``
    is a list of (baseline_image, optimized_image, id).
    """
    if not pairs:
        raise ValueError("no image pairs supplied")
    per_item = []
    for baseline, optimized, item_id in pairs:
        diff = float(model.predict_one(optimized) - model.predict_one(baseline))
        per_item.append((str(item_id), diff))
    values = np.array([v for _, v in per_item])
    summary = _basic_summary(values)
    summary["fraction_positive"] = float(np.mean(values > 0))
    return MetricReport("score_diff", per_item, summary)


def preference_report(votes) -> MetricReport:
    """Preference percentages for the first of exactly two methods.

    ``votes`` are two-method trial records (``method_a``, ``method_b``,
    ``choice``, ``content_id``, ``subject_id``); sanity trials are
    dropped. "Ours" is the lexicographically first method id. The
    per-item list carries one ``content:<id>`` row per image and one
    ``subject:<id>`` row per subject, each holding that group's
    preference fraction. For complete studies (every subject votes every
    content) the ``overall`` summary equals the mean of the content rows.
    """
    votes = [v for v in votes if not getattr(v, "is_sanity", False)]
    if not votes:
        raise ValueError("no votes supplied")
    methods = sorted({v.method_a for v in votes} | {v.method_b for v in votes})
    if len(methods) != 2:
        raise ValueError(f"votes must span exactly two methods, got {methods}")
    ours = methods[0]

    def prefers_ours(v) -> bool:
        chosen = v.method_a if v.choice == "A" else v.method_b
        return chosen == ours

    by_content: dict[str, list[bool]] = {}
    by_subject: dict[str, list[bool]] = {}
    total_favor = 0
    for v in votes:
        favored = prefers_ours(v)
        by_content.setdefault(v.content_id, []).append(favored)
        by_subject.setdefault(v.subject_id, []).append(favored)
        total_favor += favored

    per_item = [(f"content:{cid}", float(np.mean(flags)))
                for cid, flags in sorted(by_content.items())]
    per_item += [(f"subject:{sid}", float(np.mean(flags)))
                 for sid, flags in sorted(by_subject.items())]
    subject_rates = np.array([np.mean(flags)
                              for _, flags in sorted(by_subject.items())])
    summary = {
        "overall": total_favor / len(votes),
        "mean_per_subject": float(subject_rates.mean()),
        "fraction_subjects_above_half": float(np.mean(subject_rates > 0.5)),
        "preferred_method": ours,
        "n_votes": len(votes),
    }
    return MetricReport("preference", per_item, summary)
