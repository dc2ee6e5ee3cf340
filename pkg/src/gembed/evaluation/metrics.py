"""
MRR, Hits@k and report files.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..utils.errors import EvaluationError

DEFAULT_K = (1, 5, 10)
HISTOGRAM_EDGES = (1, 2, 4, 11, 101, 1001)


def _bin_labels() -> List[str]:
    labels = []
    for lo, hi in zip(HISTOGRAM_EDGES, HISTOGRAM_EDGES[1:]):
        labels.append(str(lo) if hi == lo + 1 else f"{lo}-{hi - 1}")
    labels.append(f">{HISTOGRAM_EDGES[-1] - 1}")
    return labels


def rank_histogram(ranks: np.ndarray) -> Dict[str, int]:
    bins = np.searchsorted(HISTOGRAM_EDGES, ranks, side="right") - 1
    counts = np.bincount(bins, minlength=len(HISTOGRAM_EDGES))
    return {label: int(c) for label, c in zip(_bin_labels(), counts)}


def _scores(ranks: np.ndarray, k_list: Sequence[int]) -> Dict[str, float]:
    out = {"mrr": float(np.mean(1.0 / ranks))}
    for k in k_list:
        out[f"hits@{k}"] = float(np.mean(ranks <= k))
    return out


@dataclass
class EvalReport:
    mrr: float
    hits: Dict[int, float]
    num_candidates: int
    histogram: Dict[str, int]
    by_side: Dict[str, Dict[str, float]] = field(default_factory=dict)
    split: str = ""
    filtered: bool = False
    num_negatives: int = 0

    def as_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "split": self.split,
            "filtered": self.filtered,
            "num_negatives": self.num_negatives,
            "candidates": self.num_candidates,
            "mrr": self.mrr,
        }
        for k, value in sorted(self.hits.items()):
            row[f"hits@{k}"] = value
        for side, scores in sorted(self.by_side.items()):
            for name, value in scores.items():
                row[f"{side}_{name}"] = value
        return row

    def histogram_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"rank_bin": list(self.histogram), "count": list(self.histogram.values())})

    def write_csv(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / "eval_report.csv"
        histogram_path = out / "rank_histogram.csv"
        pd.DataFrame([self.as_row()]).to_csv(report_path, index=False)
        self.histogram_frame().to_csv(histogram_path, index=False)
        return {"report": report_path, "histogram": histogram_path}

    def summary(self) -> str:
        mode = "filtered" if self.filtered else f"unfiltered, {self.num_negatives} negatives"
        hits = "  ".join(f"Hits@{k} {v:.4f}" for k, v in sorted(self.hits.items()))
        return f"{self.split or 'eval'} ({mode}): MRR {self.mrr:.4f}  {hits}  |C|={self.num_candidates}"


def aggregate(
    ranks: Union[np.ndarray, Sequence[int]],
    k_list: Sequence[int] = DEFAULT_K,
    by_side: Optional[Mapping[str, np.ndarray]] = None,
) -> EvalReport:
    """
    MRR = mean(1 / r) and Hits@k = mean(r <= k) over every candidate rank.

    Args:
        ranks: Ranks of both corruption sides pooled
        k_list: Cut-offs for Hits@k
        by_side: Optional per-side ranks for the breakdown
    """
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        raise EvaluationError("no ranks to aggregate")
    if ranks.min() < 1:
        raise EvaluationError(f"ranks start at 1, got {int(ranks.min())}")
    k_list = sorted(set(int(k) for k in k_list))
    scores = _scores(ranks, k_list)
    sides = {
        side: _scores(np.asarray(side_ranks, dtype=np.int64), k_list)
        for side, side_ranks in (by_side or {}).items()
        if len(side_ranks)
    }
    return EvalReport(
        mrr=scores["mrr"],
        hits={k: scores[f"hits@{k}"] for k in k_list},
        num_candidates=int(ranks.size),
        histogram=rank_histogram(ranks),
        by_side=sides,
    )
