"""Evaluation metrics, attack metrics, defense detectors, and rendering."""

from .clustering import ClusterReport, activation_cluster, ica_reduce, kmeans2, whiten
from .metrics import (
    AttackReport,
    EvalReport,
    asr_dc,
    episode_seeds,
    evaluate_policy,
    mean_sd,
    pvr,
    report_from_rows,
    rollout_episode,
)
from .spectral import rank_auc, spectral_scores, top_right_singular_vector
from .svgplot import parse_trace_csv, render_trajectories, speed_color

__all__ = [
    "ClusterReport",
    "activation_cluster",
    "ica_reduce",
    "kmeans2",
    "whiten",
    "AttackReport",
    "EvalReport",
    "asr_dc",
    "episode_seeds",
    "evaluate_policy",
    "mean_sd",
    "pvr",
    "report_from_rows",
    "rollout_episode",
    "rank_auc",
    "spectral_scores",
    "top_right_singular_vector",
    "parse_trace_csv",
    "render_trajectories",
    "speed_color",
]
