"""Localization of anomalous rectangular patches on lattices."""

from ._core import (
    ConvergenceError,
    DegenerateInput,
    Detection,
    DomainError,
    Error,
    FormatError,
    NoCandidate,
    Rect,
    algorithm1,
    ari,
    detect,
    hausdorff,
    inject,
    jaccard_distance,
    load_grid,
    load_patch_doc,
    naive_ls,
    noise,
    save_grid,
    save_patch_doc,
    scenario,
    thread_count,
    threshold_q,
)

__all__ = [
    "ConvergenceError",
    "DegenerateInput",
    "Detection",
    "DomainError",
    "Error",
    "FormatError",
    "NoCandidate",
    "Rect",
    "algorithm1",
    "ari",
    "detect",
    "hausdorff",
    "inject",
    "jaccard_distance",
    "load_grid",
    "load_patch_doc",
    "naive_ls",
    "noise",
    "save_grid",
    "save_patch_doc",
    "scenario",
    "thread_count",
    "threshold_q",
]
