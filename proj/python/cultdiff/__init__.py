# Copyright (C) 2026 The cultdiff Authors
# SPDX-License-Identifier: Apache-2.0
"""Culture-aware image similarity toolkit (Python bindings)."""

from ._core import (
    Error,
    fleiss_kappa,
    human_pair_score,
    kendall_tau_b,
    kendall_tau_c,
    lpips,
    normalize_score,
    pearson,
    per_pair_fid,
    render_prompt,
    run_pipeline,
    spearman,
    ssim,
    weighted_margin_loss,
    write_fixture,
)

__all__ = [
    "Error",
    "fleiss_kappa",
    "human_pair_score",
    "kendall_tau_b",
    "kendall_tau_c",
    "lpips",
    "normalize_score",
    "pearson",
    "per_pair_fid",
    "render_prompt",
    "run_pipeline",
    "spearman",
    "ssim",
    "weighted_margin_loss",
    "write_fixture",
]
