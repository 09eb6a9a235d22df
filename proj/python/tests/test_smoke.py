# Copyright (C) 2026 The cultdiff Authors
# SPDX-License-Identifier: Apache-2.0

from fractions import Fraction

import numpy as np
import pytest

import cultdiff


def test_prompt_goldens():
    assert (
        cultdiff.render_prompt("US", "architecture", "the Empire State Building")
        == "A panoramic view of the Empire State Building in the United States, realistic"
    )
    assert cultdiff.render_prompt("CN", "clothing", "Hanfu") == "An image of Hanfu from Chinese clothing, realistic"
    assert cultdiff.render_prompt("AZ", "food", "plov") == "An image of plov from Azerbaijani cuisine, realistic"


def test_loss_examples():
    assert cultdiff.weighted_margin_loss([0.0], [1], [1.0]) == 0.0
    assert cultdiff.weighted_margin_loss([1.2], [0], [1.0]) == 0.0
    got = cultdiff.weighted_margin_loss([0.4, 0.6], [1, 0], [1.0, 1.0])
    want = (Fraction(4, 10) ** 2 + Fraction(4, 10) ** 2) / 2
    assert got == pytest.approx(float(want), abs=1e-15)
    assert cultdiff.weighted_margin_loss([0.8], [1], [0.5]) == pytest.approx(0.32, abs=1e-15)
    got = cultdiff.weighted_margin_loss([0.8, 0.4], [1, 0], [0.5, 1.0])
    assert got == pytest.approx(float((Fraction(8, 25) + Fraction(9, 25)) / 2), abs=1e-15)
    with pytest.raises(cultdiff.Error) as info:
        cultdiff.weighted_margin_loss([], [], [])
    assert info.value.code == "EmptyBatch"


def test_statistics():
    x = [1.0, 2.0, 3.0, 4.0]
    assert cultdiff.spearman(x, [10.0, 20.0, 30.0, 40.0]) == pytest.approx(1.0)
    assert cultdiff.kendall_tau_b(x, [4.0, 3.0, 2.0, 1.0]) == pytest.approx(-1.0)
    assert cultdiff.pearson(x, [5.0] * 4) is None
    assert cultdiff.fleiss_kappa([[3, 0], [0, 3], [3, 0]]) == 1.0
    assert cultdiff.normalize_score(3.0) == 0.5
    assert cultdiff.human_pair_score([[3, 3, 3, 3], [5, 5, 5, 5]]) == 4.0


def test_baseline_identities():
    rng = np.random.default_rng(0)
    img = rng.random((24, 24, 3), dtype=np.float32)
    assert cultdiff.ssim(img, img) == pytest.approx(1.0, abs=1e-6)
    assert cultdiff.lpips(img, img) == pytest.approx(0.0, abs=1e-6)
    ref = [1.0, 2.0, 3.0]
    assert cultdiff.per_pair_fid([ref, ref, ref], [0.0, 0.0, 0.0]) == 14.0


def test_fixture_pipeline(tmp_path):
    config = cultdiff.write_fixture(str(tmp_path / "fx"))
    first = cultdiff.run_pipeline(str(config), "prompts,collect,generate,survey,pairs")
    assert first["exit_code"] == 0, first["message"]
    pairs = first["stages"][-1]["manifest"]["outputs"]
    assert (pairs["val"], pairs["test"]) == (108, 108)
    again = cultdiff.run_pipeline(str(config), "prompts")
    assert again["stages"][0]["skipped"]
    missing = cultdiff.run_pipeline(str(config), "eval")
    assert missing["exit_code"] == 2
    assert "train" in missing["message"]
