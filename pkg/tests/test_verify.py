from dataclasses import replace

import numpy as np
import pytest

from modules.verify import SCALES, _trial_parameters, trajectory_contraction_suite


@pytest.fixture
def tiny_scale():
    return replace(SCALES["quick"], contraction_R=2.0, contraction_spacing=0.25, pair_T=0.1)


def test_trial_parameters_cover_every_combination():
    combos = {_trial_parameters(trial) for trial in range(12)}
    assert len(combos) == 12
    assert {m for m, _, _ in combos} == {1.0, 2.0, 3.0}
    assert {eps for _, eps, _ in combos} == {0.1, 0.01}
    assert {rho for _, _, rho in combos} == {"one", "cauchy-decay"}


def test_trajectory_pairs_contract(tiny_scale):
    report = trajectory_contraction_suite(tiny_scale, np.random.default_rng(5), trials=4, workers=2)
    checks = {check.name: check for check in report.checks}
    assert set(checks) == {"contraction", "ordering"}
    assert report.metrics["trials"] == 4
    assert report.passed


def test_trajectory_pairs_are_seeded(tiny_scale):
    first = trajectory_contraction_suite(tiny_scale, np.random.default_rng(9), trials=3)
    second = trajectory_contraction_suite(tiny_scale, np.random.default_rng(9), trials=3)
    assert [c.value for c in first.checks] == [c.value for c in second.checks]
    assert first.metrics == second.metrics
