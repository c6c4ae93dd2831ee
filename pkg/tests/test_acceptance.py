"""Acceptance suite: every headline claim at its stated tolerance.

Each test prints one pass/fail line with the measured values.  The
experiment-backed criteria share module-scoped runs at desk scale
(10x10 games, full 50x25 constrained problems, T as configured).

Run with ``pytest tests/test_acceptance.py -s`` to see the lines stream.
"""

import pytest

from optbandits.harness import run_experiment
from optbandits.verify import (
    acceptance_configs,
    check_bandit_regret_ceiling,
    check_constrained_bandit,
    check_counterexample_regret,
    check_counterexample_values,
    check_game_ordering,
    check_membership,
    check_negative_control,
    check_oracle_equivalences,
    check_perspective_identity,
    check_pigeonhole,
    check_sandwich,
    check_uniform_gaussian_bound,
)

CONFIGS = acceptance_configs()


@pytest.fixture(scope="module")
def run_counterexample():
    return run_experiment(CONFIGS["counterexample"])


@pytest.fixture(scope="module")
def run_bandit():
    return run_experiment(CONFIGS["bandit"])


@pytest.fixture(scope="module")
def run_game():
    return run_experiment(CONFIGS["game_bestresponse"])


@pytest.fixture(scope="module")
def run_constrained():
    return run_experiment(CONFIGS["constrained"])


def _report(outcome):
    print(outcome.line())
    assert outcome.passed, outcome.line()


def test_criterion_01_counterexample_values():
    _report(check_counterexample_values({}))


def test_criterion_02_counterexample_regret(run_counterexample):
    _report(check_counterexample_regret({"counterexample": run_counterexample}))


def test_criterion_03_bandit_regret_ceiling(run_bandit):
    _report(check_bandit_regret_ceiling({"bandit": run_bandit}))


def test_criterion_04_sandwich():
    _report(check_sandwich({}))


def test_criterion_05_perspective_identity():
    _report(check_perspective_identity({}))


def test_criterion_06_uniform_gaussian_bound():
    _report(check_uniform_gaussian_bound({}))


def test_criterion_07_game_ordering(run_game):
    _report(check_game_ordering({"game_bestresponse": run_game}))


def test_criterion_08_constrained_bandit(run_constrained):
    _report(check_constrained_bandit({"constrained": run_constrained}))


def test_criterion_09_membership(run_counterexample, run_bandit, run_game,
                                 run_constrained):
    _report(check_membership({
        "counterexample": run_counterexample,
        "bandit": run_bandit,
        "game_bestresponse": run_game,
        "constrained": run_constrained,
    }))


def test_criterion_10_oracle_equivalences():
    _report(check_oracle_equivalences({}))


def test_criterion_11_pigeonhole():
    _report(check_pigeonhole({}))


def test_negative_control_detects_mismodeled_prior():
    _report(check_negative_control({}))
