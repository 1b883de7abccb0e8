import os
import re
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from myoprop.synth import SynthConfig, generate_session, generate_trials, training_script  # noqa: E402

STUDY_SEED = 7


@pytest.fixture(scope="session")
def study_config():
    return SynthConfig(seed=STUDY_SEED)


@pytest.fixture(scope="session")
def study_training(study_config):
    """Four study gestures at full activation, three repetitions (blocks)."""
    return generate_session(training_script(), study_config, repetitions=3)


@pytest.fixture(scope="session")
def study_trial_recording(study_config):
    return generate_trials(study_config, repeats=3)


_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.failed:
        _acceptance[report.nodeid.split("::")[-1]] = "error"


def _criterion_number(name):
    m = re.match(r"test_criterion_(\d+)", name)
    return (int(m.group(1)) if m else 10**6, name)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=_criterion_number):
        outcome = _acceptance[name]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
