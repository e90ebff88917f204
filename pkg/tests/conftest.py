"""Shared fixtures: the canonical binary instance and acceptance reporting."""

import json
import pathlib

import numpy as np
import pytest

from cdptradeoff import (
    Channel,
    DecisionRegion,
    DistortionMatrix,
    DivergenceKind,
    MixtureSource,
    ProblemInstance,
)

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def canonical_source():
    """Equal-prior binary mixture with class-conditionals [0.8, 0.2] / [0.2, 0.8]."""
    return MixtureSource.from_masses(0.5, 0.5, [0.8, 0.2], [0.2, 0.8])


@pytest.fixture
def canonical_problem(canonical_source):
    """Factory for the flip-0.1 binary instance with a configurable divergence."""

    def build(kind=None, classifier_indices=(0,), degrade=None):
        kind = kind if kind is not None else DivergenceKind.total_variation()
        degrade = degrade if degrade is not None else Channel.bsc(0.1)
        delta = DistortionMatrix.hamming(canonical_source.alphabet)
        cls = DecisionRegion.from_indices(canonical_source.alphabet, list(classifier_indices))
        return ProblemInstance(canonical_source, degrade, canonical_source.alphabet, delta, kind, cls)

    return build


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR


def load_fixture(name):
    with open(FIXTURE_DIR / name, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Acceptance reporting: test_acceptance records one line per criterion and the
# terminal summary prints them after the run, pass or fail.
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES = []


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion, then enforce it."""

    def check(num, label, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        record_acceptance(f"[{status}] criterion {num:2d}: {label}{suffix}")
        assert ok, f"criterion {num}: {label}{suffix}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
