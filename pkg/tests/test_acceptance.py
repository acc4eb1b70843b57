"""Acceptance gate: the package's shipped claims, run end to end.

The full matrix (ground-state certification in two dimensions and three
couplings, sharp-constant agreement, ensemble sharpness, exact blow-up
tracking with order measurement, rate fitting, conservation and Hardy
sandwich, the global gradient bound, virial identities and mass
concentration) runs once per session through invsqnls.verify; each
criterion is asserted separately so a failure names exactly what broke.
"""

import json

import pytest

from invsqnls import verify

CRITERION_NAMES = [name for name, _ in verify.CRITERIA]


@pytest.fixture(scope="session")
def acceptance_results():
    results = verify.run_all(seed=0)
    return {res.name: res for res in results}


@pytest.mark.parametrize("name", CRITERION_NAMES)
def test_criterion(acceptance_results, name):
    res = acceptance_results[name]
    assert res.passed, f"{name} FAILED: {json.dumps(res.details, indent=2, default=str)}"


def test_every_criterion_ran(acceptance_results):
    assert sorted(acceptance_results) == sorted(CRITERION_NAMES)
    assert len(CRITERION_NAMES) == 10
