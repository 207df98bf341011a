import math

import pytest

from hybridcat.fock_dense import TruncationPolicy


@pytest.fixture(scope="session")
def op_point():
    """The headline on-off operating point: alpha=2, r*alpha/sqrt(2)=0.075."""
    alpha = 2.0
    r_alpha = 0.075 * math.sqrt(2.0)
    return {"alpha": alpha, "r_alpha": r_alpha, "r": r_alpha / alpha, "eta": 0.95}


@pytest.fixture(scope="session")
def squeezed_point():
    """The squeezed-input operating point: alpha=0.25, zeta=-0.061."""
    alpha = 0.25
    r_alpha = 0.075 * math.sqrt(2.0)
    return {
        "alpha": alpha,
        "r_alpha": r_alpha,
        "r": r_alpha / alpha,
        "eta": 0.95,
        "zeta": -0.061,
        "lam2": 9.4e-4,
    }


@pytest.fixture(scope="session")
def small_policy():
    """Reduced cutoffs so full 11-mode dense tensors stay small in tests."""
    return TruncationPolicy(base_cutoff=3, source_pad=3, detection_cutoff=4)
