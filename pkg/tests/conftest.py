import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def small_single_cp_table():
    """Single change-point family thresholds simulated at test scale.

    Session-scoped because the simulation takes a few seconds; the mean
    closed-form path makes n_sim=500 x 1000 reps cheap.
    """
    from sncp.critical_values import builtin_table, simulate_null_stats, empirical_quantile

    table = builtin_table()
    stats = simulate_null_stats(0.05, 1, "single_cp", n_sim=500, reps=1000, seed=17)
    table.add(0.05, 1, 0.90, "single_cp", empirical_quantile(stats, 0.90),
              {"n_sim": 500, "reps": 1000, "seed": 17})
    table.add(0.05, 1, 0.95, "single_cp", empirical_quantile(stats, 0.95),
              {"n_sim": 500, "reps": 1000, "seed": 17})
    return table
