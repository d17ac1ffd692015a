import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cspkit.errors import InsufficientDataError
from cspkit.harness import (
    EXPERIMENTS, Experiment, SweepTable, check_table, fit_order, run_sweep, slope_band, table_report,
)
from cspkit.manifold import GridSpec

GRID = GridSpec.uniform(0.5, 2.0, 16)


def test_fit_exact_power_law():
    rows = [(1e-2, 1e-4), (1e-3, 1e-6), (1e-4, 1e-8), (10 ** -2.5, 1e-5), (10 ** -3.5, 1e-7)]
    slope, r2 = fit_order(rows)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_constant_metric():
    slope, r2 = fit_order([(e, 0.3) for e in np.logspace(-1, -4, 6)])
    assert slope == pytest.approx(0.0, abs=1e-12)
    assert r2 == 1.0


def test_fit_mixed_orders():
    eps = np.logspace(-2, -4, 7)
    slope, _ = fit_order(zip(eps, eps + 100 * eps ** 2))
    assert 1.0 <= slope <= 1.3


@given(p=st.floats(0.5, 4.0), c=st.floats(1e-3, 1e3))
@settings(max_examples=40)
def test_fit_recovers_exponent(p, c):
    eps = np.logspace(-1.5, -4, 7)
    assert fit_order(zip(eps, c * eps ** p))[0] == pytest.approx(p, abs=1e-9)


def test_fit_drops_zero_rows():
    eps = np.logspace(-1, -4, 7)
    rows = list(zip(eps, eps ** 2))
    rows[3] = (rows[3][0], 0.0)
    assert fit_order(rows)[0] == pytest.approx(2.0)
    with pytest.raises(InsufficientDataError):
        fit_order(rows[:5])


def test_fit_needs_five_points():
    with pytest.raises(InsufficientDataError):
        fit_order([(1e-2, 1.0), (1e-3, 2.0)])


def test_experiment_validation():
    with pytest.raises(ValueError):
        Experiment("bogus")
    with pytest.raises(ValueError):
        Experiment("manifold_error", q=4)


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_every_experiment_has_a_band(name):
    lo, hi = slope_band(Experiment(name, q=1))
    assert lo <= hi


def test_sweep_rejects_short_or_out_of_window_lists():
    exp = Experiment("manifold_error", grid=GRID)
    with pytest.raises(InsufficientDataError):
        run_sweep(exp, [1e-2, 1e-3])
    with pytest.raises(ValueError):
        run_sweep(exp, [0.5, 1e-2, 1e-3, 1e-4, 3e-4])
    with pytest.raises(ValueError):
        run_sweep(exp, [1e-2, 1e-2, 1e-3, 1e-4, 3e-4])


def test_sweep_orders_eps_decreasing():
    exp = Experiment("manifold_error", grid=GRID)
    table = run_sweep(exp, [1e-4, 1e-2, 1e-3, 3e-3, 3e-4])
    assert list(table.eps) == sorted(table.eps, reverse=True)


def test_manifold_error_q0_slope():
    table = run_sweep(Experiment("manifold_error", q=0, grid=GRID))
    assert table.slope == pytest.approx(1.0, abs=0.1)
    assert check_table(table)[0]


def test_manifold_error_q0_against_hand_expansion(mmh_params):
    # |psi_0 - h0 - eps h1| is O(eps**2), so the metric itself is eps*max|h1| to leading order
    from cspkit.mmh import h1
    table = run_sweep(Experiment("manifold_error", q=0, grid=GRID))
    lead = max(h1(s, mmh_params) for s in GRID.axes()[0])
    for row in table.rows:
        assert row["metric"] == pytest.approx(row["eps"] * lead, rel=5 * row["eps"])


def test_lambda21_q0_slope():
    table = run_sweep(Experiment("lambda21_decay", q=0, grid=GRID))
    assert table.slope == pytest.approx(1.0, abs=0.1)


def test_fiber_angle_q2_slope():
    table = run_sweep(Experiment("fiber_angle", q=2, grid=GRID))
    assert table.slope == pytest.approx(3.0, abs=0.2)


def test_failed_rows_are_recorded():
    # a projection start far outside the grid fails at every eps
    exp = Experiment("projection_error", x0=(5.0, 0.7), grid=GRID)
    table = run_sweep(exp)
    assert not table.rows and len(table.failures) == 5
    assert not check_table(table)[0]


def test_check_table_reports_band_violation():
    exp = Experiment("manifold_error", q=1)
    table = SweepTable(exp, rows=[{"eps": e, "metric": e} for e in np.logspace(-2, -4, 5)])
    table.slope, table.r2 = fit_order(table)
    ok, reasons = check_table(table)
    assert not ok and "outside" in reasons[0]


def test_lambda11_spread_check():
    exp = Experiment("lambda12_decay", q=1)
    rows = [{"eps": e, "metric": e, "lambda11": 1.0 + 10 * e} for e in np.logspace(-1.5, -4, 5)]
    table = SweepTable(exp, rows=rows)
    table.slope, table.r2 = fit_order(table)
    ok, reasons = check_table(table)
    assert not ok and "Lambda11" in reasons[0]


def test_report_shape_and_determinism():
    exp = Experiment("manifold_error", q=1, grid=GRID)
    a, b = table_report(run_sweep(exp)), table_report(run_sweep(exp))
    assert set(a) >= {"experiment", "params", "rows", "slope", "r2", "pass"}
    assert a["rows"] == b["rows"] and a["meta"]["build_id"] == b["meta"]["build_id"]


def test_oracle_diff_passes():
    table = run_sweep(Experiment("oracle_diff", q=1, grid=GRID))
    assert check_table(table)[0]
    assert max(r["metric"] for r in table.rows) < 1e-6
