import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cspkit.engine import build_stack
from cspkit.errors import ProjectionError
from cspkit.manifold import GridSpec, build_cspm, eval_psi
from cspkit.projection import (
    FIBER_SEARCH, VERTICAL_BASE, project, project_fiber_search, project_vertical_base, shooting_base,
    slow_phase_error, write_projection_json,
)
from cspkit.systems import tilted, tilted_exact_base

GRID = GridSpec.uniform(0.1, 2.0, 64)


@pytest.fixture(scope="module")
def mmh_setup():
    from cspkit.mmh import mmh_system
    sys = mmh_system()
    stack = build_stack(sys, 2)
    return sys, stack, {eps: build_cspm(sys, stack, GRID, eps) for eps in (0.0, 0.01)}


@pytest.mark.parametrize("scheme", [FIBER_SEARCH, VERTICAL_BASE])
def test_point_on_manifold_is_its_own_base(mmh_setup, scheme):
    sys, stack, tables = mmh_setup
    table = tables[0.01]
    x0 = np.concatenate([[1.0], eval_psi(table, [1.0])])
    result = project(x0, table, stack, 0.01, scheme)
    assert_allclose(result.base.vector, x0, atol=1e-14)
    assert_allclose(result.amplitude, [0.0], atol=1e-14)


@pytest.mark.parametrize("scheme", [FIBER_SEARCH, VERTICAL_BASE])
def test_eps0_projection_is_vertical(mmh_setup, scheme):
    sys, stack, tables = mmh_setup
    result = project([1.0, 0.9], tables[0.0], stack, 0.0, scheme)
    assert_allclose(result.base.vector, [1.0, 0.5], atol=1e-14)
    assert result.amplitude[0] == pytest.approx(0.4)


def test_fiber_search_residual_small(mmh_setup):
    sys, stack, tables = mmh_setup
    result = project_fiber_search([1.0, 0.7], tables[0.01], stack, 0.01)
    assert result.residual < 1e-12
    assert result.base.y[0] > 1.0  # fibers lean towards larger s at the top
    assert result.iterations >= 1


def test_vertical_base_freezes_direction(mmh_setup):
    sys, stack, tables = mmh_setup
    x0 = np.array([1.0, 0.7])
    result = project_vertical_base(x0, tables[0.01], stack, 0.01)
    fiber = project_fiber_search(x0, tables[0.01], stack, 0.01)
    assert abs(result.base.y[0] - fiber.base.y[0]) < 1e-4
    assert result.base.y[0] != fiber.base.y[0]


def test_unknown_scheme(mmh_setup):
    sys, stack, tables = mmh_setup
    with pytest.raises(ValueError):
        project([1.0, 0.7], tables[0.01], stack, 0.01, "orthogonal")


def test_outside_grid(mmh_setup):
    sys, stack, tables = mmh_setup
    with pytest.raises(ProjectionError):
        project([5.0, 0.7], tables[0.01], stack, 0.01, FIBER_SEARCH)


def test_slow_phase_error_zero_for_same_point(mmh_setup):
    sys, stack, tables = mmh_setup
    x0 = np.concatenate([[1.0], eval_psi(tables[0.01], [1.0])])
    assert slow_phase_error(sys, x0, x0, 0.01, horizon=1.0) == 0.0


def test_slow_phase_error_distinct_bases(mmh_setup):
    sys, stack, tables = mmh_setup
    a = np.concatenate([[1.0], eval_psi(tables[0.01], [1.0])])
    b = np.concatenate([[1.1], eval_psi(tables[0.01], [1.1])])
    assert slow_phase_error(sys, a, b, 0.01, horizon=1.0) > 0.01


def test_shooting_base_is_exact(mmh_setup):
    sys, stack, tables = mmh_setup
    x0 = np.array([1.0, 0.7])
    base = shooting_base(sys, x0, tables[0.01], 0.01)
    assert slow_phase_error(sys, x0, base, 0.01, horizon=1.0) < 1e-9


def test_shooting_agrees_with_tilted_exact_base():
    sys = tilted()
    eps = 0.05
    stack = build_stack(sys, 1)
    table = build_cspm(sys, stack, GRID, eps)
    x0 = np.array([1.0, 0.3])
    base = shooting_base(sys, x0, table, eps)
    assert_allclose(base.vector, tilted_exact_base(x0, eps), atol=1e-10)


def test_tilted_differential():
    sys = tilted()
    eps = 0.01
    stack = build_stack(sys, 1)
    table = build_cspm(sys, stack, GRID, eps)
    x0 = np.array([1.0, 0.3])
    exact = tilted_exact_base(x0, eps)
    fs = project_fiber_search(x0, table, stack, eps)
    vb = project_vertical_base(x0, table, stack, eps)
    assert np.max(np.abs(fs.base.vector - exact)) < 1e-12
    assert np.max(np.abs(vb.base.vector - exact)) > 1e-6


def test_projection_record(mmh_setup, tmp_path):
    sys, stack, tables = mmh_setup
    result = project_fiber_search([1.0, 0.7], tables[0.01], stack, 0.01)
    rec = result.to_record([1.0, 0.7], 1e-7)
    assert rec["scheme"] == FIBER_SEARCH and rec["slow_phase_error"] == 1e-7
    path = tmp_path / "p.json"
    write_projection_json([rec], path)
    assert json.loads(path.read_text())[0]["base"] == rec["base"]
