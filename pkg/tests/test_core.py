"""Domain types: grids, masks, neighbor sets, elimination closure."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comboin.core import (
    DesignParams,
    DoseGrid,
    Scenario,
    SubsetMask,
    TrialState,
    TrialStatus,
    mark_eliminated,
    neighbors_down,
    neighbors_up,
)
from comboin.files import list_bundled, load_mask, load_scenario

from .conftest import BAND_CELLS


def test_grid_validation():
    with pytest.raises(ValueError):
        DoseGrid((), (1, 2))
    with pytest.raises(ValueError):
        DoseGrid((1, 1), (1, 2))
    with pytest.raises(ValueError):
        DoseGrid((2, 1), (1, 2))
    g = DoseGrid((15, 25, 50, 75), (120, 160, 200, 240))
    assert g.shape == (4, 4)
    assert g.doses((3, 4)) == (50, 240)


def test_mask_requires_start_and_connectivity(grid):
    with pytest.raises(ValueError, match="starting combination"):
        SubsetMask.from_cells(grid, [(1, 2), (2, 2)])
    with pytest.raises(ValueError, match="not connected"):
        SubsetMask.from_cells(grid, [(1, 1), (2, 2)])
    with pytest.raises(ValueError, match="outside grid"):
        SubsetMask.from_cells(grid, [(1, 1), (5, 1)])
    mask = SubsetMask.from_cells(grid, BAND_CELLS)
    assert len(mask) == 8 and (3, 4) in mask


def test_neighbors_on_band(grid, band_mask, full_mask):
    # the off-diagonal pair is the only branch in the band
    assert neighbors_up(grid, band_mask, (2, 2)) == {(2, 3)}
    assert neighbors_up(grid, full_mask, (4, 4)) == set()
    assert neighbors_up(grid, full_mask, (2, 2)) == {(3, 2), (2, 3)}
    assert neighbors_down(grid, full_mask, (1, 1)) == set()
    assert neighbors_down(grid, band_mask, (4, 4)) == {(4, 3), (3, 4)}
    assert neighbors_down(grid, band_mask, (2, 3)) == {(2, 2)}
    with pytest.raises(ValueError):
        neighbors_up(grid, band_mask, (2, 1))


def test_neighbors_within_mask_and_never_self(grid, band_mask):
    for cell in band_mask:
        for nb in neighbors_up(grid, band_mask, cell) | neighbors_down(grid, band_mask, cell):
            assert nb in band_mask and nb != cell


def test_every_masked_cell_reachable_by_up_moves(grid):
    for name in list_bundled("masks"):
        mask = load_mask(name, grid)
        seen = {(1, 1)}
        frontier = [(1, 1)]
        while frontier:
            cell = frontier.pop()
            for nb in neighbors_up(grid, mask, cell):
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        assert seen == set(mask.cells)


def test_mark_eliminated_upward_closure(grid, full_mask, band_mask):
    state = TrialState.initial(grid)
    out = mark_eliminated(state, full_mask, (3, 3))
    assert set(out.eliminated_cells()) == {(3, 3), (3, 4), (4, 3), (4, 4)}
    assert out.status is TrialStatus.RUNNING

    banded = mark_eliminated(state, band_mask, (3, 4))
    assert set(banded.eliminated_cells()) == {(3, 4), (4, 4)}
    assert not banded.is_eliminated((4, 3))

    stopped = mark_eliminated(state, full_mask, (1, 1))
    assert stopped.status is TrialStatus.STOPPED_SAFETY
    assert set(stopped.eliminated_cells()) == set(full_mask.cells)


@given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=6))
@settings(max_examples=200, deadline=None)
def test_elimination_closure_after_any_sequence(cells):
    grid = DoseGrid((15, 25, 50, 75), (120, 160, 200, 240))
    mask = SubsetMask.full(grid)
    state = TrialState.initial(grid)
    for cell in cells:
        state = mark_eliminated(state, mask, cell)
    for (i, j) in state.eliminated_cells():
        for i2 in range(i, 5):
            for j2 in range(j, 5):
                assert state.is_eliminated((i2, j2))


def test_params_validation():
    with pytest.raises(ValueError):
        DesignParams(phi=0.3, phi1=0.31, phi2=0.42)
    with pytest.raises(ValueError):
        DesignParams.from_target(0.3, epsilon=0.4)
    with pytest.raises(ValueError):
        DesignParams.from_target(0.3, earlystop_n=10)
    with pytest.raises(ValueError):
        DesignParams.from_target(0.3, cb_surface="sometimes")
    p = DesignParams.from_target(0.3, earlystop_n=None)
    assert p.earlystop_n is None
    assert p.lambda_e < p.phi < p.lambda_d
    assert DesignParams.from_target(0.3, design="boin-ce").design.value == "boin-ce"


def test_scenario_validation_and_loading():
    with pytest.raises(ValueError, match="outside"):
        Scenario("bad", np.array([[0.5]]), frozenset({(1, 1)}))
    grid, mask, scen = load_scenario("scenario05")
    assert scen.mtc_set == {(3, 3)}
    assert scen.tox_at((3, 3)) == 0.30
    assert scen.classify_cell((4, 4)) == "over"
    assert scen.classify_cell((1, 1)) == "under"
    assert len(mask) == 16

    grid14, _, scen14 = load_scenario("scenario14")
    assert scen14.mtc_set == frozenset()
    assert all(scen14.tox_at(c) > scen14.acceptable_hi for c in grid14.cells())


def test_all_bundled_scenarios_load_and_match_grid():
    for name in list_bundled("scenarios"):
        grid, mask, scen = load_scenario(name)
        assert scen.shape == grid.shape == (4, 4)
        for cell in scen.mtc_set:
            assert 0.16 <= scen.tox_at(cell) <= 0.33


def test_trial_state_invariant_checker(grid, band_mask):
    state = TrialState.initial(grid)
    state.check_invariants(band_mask)
    bad = TrialState(
        n=state.n.copy(),
        y=state.y + 1,
        eliminated=state.eliminated,
        current=(1, 1),
        status=TrialStatus.RUNNING,
        cohort_log=(),
    )
    with pytest.raises(AssertionError):
        bad.check_invariants(band_mask)
