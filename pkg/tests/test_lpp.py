import numpy as np
import pytest
from ftasep_toolkit.lpp import (
    sample_weights, passage_times, sample_passage_points, export_grid, weights_from_waiting_times,
    arrival_identity_check, ftasep_positions_via_lpp, rescale_diag, rescale_offdiag,
    process_indices, rescale_process, rescale_process_value, round_half_up,
)
from ftasep_toolkit.particles import ftasep_simulate, halfline_tasep_simulate, step_state
from ftasep_toolkit.utils import rng_for

def test_weights_layout_and_diagonal_rate():
    w1 = sample_weights(5, 1.0, seed=3)
    w2 = sample_weights(5, 2.0, seed=3)
    assert np.isnan(w1.at(2, 3)) and np.isnan(w1.at(0, 0))
    assert w1.at(4, 2) == w2.at(4, 2)
    assert w2.at(3, 3) == pytest.approx(w1.at(3, 3) / 2)
    with pytest.raises(ValueError):
        sample_weights(0, 1.0, seed=0)

def test_passage_time_recursion():
    w = sample_weights(3, 0.7, seed=9)
    g = passage_times(w)
    assert g.at(1, 1) == pytest.approx(w.at(1, 1))
    assert g.at(2, 1) == pytest.approx(w.at(1, 1) + w.at(2, 1))
    # (1,2) est hors du demi-quadrant : seul le prédécesseur (2,1) compte
    assert g.at(2, 2) == pytest.approx(g.at(2, 1) + w.at(2, 2))
    want = w.at(3, 2) + max(g.at(2, 2), g.at(3, 1))
    assert g.at(3, 2) == pytest.approx(want)
    with pytest.raises(ValueError):
        g.at(1, 2)

def test_streaming_points_law():
    rng = rng_for(11, 0)
    vals = np.array([sample_passage_points(2.0, [(2, 2)], 0, rng=rng)[0] for _ in range(3000)])
    # Exp(2) + Exp(1) + Exp(2)
    assert abs(vals.mean() - 2.0) < 0.1
    out = sample_passage_points(1.0, [(3, 1), (2, 2), (3, 1)], seed=4)
    assert out.shape == (3,) and out[0] == out[2]
    with pytest.raises(ValueError):
        sample_passage_points(1.0, [(1, 2)], seed=0)

def test_export_grid(tmp_path):
    w = sample_weights(4, 1.0, seed=1)
    p = export_grid(w, passage_times(w), tmp_path / 'grid.csv')
    lines = open(p, encoding='utf-8').read().splitlines()
    assert lines[0] == 'n,m,w,H'
    assert len(lines) == 1 + 10

def test_arrival_identity_on_halfline():
    traj = halfline_tasep_simulate(1.0, 40.0, seed=6, x_max=200)
    grid = passage_times(weights_from_waiting_times(traj))
    rep = arrival_identity_check(traj, grid)
    assert rep.passed and rep.checked > 20
    traj.waits[0][0] += 0.5
    rep = arrival_identity_check(traj, passage_times(weights_from_waiting_times(traj)))
    assert not rep.passed

def test_lpp_positions_match_simulation_in_mean():
    t, M = 20.0, 300
    direct = [ftasep_simulate(1.0, step_state(80), t, seed=s).final.positions[0] for s in range(M)]
    via = [ftasep_positions_via_lpp(1.0, t, [1], seed=10_000 + s)[0][0] for s in range(M)]
    assert abs(np.mean(direct) - np.mean(via)) < 0.4
    xs, trunc = ftasep_positions_via_lpp(1.0, t, [1, 5, 10], seed=1)
    assert not trunc
    assert xs[0] > xs[1] > xs[2]

def test_rescalings():
    assert rescale_diag(400.0, 100, 1.0) == 0.0
    a = 0.3
    assert rescale_diag(100 / (a * (1 - a)), 100, a) == pytest.approx(0.0)
    assert rescale_offdiag((1 + 0.5) ** 2 * 64, 64, 0.25) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        rescale_offdiag(1.0, 10, 1.0)
    assert round_half_up(2.5) == 3 and round_half_up(2.4) == 2
    assert process_indices(8, 0.0) == (8, 8)
    hi, lo = process_indices(27, 0.5)
    assert hi + lo in (54, 55) and hi > lo
    with pytest.raises(ValueError):
        process_indices(8, 5.0)
    with pytest.raises(ValueError):
        process_indices(8, -0.1)

def test_rescale_process_on_grid():
    w = sample_weights(40, 1.0, seed=2)
    g = passage_times(w)
    hi, lo = process_indices(27, 0.3)
    assert rescale_process(g, 27, 0.3) == pytest.approx(rescale_process_value(g.H[hi, lo], 27, 0.3))
    with pytest.raises(ValueError):
        rescale_process(g, 60, 0.0)
