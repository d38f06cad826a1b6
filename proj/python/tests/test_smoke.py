import math

import numpy as np
import pytest

import athero


def test_nodes_and_setup():
    nodes = athero.legendre_gauss_radau_nodes(5)
    assert len(nodes) == 6
    assert nodes[-1] == 1.0
    assert np.all(np.diff(nodes) > 0)
    setup = athero.build_setup(4, 3)
    assert (setup.N, setup.M) == (4, 3)
    assert setup.space_eval(1).shape == (4, 4)
    assert setup.time_eval(0).shape == (3, 3)
    assert setup.time_nodes[-1] == 1.0
    assert math.isclose(athero.jacobi_eval(2, 0.0, 0.0, 1.0), 1.0)
    with pytest.raises(athero.InvalidInput):
        athero.jacobi_eval(-1, 0.0, 0.0, 0.0)


def test_decoupled_direct_objective():
    p = athero.ModelParameters.decoupled_limit()
    setup = athero.build_setup(4, 3)
    control = athero.ControlVector.constant(3, 0.0, p.Kbound)
    assert athero.objective(control, setup, p) == pytest.approx(1.0 - p.epsilon, abs=1e-12)
    sol = athero.solve_direct(setup, p)
    assert sol.objective == pytest.approx(0.99, abs=1e-12)
    assert sol.state.CL.shape == (4, 3)
    assert athero.evaluate_radius(sol.state, 1.0, setup) == pytest.approx(0.0, abs=1e-14)


def test_default_parameters_run_both_methods():
    p = athero.ModelParameters()
    assert p.L0 == 0.016 and p.H0 == 0.005
    setup = athero.build_setup(6, 6)
    d = athero.solve_direct(setup, p)
    assert 0.0 <= d.objective <= 1.0
    assert all(0.0 <= x <= p.Kbound for x in d.control.segments)
    ind = athero.solve_indirect(setup, p)
    assert ind.converged
    assert set(ind.phi) <= {0.0, p.Kbound}
    rec = athero.cross_method_diff(d, setup, ind, setup, p)
    assert rec.segments == 6
    assert 0.0 <= rec.match_fraction <= 1.0
    assert len(rec.field) == 3


def test_errors_are_translated():
    p = athero.ModelParameters()
    p.epsilon = 2.0
    with pytest.raises(athero.InvalidInput):
        p.validate()
    q = athero.ModelParameters()
    opts = athero.FixedPointOptions()
    opts.max_iter = 1
    setup = athero.build_setup(4, 4)
    with pytest.raises(athero.NonConvergence):
        athero.fixed_point_solve(athero.ControlVector.constant(4, 0.0, 1.0), setup, q, opts)
    assert issubclass(athero.NonConvergence, athero.Error)


def test_convergence_and_sweep():
    p = athero.ModelParameters()
    study = athero.convergence_study(p, [athero.GridSpec(2, 2), athero.GridSpec(4, 4)],
                                     athero.GridSpec(8, 8))
    assert len(study.rows) == 2
    assert not any(r.failed for r in study.rows)
    assert study.rows[1].Einf[0] < study.rows[0].Einf[0]
    assert "4" in study.table()
    rows = athero.control_effect_sweep(athero.default_sweep_pairs(), p, athero.build_setup(4, 4),
                                       samples=11)
    assert len(rows) == 4
    for r in rows:
        assert len(r.t) == 11
        assert r.objective_controlled <= r.objective_uncontrolled + 1e-12
