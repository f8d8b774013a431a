import math

import numpy as np
import pytest

from ringtrap.errors import InvalidInputError
from ringtrap.experiments import (SweepSpec, parse_state, plateau_onset, run_sweep,
                                  translation_average)
from ringtrap.estimator import assemble_model
from ringtrap.dynamics import efficiency_linear_solve


def test_parse_state():
    assert parse_state("8+") == ("window", 8, 1)
    assert parse_state("32-") == ("window", 32, -1)
    assert parse_state("eig:5") == ("eig", 5, 0)
    for bad in ("8", "+", "0+", "eig:x", "8*"):
        with pytest.raises(InvalidInputError):
            parse_state(bad)


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        SweepSpec("nonsense")
    with pytest.raises(InvalidInputError):
        SweepSpec("corrlen_sweep", grid=(10.0, 5.0))
    with pytest.raises(InvalidInputError):
        SweepSpec("corrlen_sweep", threads=0)
    assert SweepSpec("corrlen_sweep").grid[-1] == math.inf


def test_plateau_onset():
    ms = list(range(1, 11))
    etas = [0.90, 0.93, 0.95, 0.960, 0.961, 0.9605, 0.961, 0.961, 0.9612, 0.961]
    assert plateau_onset(ms, etas, 0.002) == 4
    assert plateau_onset(ms, np.linspace(0, 1, 10), 0.002) == 10


def test_translation_average(config):
    model = assemble_model(config.system, config.bath)
    ev = lambda states: efficiency_linear_solve(states, config.system, model.liouvillian)
    mean, spread = translation_average(32, 1, config.system, ev)
    # the full-ring window is the same state at every start position, up to sign
    assert spread < 1e-12 and 0 < mean < 1


def test_thread_count_does_not_change_results(config):
    kw = dict(grid=(0.0, 20.0, math.inf), states=("8+", "8-"), fixed={"reorg_energy": 100.0})
    one = run_sweep(SweepSpec("corrlen_sweep", threads=1, **kw), config)
    two = run_sweep(SweepSpec("corrlen_sweep", threads=3, **kw), config)
    assert [(r.param, r.state, r.eta_mean) for r in one.records] == \
        [(r.param, r.state, r.eta_mean) for r in two.records]


def test_disorder_study_is_seeded(config):
    kw = dict(grid=(0.0, 40.0), states=("8-",), sigma=30.0, n_disorder=10)
    a = run_sweep(SweepSpec("disorder_study", seed=3, **kw), config)
    b = run_sweep(SweepSpec("disorder_study", seed=3, threads=2, **kw), config)
    c = run_sweep(SweepSpec("disorder_study", seed=4, **kw), config)
    assert [r.eta_mean for r in a.records] == [r.eta_mean for r in b.records]
    assert [r.eta_mean for r in a.records] != [r.eta_mean for r in c.records]
    with pytest.raises(InvalidInputError):
        run_sweep(SweepSpec("disorder_study", grid=(0.0,), n_disorder=10), config)


def test_eigenstate_scan_records(config):
    res = run_sweep(SweepSpec("eigenstate_scan", corr_lengths=(40.0,)), config)
    energies = [r.param for r in res.records]
    assert energies == sorted(energies)
    assert res.diagnostics["n_states"]["RB=40"] == len(res.records)


def test_sweep_limits_agree(config):
    states = ("8+", "8-", "32+", "32-")
    corr = run_sweep(SweepSpec("corrlen_sweep", grid=(0.0, math.inf), states=states,
                               fixed={"reorg_energy": 100.0}), config)
    reorg = run_sweep(SweepSpec("reorg_sweep", grid=(0.0, 100.0), states=states), config)
    at = lambda res, p: {r.state: r.eta_mean for r in res.records if r.param == p}
    local, coherent = at(reorg, 100.0), at(reorg, 0.0)
    for s in states:
        assert abs(at(corr, 0.0)[s] - local[s]) < 1e-9
        assert abs(at(corr, math.inf)[s] - coherent[s]) < 1e-9
