import numpy as np
import pytest

from pdegames.cutoff import CutoffParams, cutoff, eikonal_time_reset, icf_time_reset
from pdegames.errors import ConfigError, InputError


def test_cutoff_three_branches():
    p = CutoffParams(eps=0.01)
    assert cutoff(p, 0.0005) == pytest.approx(0.001)   # lower clamp eps^(3/2)
    assert cutoff(p, 0.05) == pytest.approx(0.05)      # interior
    assert cutoff(p, 0.5) == pytest.approx(0.1)        # upper clamp eps^(1/2)


def test_cutoff_bounds_and_monotone():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        eps = rng.uniform(1e-4, 0.5)
        p = CutoffParams(eps=eps)
        r1, r2 = sorted(rng.uniform(0, 2, size=2))
        c1, c2 = cutoff(p, r1), cutoff(p, r2)
        assert p.floor <= c1 <= p.ceil
        assert c1 <= c2


def test_cutoff_rejects_bad_eps():
    with pytest.raises(ConfigError):
        CutoffParams(eps=1.5)
    with pytest.raises(ConfigError):
        CutoffParams(eps=0.0)
    with pytest.raises(InputError):
        cutoff(CutoffParams(eps=0.1), -0.1)


def test_eikonal_time_reset():
    p = CutoffParams(eps=0.01)
    assert eikonal_time_reset(p, moved=False) == pytest.approx(1e-4)
    assert eikonal_time_reset(p, moved=True, speed_magnitude=1.0) == pytest.approx(0.01)
    assert eikonal_time_reset(p, moved=True, speed_magnitude=0.0) == pytest.approx(0.1)
    with pytest.raises(InputError):
        eikonal_time_reset(p, moved=True, speed_magnitude=-1.0)


def test_icf_time_reset():
    p = CutoffParams(eps=0.01)
    assert icf_time_reset(p, grad_nonzero=False, kappa=7.0) == pytest.approx(1e-4)
    assert icf_time_reset(p, grad_nonzero=True, kappa=2.0, side=+1) == pytest.approx(0.005)
    assert icf_time_reset(p, grad_nonzero=True, kappa=-1.0, side=+1) == pytest.approx(1e-4)
    assert icf_time_reset(p, grad_nonzero=True, kappa=-2.0, side=-1) == pytest.approx(0.005)
    assert icf_time_reset(p, grad_nonzero=True, kappa=1.0, side=-1) == pytest.approx(1e-4)


def test_resets_positive_and_floor():
    rng = np.random.default_rng(12)
    for _ in range(200):
        eps = rng.uniform(1e-3, 0.4)
        p = CutoffParams(eps=eps)
        t_stay = eikonal_time_reset(p, moved=False)
        assert t_stay == eps**2
        t_move = eikonal_time_reset(p, moved=True, speed_magnitude=rng.uniform(0, 5))
        assert t_move >= eps**1.5 > 0
