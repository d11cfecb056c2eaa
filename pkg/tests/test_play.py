import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piezorod import (InvalidThresholdError, PlayBank, bank_advance,
                      play_init, play_update, step_energy_identity_check)

drives = st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=1,
                  max_size=40)


def test_play_init_examples():
    assert play_init(0.0, 1.0) == 0.0
    assert play_init(3.0, 1.0) == 2.0
    assert play_init(-3.0, 1.0) == -2.0


def test_play_init_rejects_bad_threshold():
    with pytest.raises(InvalidThresholdError):
        play_init(0.0, 0.0)
    with pytest.raises(InvalidThresholdError):
        play_init(0.0, -1.0)


def test_play_update_examples():
    assert play_update(0.0, 0.5, 1.0) == 0.0
    assert play_update(0.0, 2.0, 1.0) == 1.0
    assert play_update(0.5, -2.0, 1.0) == -1.0
    with pytest.raises(InvalidThresholdError):
        play_update(0.0, 1.0, 0.0)


def test_bank_advance_examples():
    r = np.array([0.25, 0.5, 0.75])
    w = np.full(3, 0.25)
    bank = PlayBank.virgin(r, w)

    same = bank_advance(bank, 0.0)
    assert np.array_equal(same.xi, bank.xi)

    up = bank_advance(bank, 1.0)
    assert np.allclose(up.xi, [0.75, 0.5, 0.25])
    assert up.last_q == 1.0

    # projection is idempotent
    again = bank_advance(up, 1.0)
    assert np.array_equal(again.xi, up.xi)


def test_bank_validation():
    with pytest.raises(ValueError):
        PlayBank(np.array([0.5, 0.25]), np.array([1.0, 1.0]),
                 np.zeros(2), 0.0)  # not increasing
    with pytest.raises(ValueError):
        PlayBank(np.array([0.25, 0.5]), np.array([1.0, -1.0]),
                 np.zeros(2), 0.0)  # weight sign
    with pytest.raises(InvalidThresholdError):
        PlayBank(np.array([0.0, 0.5]), np.array([1.0, 1.0]), np.zeros(2), 0.0)


def test_states_view():
    bank = PlayBank.from_initial(2.0, np.array([0.5, 1.5]), np.array([1.0, 1.0]))
    states = bank.states
    assert [s.r for s in states] == [0.5, 1.5]
    assert np.allclose([s.xi for s in states], [1.5, 0.5])


@settings(max_examples=80, deadline=None)
@given(drives)
def test_projection_consistency(qs):
    r = np.array([0.1, 0.4, 1.0, 2.5])
    bank = PlayBank.virgin(r, np.ones(4))
    for q in qs:
        bank = bank_advance(bank, q)
        assert np.all(np.abs(q - bank.xi) <= r + 1e-15)


@settings(max_examples=80, deadline=None)
@given(drives)
def test_energy_identity_random_drives(qs):
    r = np.geomspace(0.05, 2.0, 12)
    bank = PlayBank.virgin(r, np.ones(12))
    worst = 0.0
    for q in qs:
        new = bank_advance(bank, q)
        worst = max(worst, step_energy_identity_check(bank, new, q))
        bank = new
    assert worst <= 1e-12


@settings(max_examples=60, deadline=None)
@given(drives)
def test_rate_independence(qs):
    # repeating samples must not change the final memory
    r = np.geomspace(0.05, 2.0, 9)
    a = PlayBank.virgin(r, np.ones(9))
    b = PlayBank.virgin(r, np.ones(9))
    for q in qs:
        a = bank_advance(a, q)
        b = bank_advance(bank_advance(b, q), q)
    assert np.array_equal(a.xi, b.xi)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3, allow_nan=False),
                          st.floats(-3, 3, allow_nan=False)),
                min_size=1, max_size=30))
def test_play_contraction(pairs):
    # sup-norm 1-Lipschitz continuity with respect to the whole input history
    r = np.geomspace(0.05, 2.0, 9)
    a = PlayBank.virgin(r, np.ones(9))
    b = PlayBank.virgin(r, np.ones(9))
    gap = 0.0
    for q1, q2 in pairs:
        a = bank_advance(a, q1)
        b = bank_advance(b, q2)
        gap = max(gap, abs(q1 - q2))
    assert np.max(np.abs(a.xi - b.xi)) <= gap + 1e-14
