import gc

import numpy as np

from specden.memory import metered, track


def test_track_outside_meter_is_noop():
    a = np.zeros(10)
    assert track(a) is a


def test_meter_peak_and_release():
    with metered() as m:
        a = track(np.zeros(100))
        b = track(np.zeros(50))
        assert m.live_bytes == 1200
        del a
        gc.collect()
        assert m.live_bytes == 400
        c = track(np.zeros(10))
        assert m.peak_bytes == 1200
        del b, c
        gc.collect()
    assert m.live_bytes == 0
    assert m.n_tracked == 3


def test_views_count_their_base_once():
    with metered() as m:
        base = np.zeros(64)
        track(base[:8])
    assert m.peak_bytes == 512


def test_nested_meters_are_independent():
    with metered() as outer:
        track(np.zeros(10))
        with metered() as inner:
            track(np.zeros(20))
        track(np.zeros(5))
    assert inner.peak_bytes == 160
    assert outer.n_tracked == 2
