import pytest
from hypothesis import given, strategies as st

from services.scheduler import EventKind, Scheduler


def _drain(scheduler):
    seen = []
    scheduler.run(lambda e: seen.append((e.time, e.kind, e.target)))
    return seen


def test_time_then_priority_then_insertion():
    s = Scheduler(end=100)
    s.schedule(10, EventKind.APP_GENERATE, 1)
    s.schedule(10, EventKind.TX_END, 2)
    s.schedule(5, EventKind.SAMPLE_ENERGY, 3)
    s.schedule(10, EventKind.TX_END, 4)
    assert _drain(s) == [
        (5, EventKind.SAMPLE_ENERGY, 3),
        (10, EventKind.TX_END, 2),
        (10, EventKind.TX_END, 4),
        (10, EventKind.APP_GENERATE, 1),
    ]


def test_events_past_end_are_discarded():
    s = Scheduler(end=100)
    assert s.schedule(101, EventKind.TIMER_FIRE, 1) is None
    assert s.schedule(100, EventKind.TIMER_FIRE, 1) is not None
    assert s.pending() == 1


def test_cancelled_event_never_runs():
    s = Scheduler(end=100)
    e = s.schedule(10, EventKind.TIMER_FIRE, 1)
    s.schedule(20, EventKind.TIMER_FIRE, 2)
    Scheduler.cancel(e)
    Scheduler.cancel(None)
    assert _drain(s) == [(20, EventKind.TIMER_FIRE, 2)]
    assert s.executed == 1


def test_cannot_schedule_in_the_past():
    s = Scheduler(end=100)
    s.schedule(50, EventKind.TIMER_FIRE, 1)

    def dispatch(event):
        with pytest.raises(ValueError):
            s.schedule(10, EventKind.TIMER_FIRE, 1)

    s.run(dispatch)
    assert s.now == 100


def test_event_log_kept_on_request():
    s = Scheduler(end=10, keep_log=True)
    s.schedule(3, EventKind.TX_START, 7)
    s.run(lambda e: None)
    assert s.log == [(3, "TX_START", 7)]
    assert Scheduler(end=10).log is None


@given(st.lists(st.tuples(st.integers(0, 1000), st.sampled_from(list(EventKind))), max_size=50))
def test_execution_order_is_non_decreasing_in_time(entries):
    s = Scheduler(end=1000)
    for t, kind in entries:
        s.schedule(t, kind, 0)
    times = [t for t, _, _ in _drain(s)]
    assert times == sorted(times)
    assert len(times) == len(entries)
