import pytest

from hemptwin.kernel import EventCalendar, ResourcePool, TimeInPastError
from hemptwin.randomness import RngStream


def test_events_fire_in_time_order():
    cal = EventCalendar()
    fired = []
    cal.schedule(5.0, lambda: fired.append("A"))
    cal.schedule(3.0, lambda: fired.append("B"))
    cal.run()
    assert fired == ["B", "A"]
    assert cal.now == 5.0


def test_simultaneous_events_fifo_tie_break():
    cal = EventCalendar()
    fired = []
    cal.schedule(5.0, lambda: fired.append("A"))
    cal.schedule(5.0, lambda: fired.append("B"))
    cal.run()
    assert fired == ["A", "B"]


def test_schedule_in_past_rejected():
    cal = EventCalendar()
    cal.schedule(2.0, lambda: None)
    cal.run()
    with pytest.raises(TimeInPastError):
        cal.schedule(1.0, lambda: None)


def test_clock_never_moves_backward():
    cal = EventCalendar()
    times = []
    for t in (4.0, 1.0, 3.0, 1.0, 2.0):
        cal.schedule(t, lambda: times.append(cal.now))
    cal.run()
    assert times == sorted(times)


def _serve(cal, pool, duration):
    def on_grant():
        cal.schedule_in(duration, pool.release)

    return on_grant


def test_single_server_second_request_waits_service_time():
    # hand-simulated: two simultaneous requests, services 2 and 2
    # -> first starts at 0, second at 2, so the second waits 2 days
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=1)
    pool.request("a", _serve(cal, pool, 2.0))
    pool.request("b", _serve(cal, pool, 2.0))
    cal.run()
    assert dict(pool.waits) == {"a": 0.0, "b": 2.0}


def test_uncontended_pool_all_waits_zero():
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=10)
    for i in range(10):
        pool.request(i, _serve(cal, pool, 1.0))
    cal.run()
    assert all(w == 0.0 for _, w in pool.waits)


def test_three_dryers_five_simultaneous_requests():
    # hand simulation: 3 start at t=0 and finish at t=1, freeing servers for
    # the remaining 2 -> waits {0, 0, 0, 1, 1}
    cal = EventCalendar()
    pool = ResourcePool(cal, "dryers", capacity=3)
    for i in range(5):
        pool.request(i, _serve(cal, pool, 1.0))
    cal.run()
    assert sorted(w for _, w in pool.waits) == [0.0, 0.0, 0.0, 1.0, 1.0]


def test_grant_order_equals_enqueue_order():
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=1)
    order = []

    def serving(name):
        def on_grant():
            order.append(name)
            cal.schedule_in(1.0, pool.release)

        return on_grant

    for name in "abcdef":
        pool.request(name, serving(name))
    cal.run()
    assert order == list("abcdef")


def test_resize_up_grants_queued_requests_immediately():
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=3)
    started = []
    for i in range(5):
        pool.request(i, lambda i=i: started.append(i))
    assert started == [0, 1, 2]
    pool.resize(5)
    assert started == [0, 1, 2, 3, 4]


def test_resize_down_never_preempts():
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=3)
    for i in range(3):
        pool.request(i, lambda: None)
    assert pool.busy == 3
    pool.resize(1)
    assert pool.busy == 3  # no preemption
    pool.release()
    pool.release()
    assert pool.busy == 1


def test_cancelled_request_is_skipped_and_pool_stays_live():
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=1)
    granted = []
    pool.request("a", lambda: granted.append("a"))
    req_b = pool.request("b", lambda: granted.append("b"))
    req_b.cancel()
    pool.request("c", lambda: granted.append("c"))
    pool.release()  # a done -> c granted, b skipped
    assert granted == ["a", "c"]
    # idle pool with stale cancelled entries must grant new work immediately
    pool.release()
    pool.request("d", lambda: granted.append("d"))
    assert granted == ["a", "c", "d"]


def test_release_without_busy_server_raises():
    cal = EventCalendar()
    pool = ResourcePool(cal, "p", capacity=1)
    with pytest.raises(RuntimeError):
        pool.release()


def test_littles_law_on_long_single_pool_run():
    # M/M/2 with arrival rate 1.5/day and mean service 1.0 day (rho = 0.75):
    # long-run average queue length must match arrival_rate * average wait
    cal = EventCalendar()
    pool = ResourcePool(cal, "mmc", capacity=2)
    arrivals = RngStream(2024, ("arrivals",))
    services = RngStream(2024, ("services",))
    horizon = 40_000.0
    rate = 1.5

    def serve():
        cal.schedule_in(services.exponential(1.0), pool.release)

    def arrive():
        if cal.now >= horizon:
            return
        pool.request(None, serve)
        cal.schedule_in(arrivals.exponential(1.0 / rate), arrive)

    cal.schedule(0.0, arrive)
    cal.run()
    n = len(pool.waits)
    effective_rate = n / cal.now
    lhs = pool.average_queue_length()
    rhs = effective_rate * pool.average_wait()
    assert lhs == pytest.approx(rhs, rel=0.10)
