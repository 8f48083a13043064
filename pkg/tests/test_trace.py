from services.trace_service import TraceLog


def _log(*records):
    log = TraceLog()
    for r in records:
        log.record(*r)
    return log


def test_records_and_counters():
    log = _log(("gen", 5, 1, 1), ("tx", 6, 1, 10, "DATA", 1, 0, 1), ("gen", 7, 2, 1))
    log.count("generated", 2)
    assert len(log) == 3
    assert list(log.of_kind("gen")) == [("gen", 5, 1, 1), ("gen", 7, 2, 1)]
    assert log.counters["generated"] == 2
    assert log.counters["missing"] == 0


def test_fingerprint_follows_content_and_order():
    a = _log(("gen", 5, 1, 1), ("gen", 7, 2, 1))
    b = _log(("gen", 5, 1, 1), ("gen", 7, 2, 1))
    swapped = _log(("gen", 7, 2, 1), ("gen", 5, 1, 1))
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != swapped.fingerprint()
    assert len(a.fingerprint()) == 64
    assert TraceLog().fingerprint() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
