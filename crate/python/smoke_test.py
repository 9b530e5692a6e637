"""Smoke test for the pywifitrace extension.

Build it first:
    cargo build -p pywifitrace --features extension-module --release
    cp target/release/libpywifitrace.so python/pywifitrace.so
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pywifitrace as wt  # noqa: E402


def main():
    assert wt.time_coverage(100, 80) == 0.8
    assert wt.time_coverage(0, 0) is None
    assert wt.entropy_bits(["a", "a"]) == 0.0
    assert abs(wt.entropy_bits(["a", "a", "b", "c"]) - 1.5) < 1e-12

    pts = [(55.0 + i * 1e-5, 12.0) for i in range(6)] + [(55.1, 12.0)]
    clusters, noise = wt.dbscan(pts, 100.0, 5)
    assert clusters == [[0, 1, 2, 3, 4, 5]] and noise == [6]
    lat, lon = wt.geometric_median([(55.0, 12.0), (55.0, 12.0), (55.001, 12.0)])
    assert abs(lat - 55.0) < 1e-6 and abs(lon - 12.0) < 1e-6

    scans = [(0, ["02:00:00:00:00:01"]), (600_000, ["02:00:00:00:00:01", "02:00:00:00:00:02"]), (1_200_000, ["02:00:00:00:00:02"])]
    assert len(wt.greedy_top_routers(scans, 1)) == 1

    with tempfile.TemporaryDirectory() as d:
        traces = wt.synth(d, n_users=3, n_days=2, seed=7)
        again = wt.TraceSet.load(os.path.join(d, "gps.jsonl"), os.path.join(d, "wifi.jsonl"))
        assert (again.n_fixes, again.n_scans) == (traces.n_fixes, traces.n_scans)
        assert again.users() == ["u00", "u01", "u02"]

        db = wt.locate(traces)
        census = db.census()
        assert census["total"] == len(db) > 0
        path = os.path.join(d, "apdb.csv")
        db.save(path)
        assert wt.ApDatabase.load(path).census() == census

        daily = wt.daily_coverage(traces, db)
        assert daily and all(0.0 <= c <= 1.0 for _, c in daily)

        res = wt.run_experiment(traces, "random", 1.0)
        assert set(res) == {"global", "personal", "global_excluding_self"}
        assert res["global"] >= res["personal"]
        none = wt.run_experiment(traces, "random", 0.0)
        assert none["global"] == 0.0

    try:
        wt.synth("/nonexistent-dir/x", n_users=0)
    except ValueError:
        pass
    else:
        raise AssertionError("n_users=0 accepted")
    print("pywifitrace smoke test passed:", census)


if __name__ == "__main__":
    main()
