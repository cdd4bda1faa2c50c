import pytest

from evrep.bench import (bench_config, format_table, run_bench,
                         write_results_csv, write_results_json)
from evrep.events import SensorGeometry
from evrep.synth import bench_scene

G = SensorGeometry(160, 120)


@pytest.fixture(scope="module")
def small_results():
    arrays = bench_scene(G, 1.3, seed=7)
    return run_bench(arrays, G, methods=("noop", "histogram", "global_li"),
                     frequencies=(30,), measured_windows=30, repeats=2)


def test_noop_overhead_under_5_percent_of_histogram(small_results):
    by = {r.method: r for r in small_results}
    assert by["noop"].mean_ms < 0.05 * by["histogram"].mean_ms


def test_results_sorted_by_mean(small_results):
    means = [r.mean_ms for r in small_results]
    assert means == sorted(means)


def test_result_fields_sane(small_results):
    for r in small_results:
        assert r.windows == 30
        assert r.frequency_hz == 30.0
        assert 0.0 <= r.mean_ms
        assert r.median_ms <= r.p95_ms or r.method == "noop"
        assert r.mean_inclusive_ms >= r.mean_ms
        assert "python" in r.machine


def test_unknown_method_rejected():
    arrays = bench_scene(G, 1.3, seed=7)
    with pytest.raises(ValueError, match="unknown method"):
        run_bench(arrays, G, methods=("warp_drive",), frequencies=(30,))


def test_too_few_measured_windows_rejected():
    arrays = bench_scene(G, 1.3, seed=7)
    with pytest.raises(ValueError, match=">= 30"):
        run_bench(arrays, G, measured_windows=10)


def test_short_stream_rejected():
    arrays = bench_scene(G, 0.2, seed=7)
    with pytest.raises(ValueError, match="windows"):
        run_bench(arrays, G, methods=("histogram",), frequencies=(30,),
                  measured_windows=30)


def test_bench_config_variants():
    cfg = bench_config("lads_fft_nonrecursive", 30)
    assert cfg.method == "lads_fft" and not cfg.fft_recursive
    cfg = bench_config("lads_fft", 240)
    assert cfg.fft_recursive and cfg.r == 0.05
    assert bench_config("noop", 30).method == "histogram"


def test_outputs_roundtrip(tmp_path, small_results):
    write_results_csv(small_results, tmp_path / "b.csv")
    write_results_json(small_results, tmp_path / "b.json")
    import csv as csv_mod
    import json
    rows = list(csv_mod.DictReader(open(tmp_path / "b.csv")))
    assert len(rows) == len(small_results)
    assert rows[0]["method"] == small_results[0].method
    data = json.loads((tmp_path / "b.json").read_text())
    assert data[0]["mean_ms"] == pytest.approx(small_results[0].mean_ms)
    table = format_table(small_results)
    assert "histogram" in table and "machine:" in table


def test_parallel_grid_matches_sequential_bitwise():
    import numpy as np
    from evrep.spectral import nonrecursive_fft_grid
    from evrep.surfaces import Histogram, RepresentationConfig
    rng = np.random.default_rng(95)
    img = rng.normal(size=(48, 64)) * (rng.random((48, 64)) < 0.3)
    cfg = RepresentationConfig(method="lads_fft", r=0.2, patch_divisor=8)
    seq = nonrecursive_fft_grid(Histogram(img, 0), cfg)
    par = nonrecursive_fft_grid(Histogram(img, 0), cfg, workers=4)
    assert np.array_equal(seq.scores, par.scores)


def test_parallel_bench_row_emitted():
    arrays = bench_scene(G, 1.3, seed=7)
    results = run_bench(arrays, G, methods=("lads_fft_nonrecursive",),
                        frequencies=(30,), measured_windows=30, repeats=1,
                        parallel_workers=2)
    names = {r.method for r in results}
    assert names == {"lads_fft_nonrecursive", "lads_fft_nonrecursive_parallel"}
