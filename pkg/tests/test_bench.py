import json

import pytest

from gridsign.bench import BenchConfig, run_bench


@pytest.fixture(scope="module")
def small_report():
    config = BenchConfig(
        payload_sizes=(1, 1024, 100 * 1024),
        cert_counts=(1, 2, 3),
        seed=3,
    )
    return run_bench(config)


def test_row_layout(small_report):
    payload_rows = small_report.payload_rows()
    cert_rows = small_report.cert_rows()
    assert [r.payload_size for r in payload_rows] == [1, 1024, 100 * 1024]
    assert all(r.cert_count == 2 for r in payload_rows)
    assert [r.cert_count for r in cert_rows] == [1, 2, 3]
    assert all(r.payload_size == 0 for r in cert_rows)


def test_ratio_matches_sizes_to_three_decimals(small_report):
    for row in small_report.rows:
        assert row.ratio == round(row.cose_size / row.json_size, 3)
        assert row.sign_time >= 0
        assert row.verify_time >= 0


def test_known_ratio_targets(small_report):
    payload_ratios = [r.ratio for r in small_report.payload_rows()]
    assert payload_ratios[0] == pytest.approx(0.693, abs=0.03)
    assert payload_ratios[1] == pytest.approx(0.721, abs=0.03)
    assert payload_ratios[2] == pytest.approx(0.749, abs=0.03)
    cert_ratios = [r.ratio for r in small_report.cert_rows()]
    assert cert_ratios[0] == pytest.approx(0.663, abs=0.05)
    assert cert_ratios[1] == pytest.approx(0.695, abs=0.05)
    assert cert_ratios[2] == pytest.approx(0.707, abs=0.05)


def test_json_inflation_law(small_report):
    for row in small_report.rows:
        assert row.json_size >= (4 / 3) * row.payload_size


def test_same_seed_reproduces_sizes(small_report):
    again = run_bench(
        BenchConfig(payload_sizes=(1, 1024, 100 * 1024), cert_counts=(1, 2, 3), seed=3)
    )
    assert [(r.cose_size, r.json_size, r.ratio) for r in again.rows] == [
        (r.cose_size, r.json_size, r.ratio) for r in small_report.rows
    ]


def test_environment_record(small_report):
    env = small_report.environment
    assert env["seed"] == 3
    assert env["alg"] == "ECDSA_P256_SHA256"
    assert set(env["cert_der_sizes"]) == {1, 2, 3}
    assert all(
        400 <= size <= 500
        for sizes in env["cert_der_sizes"].values()
        for size in sizes
    )


def test_skip_large_records_row():
    config = BenchConfig(
        payload_sizes=(1024, 64 * 1024 * 1024),
        cert_counts=(),
        cert_sweep=False,
        skip_large=True,
        seed=3,
    )
    report = run_bench(config)
    assert len(report.rows) == 2
    small, large = report.rows
    assert not small.skipped
    assert large.skipped
    assert large.cose_size is None
    record = json.loads(report.to_jsonl().splitlines()[2])
    assert record["skipped"] is True
    assert "skipped" in report.render_table()


def test_sweep_selection():
    config = BenchConfig(payload_sizes=(16,), cert_counts=(1,), payload_sweep=False, seed=3)
    report = run_bench(config)
    assert report.payload_rows() == []
    assert len(report.cert_rows()) == 1


def test_output_files(tmp_path):
    config = BenchConfig(
        payload_sizes=(16,),
        cert_counts=(1,),
        seed=3,
        output=tmp_path / "report",
    )
    report = run_bench(config)
    jsonl = (tmp_path / "report.jsonl").read_text()
    table = (tmp_path / "report.txt").read_text()
    lines = jsonl.splitlines()
    assert "environment" in json.loads(lines[0])
    assert len(lines) == 1 + len(report.rows)
    assert "payload sweep" in table
    assert "certificate sweep" in table


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(payload_sizes=(-1,))
    with pytest.raises(ValueError):
        BenchConfig(cert_counts=(0,))


def test_overhead_constant_across_payload_sweep(small_report):
    overheads = [r.cose_size - r.payload_size for r in small_report.payload_rows()]
    assert max(overheads) - min(overheads) < 64
