import csv
import io

import pytest

from bead.cli import main, parse_quantity


def analyze(capsys, *argv):
    assert main(["analyze", *argv]) == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(out), delimiter="\t"))
    assert rows[0] == ["quantity", "value", "unit"]
    return {q: v for q, v, _ in rows[1:]}


def test_parse_quantity_binary_units():
    assert parse_quantity("4GiB") == 4 * 2**30
    assert parse_quantity("4GB") == 4 * 2**30
    assert parse_quantity("32B") == 32
    assert parse_quantity("100Mbps", "bps") == 100 * 2**20
    assert parse_quantity("2e3") == 2000


def test_saturation_by_rate(capsys):
    v = analyze(capsys, "saturation", "--storage", "4GiB", "--entry", "32B", "--rate", "3200")
    assert v["capacity_entries"] == str(2**27)
    assert v["saturation_time_rounded"] == "41943"


def test_saturation_by_bandwidth(capsys):
    v = analyze(capsys, "saturation", "--storage", "4GiB", "--bandwidth", "100Mbps")
    assert v["rate"] == "3200"
    assert v["saturation_time_rounded"] == "41943"
    v = analyze(capsys, "saturation", "--storage", "1TiB", "--rate", "335544320")
    assert v["saturation_time_rounded"] == "102"


def test_bloom(capsys):
    v = analyze(capsys, "bloom", "--m", "4GiB", "--n", "2e8", "--rate", "3200")
    assert v["k"] == "119"
    assert float(v["false_positive_rate"]) <= 1e-32
    v = analyze(capsys, "bloom", "--m", "4GiB", "--n", "2e8", "--k", "120", "--rate", "3200")
    assert v["saturation_time_rounded"] == "89478"
    v = analyze(capsys, "bloom", "--m", "1TiB", "--n", "5.7e10", "--rate", "335544320")
    assert v["k"] == "107"
    assert v["saturation_time_rounded"] == "245"


def test_marking(capsys):
    v = analyze(capsys, "marking", "--height", "16")
    assert v["aggregate_trace"] == "37355520"
    assert v["interest_growth"] == "608"
    assert v["per_path_erases"] == "65536"


@pytest.mark.parametrize("argv", [
    ["analyze", "bloom", "--n", "10"],
    ["analyze", "saturation", "--storage", "4 parsecs", "--rate", "1"],
    ["analyze", "marking", "--height", "0"],
    ["analyze", "bloom", "--m", "1GiB", "--n", "-5"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_saturation_without_rate_exits_2(capsys):
    assert main(["analyze", "saturation", "--storage", "4GiB"]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2
    cfg = tmp_path / "s.cfg"
    cfg.write_text("[scenario]\ntopology = missing.topo\nseed = 1\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text("[scenario]\ntopology = bundled:dfn30\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_run_custom_config(tmp_path, capsys):
    (tmp_path / "line.topo").write_text(
        "node c0 consumer\nnode r0 router\nnode p0 producer\n"
        "link c0 0 r0 0 10\nlink r0 1 p0 0 10\n")
    cfg = tmp_path / "line.cfg"
    cfg.write_text(
        "[scenario]\ntopology = line.topo\nseed = 4\nduration = 3\nout = res\n"
        "[router]\nhistory = bloom\nm_bits = 8192\nk = 4\n"
        "[router:r0]\ncache_capacity = 5\n"
        "[producer]\nerase_fraction = 1.0\n")
    assert main(["run", "--config", str(cfg)]) == 0
    text = (tmp_path / "res" / "metrics.csv").read_text()
    assert "r0,deletions," in text


def test_run_bundled_dfn30_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", "bundled:dfn30", "--seed", "1", "--out", str(a)]) == 0
    assert main(["run", "--config", "bundled:dfn30", "--seed", "1", "--out", str(b)]) == 0
    ta, tb = (a / "metrics.csv").read_text(), (b / "metrics.csv").read_text()
    assert ta == tb
    rows = list(csv.DictReader(io.StringIO(ta)))
    router_rows = [r for r in rows if r["metric"] == "InErase" and r["node_id"].startswith("r")]
    assert len(router_rows) == 30
    assert (a / "manifest.json").exists() and (a / "erase_timing.csv").exists()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "bead" in capsys.readouterr().out
