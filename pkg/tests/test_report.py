import csv
import io
import json

from cornergrowth.report import COLUMNS, Check, ExperimentReport, Row, plot_report


def make():
    rows = [Row("x", "s", 0.1 * k, 0.01, 0.5, N, N // 4, N // 4, 0.0, 100, 7)
            for k, N in enumerate((64, 128, 256), start=1)]
    checks = [Check("ok", True, 0.0, "0", exact=True), Check("soft", False, 2.0, "< 1")]
    return ExperimentReport("x", {"seed": 7, "rho": 0.5}, rows, checks, version="0.1.0+test")


def test_csv_columns_and_checks():
    text = make().to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == COLUMNS
    assert rows[1][COLUMNS.index("value")] == repr(0.1)
    assert [r[COLUMNS.index("statistic")] for r in rows[-2:]] == ["check:ok", "check:soft"]


def test_json_round_trip():
    doc = json.loads(make().to_json())
    assert doc["config"]["seed"] == 7 and len(doc["rows"]) == 3
    assert doc["checks"][1]["passed"] is False


def test_exact_failures_only_count_exact():
    r = make()
    assert r.exact_failures == [] and len(r.failures) == 1


def test_write_csv_sidecar(tmp_path):
    p = make().write(tmp_path / "out.csv", "csv")
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert p.exists() and meta["config"]["rho"] == 0.5


def test_plot_is_deterministic(tmp_path):
    a = plot_report(make(), tmp_path / "a.png")
    b = plot_report(make(), tmp_path / "b.png")
    assert a.read_bytes() == b.read_bytes()


def test_plot_skips_single_scale(tmp_path):
    r = ExperimentReport("x", {}, [Row("x", "s", 1.0, N=10)], [], version="v")
    assert plot_report(r, tmp_path / "c.png") is None
