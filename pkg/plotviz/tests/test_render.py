import math
import os
import subprocess
import sys

import pytest

from plotviz import FigureSpec, RenderError, aggregate, render
from plotviz.cli import main

# The simulator's documented run-level CSV schema.
HEADER = ("status,plan,ratio,regime,p_active,n_mf,total_shares,d_buy,d_sell,"
          "repetition,child_seed,m_buy,m_sell,profit,r_mf,cascade_total,"
          "closing_prices")


def single_row(ratio, n_mf, rep, r_mf, status="ok"):
    if status != "ok":
        return f"{status},single,{ratio},none,0.5,{n_mf},,,,{rep},1,,,,,,"
    return (f"ok,single,{ratio},none,0.5,{n_mf},,,,{rep},1,200,210,10,"
            f"{r_mf!r},3,101;99")


def grid_row(d_buy, d_sell, rep, r_mf):
    return (f"ok,batch,0.4,none,0.5,,2000,{d_buy},{d_sell},{rep},1,200,210,10,"
            f"{r_mf!r},3,101;99")


def write_csv(path, rows):
    path.write_text("\n".join([HEADER] + rows) + "\n")
    return str(path)


@pytest.fixture
def order_size_csv(tmp_path):
    rows = []
    for gi, ratio in enumerate((0.1, 0.2, 0.4)):
        for xi, n_mf in enumerate((10, 100, 1000)):
            for rep in range(4):
                rows.append(single_row(ratio, n_mf, rep,
                                       0.01 * gi + 0.001 * xi + 0.0001 * rep))
    return write_csv(tmp_path / "order.csv", rows)


def test_order_size_aggregation_matches_recomputation(order_size_csv, tmp_path):
    spec = FigureSpec(order_size_csv, "order-size",
                      str(tmp_path / "fig.png"))
    series = render(spec)
    assert [s.group_value for s in series] == ["0.1", "0.2", "0.4"]
    for gi, s in enumerate(series):
        assert s.x == [10.0, 100.0, 1000.0]
        for xi, mean in enumerate(s.mean):
            expected = sum(0.01 * gi + 0.001 * xi + 0.0001 * rep
                           for rep in range(4)) / 4
            assert math.isclose(mean, expected, rel_tol=0, abs_tol=1e-12)
        assert s.count == [4, 4, 4]
    assert os.path.getsize(tmp_path / "fig.png") > 0


def test_rendering_is_read_only(order_size_csv, tmp_path):
    before = open(order_size_csv, "rb").read()
    render(FigureSpec(order_size_csv, "order-size", str(tmp_path / "f.png")))
    assert open(order_size_csv, "rb").read() == before


def test_period_grid_groups_by_sell_periods(tmp_path):
    rows = [grid_row(d_buy, d_sell, rep, 0.01 * d_buy - 0.005 * d_sell)
            for d_buy in range(1, 6) for d_sell in range(1, 6)
            for rep in range(2)]
    csv_path = write_csv(tmp_path / "grid.csv", rows)
    series = render(FigureSpec(csv_path, "period-grid",
                               str(tmp_path / "grid.png")))
    assert len(series) == 5
    assert all(s.x == [1.0, 2.0, 3.0, 4.0, 5.0] for s in series)
    assert os.path.getsize(tmp_path / "grid.png") > 0


def test_single_row_plot_without_band(tmp_path):
    csv_path = write_csv(tmp_path / "one.csv", [single_row(0.4, 100, 0, 0.02)])
    series = render(FigureSpec(csv_path, "order-size", str(tmp_path / "p.png")))
    assert len(series) == 1
    assert series[0].count == [1]
    assert series[0].std == [0.0]


def test_book_exhausted_only_rows_error(tmp_path):
    csv_path = write_csv(tmp_path / "bad.csv",
                         [single_row(0.4, 100, 0, 0.0, status="book_exhausted")])
    with pytest.raises(RenderError, match="no ok-status rows"):
        aggregate(FigureSpec(csv_path, "order-size", str(tmp_path / "x.png")))


def test_missing_column_error(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("status,ratio,r_mf\nok,0.4,0.01\n")
    with pytest.raises(RenderError, match="n_mf"):
        aggregate(FigureSpec(str(path), "order-size", str(tmp_path / "x.png")))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(RenderError):
        FigureSpec("whatever.csv", "heatmap", "out.png")


def test_custom_group_column(tmp_path):
    rows = [single_row(0.4, n, rep, 0.01) for n in (10, 20) for rep in range(2)]
    csv_path = write_csv(tmp_path / "g.csv", rows)
    series = render(FigureSpec(csv_path, "order-size", str(tmp_path / "g.png"),
                               group_by="regime"))
    assert [s.group_value for s in series] == ["none"]


def test_cli_render_and_errors(order_size_csv, tmp_path, capsys):
    out = tmp_path / "cli.png"
    assert main(["render", "--csv", order_size_csv, "--kind", "order-size",
                 "--out", str(out)]) == 0
    assert out.exists()
    assert "3 series" in capsys.readouterr().out

    code = main(["render", "--csv", str(tmp_path / "absent.csv"),
                 "--kind", "order-size", "--out", str(out)])
    assert code == 1

    empty = write_csv(tmp_path / "none_ok.csv",
                      [single_row(0.4, 10, 0, 0.0, status="book_exhausted")])
    assert main(["render", "--csv", empty, "--kind", "order-size",
                 "--out", str(out)]) == 1


def test_cli_module_entry():
    result = subprocess.run([sys.executable, "-m", "plotviz.cli", "render",
                             "--help"], capture_output=True, text=True)
    assert result.returncode == 0
