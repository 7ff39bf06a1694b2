import numpy as np
import pytest

from precipgen.data import PrecipPanel, align_network, load_network, load_panel, save_network, save_panel
from precipgen.errors import DataError
from precipgen.spatial import GaugeNetwork


def write(path, text):
    path.write_text(text)
    return path


def test_load_small_panel(tmp_path):
    p = write(tmp_path / "p.csv", "timestamp,a,b\n2016-04-04T00:00:00,0,1.5\n2016-04-04T00:00:30,0,0\n"
                                  "2016-04-04T00:01:00,2.25,0\n")
    panel = load_panel(p)
    assert panel.shape == (3, 2) and panel.sites == ["a", "b"]
    assert panel.values[2, 0] == 2.25
    assert panel.step == np.timedelta64(30000, "ms")


def test_negative_cell_named(tmp_path):
    p = write(tmp_path / "p.csv", "timestamp,a,b\n2016-04-04T00:00:00,0,1\n2016-04-04T00:00:30,0,-0.5\n")
    with pytest.raises(DataError, match=r"row 1.*'b'"):
        load_panel(p)


def test_gap_lists_missing_instant(tmp_path):
    p = write(tmp_path / "p.csv", "timestamp,a\n2016-04-04T00:00:00,0\n2016-04-04T00:00:30,0\n"
                                  "2016-04-04T00:01:30,0\n")
    with pytest.raises(DataError, match="2016-04-04T00:01:00"):
        load_panel(p)


def test_non_monotone_and_parse_errors(tmp_path):
    p = write(tmp_path / "p.csv", "timestamp,a\n2016-04-04T00:00:30,0\n2016-04-04T00:00:00,0\n")
    with pytest.raises(DataError, match="increasing"):
        load_panel(p)
    p = write(tmp_path / "q.csv", "timestamp,a\n2016-04-04T00:00:00,0\nnot-a-time,0\n")
    with pytest.raises(DataError, match="line 3"):
        load_panel(p)
    p = write(tmp_path / "r.csv", "timestamp,a\n2016-04-04T00:00:00,x\n")
    with pytest.raises(DataError, match="line 2"):
        load_panel(p)


def test_round_trip_full_precision(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.exponential(size=(40, 3)) * (rng.random((40, 3)) > 0.5)
    vals[0, 0] = np.nextafter(1.0, 2.0)
    panel = PrecipPanel.from_array(vals, ["x", "y", "z"])
    save_panel(panel, tmp_path / "p.csv")
    back = load_panel(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.values, vals)
    np.testing.assert_array_equal(back.timestamps, panel.timestamps)
    assert back.sites == panel.sites


def test_network_coordinates_and_matrix(tmp_path):
    net = load_network(write(tmp_path / "n.csv", "site,x_m,y_m\na,0,0\nb,3,4\n"))
    assert net.dist[0, 1] == 5.0
    with pytest.raises(DataError, match="symmetric"):
        load_network(write(tmp_path / "m.csv", "site,a,b\na,0,1\nb,2,0\n"))


def test_network_round_trip(tmp_path):
    net = GaugeNetwork(["a", "b", "c"], np.array([[0.0, 0.0], [1.0, 2.0], [0.1, 0.3]]))
    save_network(net, tmp_path / "c.csv")
    save_network(net, tmp_path / "d.csv", as_matrix=True)
    np.testing.assert_array_equal(load_network(tmp_path / "c.csv").dist, net.dist)
    np.testing.assert_array_equal(load_network(tmp_path / "d.csv").dist, net.dist)


def test_eight_sites_within_one_km():
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    r = np.random.default_rng(1).uniform(0, 1000, 8)
    net = GaugeNetwork([f"s{i}" for i in range(8)], np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    assert net.max_distance <= 2000.0


def test_align_network_order_and_unknown():
    net = GaugeNetwork(["a", "b", "c"], np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]))
    panel = PrecipPanel.from_array(np.zeros((2, 2)), ["c", "a"])
    sub = align_network(panel, net)
    assert sub.site_ids == ["c", "a"] and sub.dist[0, 1] == 2.0
    with pytest.raises(DataError, match="missing"):
        align_network(PrecipPanel.from_array(np.zeros((2, 1)), ["zz"]), net)
