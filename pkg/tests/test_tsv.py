import numpy as np
import pytest

from pweight import tsv
from pweight.errors import BatteryFormatError
from pweight.hypotheses import MixtureSpec, TestBattery


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadBattery:
    def test_basic(self, tmp_path):
        b = tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\nrs1\t0.01\nrs2\t0.5\n"))
        assert b.m == 2 and b.ids == ("rs1", "rs2")
        assert b.statistics is None and b.groups is None

    def test_p_out_of_range_names_line(self, tmp_path):
        with pytest.raises(BatteryFormatError) as err:
            tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\nrs1\t0.01\nrs2\t1.5\n"))
        assert err.value.line == 3
        assert ":3:" in str(err.value)

    def test_duplicate_id(self, tmp_path):
        with pytest.raises(BatteryFormatError) as err:
            tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\nrs1\t0.01\nrs1\t0.5\n"))
        assert err.value.line == 3

    def test_malformed_row(self, tmp_path):
        with pytest.raises(BatteryFormatError) as err:
            tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\nrs1\t0.01\textra\n"))
        assert err.value.line == 2
        with pytest.raises(BatteryFormatError):
            tsv.load_battery(write(tmp_path, "c.tsv", "id\tp\nrs1\tabc\n"))

    def test_bad_header(self, tmp_path):
        with pytest.raises(BatteryFormatError):
            tsv.load_battery(write(tmp_path, "b.tsv", "name\tp\nrs1\t0.01\n"))

    def test_rounded_statistic_accepted(self, tmp_path):
        b = tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\tstat\nrs1\t0.05\t1.6449\n"))
        assert b.statistics[0] == 1.6449

    def test_inconsistent_statistic_rejected(self, tmp_path):
        with pytest.raises(BatteryFormatError) as err:
            tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\tstat\nrs1\t0.05\t1.6449\nrs2\t0.95\t1.6449\n"))
        assert err.value.line == 3

    def test_two_sided_check(self, tmp_path):
        b = tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\tstat\nrs1\t0.05\t1.96\n"), two_sided=True)
        assert b.two_sided

    def test_scientific_notation_and_groups(self, tmp_path):
        b = tsv.load_battery(write(tmp_path, "b.tsv", "id\tp\tgroup\nrs1\t1e-8\tg1\nrs2\t2.5E-3\tg2\n"))
        assert b.p_values[0] == 1e-8
        assert list(b.groups) == ["g1", "g2"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(BatteryFormatError):
            tsv.load_battery(tmp_path / "absent.tsv")


class TestRoundTrip:
    def test_battery_bit_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        t = rng.standard_normal(50) * 3
        b = TestBattery.from_statistics(t, groups=np.array([f"g{j % 3}" for j in range(50)], dtype=object))
        path = tmp_path / "b.tsv"
        tsv.save_battery(b, path)
        back = tsv.load_battery(path)
        assert back.ids == b.ids
        assert np.array_equal(back.p_values, b.p_values)
        assert np.array_equal(back.statistics, b.statistics)
        assert list(back.groups) == list(b.groups)
        tsv.save_battery(back, tmp_path / "again.tsv")
        assert (tmp_path / "again.tsv").read_text() == path.read_text()

    def test_weights(self, tmp_path):
        w = np.array([0.1, 1.7, 1.2])
        tsv.save_weights(["a", "b", "c"], w, tmp_path / "w.tsv")
        ids, back = tsv.load_weights(tmp_path / "w.tsv")
        assert ids == ["a", "b", "c"] and np.array_equal(back, w)

    def test_mixture(self, tmp_path):
        q = MixtureSpec.from_atoms([(0.9, 0.0), (0.1, 3.25)])
        tsv.save_mixture(q, tmp_path / "q.tsv")
        back = tsv.load_mixture(tmp_path / "q.tsv")
        assert np.array_equal(back.masses, q.masses) and np.array_equal(back.locations, q.locations)


def test_negative_weight_rejected(tmp_path):
    with pytest.raises(BatteryFormatError):
        tsv.load_weights(write(tmp_path, "w.tsv", "id\tweight\na\t-1\n"))


def test_align_reorders_and_checks(tmp_path):
    out = tsv.align(["b", "a"], [2.0, 1.0], ("a", "b"))
    assert list(out) == [1.0, 2.0]
    with pytest.raises(BatteryFormatError):
        tsv.align(["a"], [1.0], ("a", "b"))


def test_load_means(tmp_path):
    ids, cfg = tsv.load_means(write(tmp_path, "m.tsv", "id\tmean\nx\t0\ny\t2.5\n"))
    assert ids == ["x", "y"] and cfg.m1 == 1


@pytest.mark.parametrize(
    "value,text",
    [(0.1, "0.10000000000000001"), (True, "1"), (3, "3"), (float("inf"), "inf"), (None, "")],
)
def test_fmt(value, text):
    assert tsv.fmt(value) == text
