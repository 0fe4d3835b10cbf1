import json

import pytest

from scottshift.errors import CouplingTooLarge, InvalidArgument
from scottshift.report import CSV_FIELDS, ScottRow, make_row, rows_to_csv, rows_to_json, scott_table
from scottshift.shift import scott_coefficient
from scottshift.thomasfermi import solve_majorana, tf_energy


@pytest.fixture(scope="module")
def series():
    return scott_coefficient(0.3, l_max=8, grid_size=80)


@pytest.fixture(scope="module")
def rows(series):
    return scott_table([1.0, 10.0, 80.0], 0.3, series=series)


class TestRows:
    def test_identities(self):
        row = make_row(10.0, 0.3, 2, -0.75, 0.02, 1e-6)
        assert row.e_tf == -0.75 * 10.0 ** (7 / 3)
        assert row.scott_nonrel == 0.25 * 2 * 100.0
        assert row.scott_shift == 0.02 * 2 * 100.0
        assert row.e_estimate == row.e_tf + row.scott_nonrel - row.scott_shift
        assert row.s_error == 1e-6 and row.q == 2

    def test_table_values(self, series, rows):
        e1 = tf_energy(solve_majorana(q=2), 1.0)
        for row in rows:
            assert row.e_tf == pytest.approx(e1 * row.Z ** (7 / 3), rel=1e-14)
            assert row.scott_shift == pytest.approx(series.s_value * 2 * row.Z**2, rel=1e-14)
            assert row.e_estimate < row.e_tf + row.scott_nonrel
        assert rows[1].e_tf / rows[0].e_tf == pytest.approx(10 ** (7 / 3), rel=1e-13)

    def test_spin_enters_linearly(self, series):
        one = scott_table([5.0], 0.3, q=1, series=series)[0]
        two = scott_table([5.0], 0.3, q=2, series=series)[0]
        assert two.scott_shift == 2 * one.scott_shift
        assert two.scott_nonrel == 2 * one.scott_nonrel

    def test_bad_z(self):
        with pytest.raises(InvalidArgument):
            make_row(0.0, 0.3, 2, -0.7, 0.01, 0.0)

    def test_table_validation(self, series):
        with pytest.raises(InvalidArgument):
            scott_table([1.0], 0.0)
        with pytest.raises(CouplingTooLarge):
            scott_table([1.0], 0.7)
        with pytest.raises(InvalidArgument):
            scott_table([1.0], 0.3, q=0, series=series)
        with pytest.raises(InvalidArgument):
            scott_table([1.0, -2.0], 0.3, series=series)
        with pytest.raises(InvalidArgument):
            scott_table([1.0], 0.4, series=series)
        with pytest.raises(InvalidArgument):
            scott_table([1.0], 0.3, q=1, series=series, tf_solution=solve_majorana(q=2))


class TestSerialization:
    def test_csv(self, rows):
        text = rows_to_csv(rows)
        lines = text.split("\n")
        assert "\r" not in text and text.endswith("\n")
        assert lines[0] == ",".join(CSV_FIELDS)
        assert len(lines) == len(rows) + 2 and lines[-1] == ""
        cells = lines[1].split(",")
        assert cells[2] == "2"
        assert float(cells[3]) == rows[0].e_tf

    def test_json_mirrors_csv(self, rows):
        data = json.loads(rows_to_json(rows))
        assert [list(d) for d in data] == [list(CSV_FIELDS)] * len(rows)
        assert [ScottRow(**d) for d in data] == rows

    def test_empty(self):
        assert rows_to_csv([]) == ",".join(CSV_FIELDS) + "\n"
        assert rows_to_json([]) == "[]"
