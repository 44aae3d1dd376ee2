import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from abip import GeneralLp, StandardLp
from abip.ingest.mps import MpsParseError, parse_mps, read_mps, write_mps

from conftest import netlib_path

FIXED = """\
NAME          TESTLP
ROWS
 N  COST
 L  LIM1
 G  LIM2
 E  MYEQN
COLUMNS
    XONE      COST         1.0   LIM1         1.0
    XONE      LIM2         1.0
    YTWO      COST         2.0   LIM1         1.0
    YTWO      MYEQN       -1.0
    ZTHREE    COST        -1.0   MYEQN        1.0
RHS
    RHS       COST        -3.5
    RHS       LIM1         4.0   LIM2         1.0
    RHS       MYEQN        7.0
BOUNDS
 UP BND       XONE         4.0
 LO BND       YTWO        -1.0
 UP BND       YTWO         1.0
ENDATA
"""

FREE = """\
NAME TESTLP
ROWS
 N COST
 L LIM1
 G LIM2
 E MYEQN
COLUMNS
 XONE COST 1 LIM1 1
 XONE LIM2 1
 YTWO COST 2 LIM1 1
 YTWO MYEQN -1
 ZTHREE COST -1 MYEQN 1
RHS
 RHS COST -3.5
 RHS LIM1 4 LIM2 1
 RHS MYEQN 7
BOUNDS
 UP BND XONE 4
 LO BND YTWO -1
 UP BND YTWO 1
ENDATA
"""


def assert_same_lp(p: GeneralLp, q: GeneralLp):
    assert p.shape == q.shape
    assert (p.A != q.A).nnz == 0
    np.testing.assert_array_equal(p.b, q.b)
    np.testing.assert_array_equal(p.c, q.c)
    np.testing.assert_array_equal(p.lower, q.lower)
    np.testing.assert_array_equal(p.upper, q.upper)
    assert p.objective_offset == q.objective_offset
    assert p.objective_sense == q.objective_sense


def test_fixed_layout():
    lp = parse_mps(FIXED)
    assert lp.name == "TESTLP"
    assert lp.row_names == ("LIM1", "LIM2", "MYEQN")
    assert lp.col_names == ("XONE", "YTWO", "ZTHREE", "LIM1_slack", "LIM2_slack")
    np.testing.assert_array_equal(
        lp.A.toarray(), [[1, 1, 0, 1, 0], [1, 0, 0, 0, -1], [0, -1, 1, 0, 0]]
    )
    np.testing.assert_array_equal(lp.b, [4, 1, 7])
    np.testing.assert_array_equal(lp.c, [1, 2, -1, 0, 0])
    np.testing.assert_array_equal(lp.lower, [0, -1, 0, 0, 0])
    np.testing.assert_array_equal(lp.upper, [4, 1, math.inf, math.inf, math.inf])
    # the objective RHS entry is minus the constant term
    assert lp.objective_offset == 3.5


def test_free_layout_matches_fixed():
    assert_same_lp(parse_mps(FIXED), parse_mps(FREE))
    assert_same_lp(parse_mps(FREE), parse_mps(FREE, fmt="free"))


def _card(*fields):
    """One fixed-column record; fields start at columns 2, 5, 15, 25, 40 and 50."""
    starts = (1, 4, 14, 24, 39, 49)
    line = ""
    for pos, f in zip(starts, fields):
        line = line.ljust(pos) + f
    return line


def test_fixed_layout_with_blank_set_names_and_spaces_in_names():
    lines = [
        "NAME          FIXED",
        "ROWS",
        _card("N", "COST"),
        _card("L", "ROW A"),
        "COLUMNS",
        _card("", "X 1", "COST", "1.0", "ROW A", "2.0"),
        "RHS",
        _card("", "", "ROW A", "4.0"),
        "BOUNDS",
        _card("UP", "", "X 1", "3.0"),
        "ENDATA",
    ]
    lp = parse_mps("\n".join(lines) + "\n")
    assert lp.row_names == ("ROW A",)
    assert lp.col_names == ("X 1", "ROW A_slack")
    np.testing.assert_array_equal(lp.A.toarray(), [[2.0, 1.0]])
    np.testing.assert_array_equal(lp.b, [4.0])
    np.testing.assert_array_equal(lp.upper, [3.0, math.inf])


def test_ranges_sign_conventions():
    text = """\
NAME R
ROWS
 N obj
 L r1
 G r2
 E r3
 E r4
COLUMNS
 x obj 1 r1 1
 x r2 1
 x r3 1
 x r4 1
RHS
 rhs r1 5 r2 2
 rhs r3 3 r4 3
RANGES
 rng r1 2 r2 -4
 rng r3 1.5 r4 -1.5
ENDATA
"""
    lp = parse_mps(text)
    A = lp.A.toarray()
    # L: 3 <= x <= 5 with x + t = 5, 0 <= t <= 2
    # G: 2 <= x <= 6 with x - t = 2, 0 <= t <= 4
    # E with R > 0: 3 <= x <= 4.5 with x - t = 3; R < 0: 1.5 <= x <= 3 with x + t = 3
    np.testing.assert_array_equal(A[:, 1:], np.diag([1.0, -1.0, -1.0, 1.0]))
    np.testing.assert_array_equal(lp.upper[1:], [2.0, 4.0, 1.5, 1.5])
    np.testing.assert_array_equal(lp.lower[1:], 0.0)


def test_objsense_max():
    text = "NAME M\nOBJSENSE\n    MAX\nROWS\n N obj\n L c1\nCOLUMNS\n x obj 2 c1 1\nRHS\n rhs c1 3\n rhs obj 1\nENDATA\n"
    lp = parse_mps(text)
    assert lp.objective_sense == -1
    np.testing.assert_array_equal(lp.c, [-2.0, 0.0])
    assert lp.objective_offset == 1.0
    text2 = write_mps(lp)
    assert "MAX" in text2
    assert_same_lp(lp, parse_mps(text2))


def test_bound_types():
    text = """\
NAME B
ROWS
 N obj
 E e
COLUMNS
 a e 1
 b e 1
 c e 1
 d e 1
 f e 1
 g e 1
RHS
 rhs e 1
BOUNDS
 FR bnd a
 MI bnd b
 UP bnd c -2
 FX bnd d 3
 BV bnd f
 LO bnd g 1
 PL bnd g
ENDATA
"""
    lp = parse_mps(text)
    np.testing.assert_array_equal(lp.lower, [-math.inf, -math.inf, -math.inf, 3, 0, 1])
    np.testing.assert_array_equal(lp.upper, [math.inf, math.inf, -2, 3, 1, math.inf])


def test_only_first_rhs_set_is_used():
    text = "NAME S\nROWS\n N obj\n E e\nCOLUMNS\n x e 1\nRHS\n first e 1\n second e 9\nENDATA\n"
    assert parse_mps(text).b[0] == 1.0


def test_marker_lines_are_skipped():
    text = """\
NAME K
ROWS
 N obj
 E e
COLUMNS
 M1 'MARKER' 'INTORG'
 x e 1
 M2 'MARKER' 'INTEND'
RHS
 rhs e 1
ENDATA
"""
    lp = parse_mps(text)
    assert lp.shape == (1, 1)


@pytest.mark.parametrize(
    "text, line",
    [
        ("NAME X\nROWS\n N obj\n E e\nCOLUMNS\n x e abc\nENDATA\n", 6),
        ("NAME X\nROWS\n N obj\n E e\nCOLUMNS\n x nope 1\nENDATA\n", 6),
        ("NAME X\nROWS\n N obj\n Q e\nCOLUMNS\n x e 1\nENDATA\n", 4),
        ("NAME X\nROWS\n N obj\n E e\nCOLUMNS\n x e 1\n x e 2\nENDATA\n", 7),
        ("NAME X\nROWS\n N obj\n E e\nCOLUMNS\n x e 1\nBOUNDS\n XX bnd x 1\nENDATA\n", 8),
        ("NAME X\nROWS\n N obj\n E e\nCOLUMNS\n x e 1\nBOUNDS\n UP bnd y 1\nENDATA\n", 8),
    ],
)
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(MpsParseError) as info:
        parse_mps(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_read_mps_names_model_after_file(tmp_path):
    path = tmp_path / "unnamed.mps"
    path.write_text(FREE.replace("NAME TESTLP", "NAME"))
    assert read_mps(path).name == "unnamed"


@pytest.mark.parametrize("name", ["AFIRO", "SC50A", "ADLITTLE", "BLEND"])
def test_round_trip_is_idempotent_on_fixtures(name):
    lp1 = read_mps(netlib_path(name))
    lp2 = parse_mps(write_mps(lp1))
    lp3 = parse_mps(write_mps(lp2))
    assert_same_lp(lp1, lp2)
    assert_same_lp(lp2, lp3)
    assert lp2.col_names == lp1.col_names
    assert lp2.row_names == lp1.row_names


def test_round_trip_hand_written():
    for text in (FIXED, FREE):
        lp1 = parse_mps(text)
        assert_same_lp(lp1, parse_mps(write_mps(lp1)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 5), n=st.integers(1, 6))
def test_round_trip_random(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.6)
    lower = rng.choice([0.0, -1.5, -math.inf, 2.0], n)
    upper = np.where(rng.random(n) < 0.5, math.inf, np.where(np.isfinite(lower), lower, 0.0) + rng.uniform(0, 3, n))
    lp1 = GeneralLp(sp.csc_matrix(A), rng.standard_normal(m), rng.standard_normal(n) * (rng.random(n) < 0.7),
                    lower, upper, objective_offset=float(rng.normal()), objective_sense=int(rng.choice([1, -1])))
    lp2 = parse_mps(write_mps(lp1))
    assert_same_lp(lp1, lp2)


def test_write_standard_lp(tmp_path):
    lp = StandardLp(np.array([[1.0, 2.0]]), [3.0], [1.0, 0.0], objective_offset=2.0)
    out = tmp_path / "std.mps"
    text = write_mps(lp, str(out))
    assert out.read_text() == text
    back = parse_mps(text)
    np.testing.assert_array_equal(back.A.toarray(), [[1.0, 2.0]])
    np.testing.assert_array_equal(back.lower, [0.0, 0.0])
    assert back.objective_offset == 2.0


@pytest.mark.parametrize(
    "name, dims",
    [("AFIRO", (27, 51, 102)), ("SC50A", (50, 78, 160)), ("SC105", (105, 163, 340)), ("ADLITTLE", (56, 138, 424))],
)
def test_fixture_dimensions(name, dims):
    lp = read_mps(netlib_path(name))
    assert (*lp.shape, lp.nnz) == dims
