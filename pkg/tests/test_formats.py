from pathlib import Path

import pytest
from hypothesis import given, settings

from gwilab.trees import (
    OrderedTree,
    TreeFormatError,
    dumps_luk,
    dumps_paren,
    dumps_sin,
    loads_any,
    loads_luk,
    loads_paren,
    loads_sin,
)
from gwilab.trees.laws import Geometric, SizeBiasedDispatch
from gwilab.trees.sampling import sample_gwi
from strategies import trees

DATA = Path(__file__).parent / "data"
T = OrderedTree((2, 1, 0, 0))


def test_golden_files():
    assert dumps_luk(T) == (DATA / "fixture.luk").read_text() == "LUK v1\n2 1 0 0\n"
    assert dumps_paren(T) == (DATA / "fixture.paren").read_text() == "PAREN v1\n((())())\n"
    assert loads_luk((DATA / "fixture.luk").read_text()) == T
    assert loads_paren((DATA / "fixture.paren").read_text()) == T


def test_leaf():
    assert dumps_paren(OrderedTree.leaf()) == "PAREN v1\n()\n"
    assert loads_any("LUK v1\n0\n") == OrderedTree.leaf()


@settings(max_examples=300, deadline=None)
@given(t=trees())
def test_roundtrips(t):
    assert loads_luk(dumps_luk(t)) == t
    assert loads_paren(dumps_paren(t)) == t
    assert loads_any(dumps_paren(t)) == t


def test_sin_roundtrip():
    mu = Geometric(0.6)
    for seed in range(20):
        st_ = sample_gwi(mu, SizeBiasedDispatch(mu), 15, seed)
        assert loads_sin(dumps_sin(st_)) == st_
        assert loads_any(dumps_sin(st_)) == st_


@pytest.mark.parametrize(
    "text, offset",
    [
        ("LUK v2\n0\n", 0),
        ("LUK v1\n2 x 0\n", 9),
        ("LUK v1\n2 0\n", 7),
        ("LUK v1\n0\nextra", 9),
        ("PAREN v1\n(()\n", 12),
        ("PAREN v1\n())\n", 11),
        ("PAREN v1\n()()\n", 11),
        ("PAREN v1\n(a)\n", 10),
        ("SIN v1\n2 3 [0]\n", 9),
        ("SIN v1\n2 1\n", 10),
        ("LUK v1\n0 é\n", 9),
    ],
)
def test_errors_carry_offsets(text, offset):
    with pytest.raises(TreeFormatError) as info:
        loads_any(text)
    assert info.value.offset == offset


def test_unknown_header():
    with pytest.raises(TreeFormatError):
        loads_any("TREE v1\n0\n")
