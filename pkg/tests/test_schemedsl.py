from fractions import Fraction as F

import pytest

from conftest import HEADER
from doflab.core import CsitState, DofPoint
from doflab.errors import SchemeStructureError, SchemeSyntaxError, UnknownSchemeError
from doflab.schemedsl import (
    DataSym,
    Expr,
    Issue,
    Obs,
    Part,
    Stream,
    builtin,
    builtin_names,
    claimed_dof,
    demand_by_user,
    emit_scheme,
    load_scheme,
    parse_scheme,
    validate,
)


def send(*names, zf=()):
    return Stream(Expr(tuple((1, DataSym(n)) for n in names)), tuple(zf))


def test_builtin_names():
    assert builtin_names() == ["alt-npp-4over9", "hybrid-5over3-a", "hybrid-5over3-b"]


def test_unknown_builtin():
    with pytest.raises(UnknownSchemeError):
        builtin("nope")
    with pytest.raises(UnknownSchemeError):
        load_scheme("no/such/file.scheme")


def test_parse_hybrid_a(schemes):
    scheme = schemes["hybrid-5over3-a"]
    assert (scheme.K, scheme.M, scheme.T) == (3, 3, 6)
    assert len(scheme.symbols) == 10
    assert demand_by_user(scheme) == (6, 2, 2)
    assert claimed_dof(scheme) == DofPoint.private(1, F(1, 3), F(1, 3))
    assert scheme.uncovered == ()
    third = scheme.streams(3)
    assert third[0].expr.terms == ((1, Part(2, 1, (1,))),)
    assert third[1].expr.terms == ((1, Obs(2, 2)),) and third[1].zf == (1,)


def test_parse_alternating_scheme(schemes):
    scheme = schemes["alt-npp-4over9"]
    assert scheme.T == 9
    assert claimed_dof(scheme) == DofPoint.private(1, F(4, 9), F(4, 9))
    assert scheme.csit.row_text(7) == "P D D"
    assert scheme.csit.row_text(8) == "N P P"
    assert scheme.csit.state(9, 1) is CsitState.NONE


@pytest.mark.parametrize("name", ["alt-npp-4over9", "hybrid-5over3-a", "hybrid-5over3-b"])
def test_emit_round_trip(schemes, name):
    scheme = schemes[name]
    text = emit_scheme(scheme)
    assert parse_scheme(text) == scheme
    assert emit_scheme(parse_scheme(text)) == text


@pytest.mark.parametrize("name", ["alt-npp-4over9", "hybrid-5over3-a", "hybrid-5over3-b"])
def test_builtins_validate(schemes, name):
    report = validate(schemes[name])
    assert report.ok, report.issues


def test_load_scheme_from_file(tmp_path, schemes):
    path = tmp_path / "a.scheme"
    path.write_text(builtin("hybrid-5over3-a"))
    assert load_scheme(str(path)) == schemes["hybrid-5over3-a"]


def test_semicolons_and_compact_states():
    compact = parse_scheme('scheme "x"; users 3; antennas 3; slots 1; csit 1: PDD; data a -> R1; slot 1:; send a')
    spaced = parse_scheme('scheme "x"\nusers 3\nantennas 3\nslots 1\ncsit 1: P D D\ndata a -> R1\nslot 1:\n  send a\n')
    assert compact == spaced


def test_expression_signs():
    scheme = parse_scheme(HEADER + "slot 2:\n  send -part(R2, 1, {1,3}) + obs(R3, 1) - a zf R1\n")
    stream = scheme.streams(2)[0]
    assert stream.expr.terms == ((-1, Part(2, 1, (1, 3))), (1, Obs(3, 1)), (-1, DataSym("a")))
    assert str(stream) == "send -part(R2, 1, {1,3}) + obs(R3, 1) - a zf R1"


def test_slot_without_streams_is_empty():
    scheme = parse_scheme(HEADER + "slot 1:\n  send a\n")
    assert scheme.streams(2) == ()


# -- syntax and structure errors -------------------------------------------------


def test_unexpected_character_position():
    with pytest.raises(SchemeSyntaxError) as info:
        parse_scheme("users 3\nantennas 3\nslots 1\nsend ?")
    assert (info.value.line, info.value.column) == (4, 6)


def test_unexpected_token():
    with pytest.raises(SchemeSyntaxError) as info:
        parse_scheme("users 3 3\n")
    assert info.value.line == 1
    assert "unexpected" in str(info.value)


@pytest.mark.parametrize(
    "text",
    [
        HEADER + "slot 1:\n  send a zf R9\n",
        HEADER + "data a -> R2\n",
        HEADER + "slot 7:\n",
        HEADER + "slot 1:\nslot 1:\n",
        HEADER + "csit 2: P D D\n",
        HEADER + "slot 1:\n  send part(R2, 1, {4})\n",
        "users 3\nantennas 3\nslots 1\nusers 2\n",
        "users 3\nslots 1\ndata a -> R1\n",
        "users 3\nantennas 3\nslots 2\nsend a\n",
        "users 3\nantennas 3\nslots 2\ncsit 1: P D\n",
    ],
)
def test_structure_errors(text):
    with pytest.raises(SchemeStructureError):
        parse_scheme(text)


def test_structure_error_is_a_syntax_error():
    with pytest.raises(SchemeSyntaxError) as info:
        parse_scheme(HEADER + "slot 1:\n  send a zf R9\n")
    assert info.value.line == 9


# -- validation ------------------------------------------------------------------


def kinds(text):
    return validate(parse_scheme(HEADER + text)).kinds()


def test_causality_violation():
    assert kinds("slot 1:\n  send obs(R2, 1)\n") == {"causality"}
    assert kinds("slot 1:\n  send part(R2, 2, {1})\n") == {"causality"}


def test_zero_forcing_needs_perfect_csit():
    assert kinds("slot 1:\n  send b zf R2\n") == {"zf-requires-perfect"}


def test_observation_needs_csit():
    text = HEADER.replace("csit 1-2: P D D", "csit 1: N D D\ncsit 2: P D D")
    report = validate(parse_scheme(text + "slot 2:\n  send obs(R1, 1)\n"))
    assert report.kinds() == {"csit-availability"}


def test_too_many_streams_for_the_null_space():
    assert kinds("slot 1:\n  send b zf R1\n  send c zf R1\n  send e zf R1\n") == {"zf-capacity"}
    assert kinds("slot 1:\n  send b zf R1\n  send c zf R1\n") == set()


def test_zero_forcing_every_antenna():
    text = HEADER.replace("csit 1-2: P D D", "csit 1-2: P P P")
    assert validate(parse_scheme(text + "slot 1:\n  send b zf R1, R2, R3\n")).kinds() == {"zf-capacity"}


def test_derived_streams_share_the_null_space():
    assert kinds("slot 2:\n  send part(R2, 1, {1}) zf R1\n  send obs(R3, 1) zf R1\n  send obs(R2, 1) zf R1\n") == {
        "zf-capacity"
    }


def test_undefined_symbol():
    assert kinds("slot 1:\n  send zz\n") == {"undefined-symbol"}


def test_uncovered_csit():
    text = HEADER.replace("csit 1-2: P D D", "csit 1: P D D")
    report = validate(parse_scheme(text))
    assert report.issues == (Issue(2, "uncovered-csit", "no csit declaration covers slot 2"),)
    assert report.to_dict()["ok"] is False


def test_issues_only_grow_when_streams_are_added(schemes):
    base = schemes["hybrid-5over3-b"].with_additions(streams={2: [send("v1", zf=(2,))]})
    before = set(validate(base).issues)
    assert before
    for extra in ([send("w1")], [send("v2", zf=(1,)), send("w2", zf=(1,))], [send("u1")]):
        after = set(validate(base.with_additions(streams={3: extra})).issues)
        assert before <= after


def test_negative_control_fails_validation(schemes):
    broken = schemes["hybrid-5over3-b"].with_additions(
        symbols=(("v3", 2),), streams={1: [send("v3", zf=(1,))]}
    )
    report = validate(broken)
    assert report.kinds() == {"zf-capacity"}
    assert all(issue.slot == 1 for issue in report.issues)


def test_alternating_slot_five_mirrors_slot_four(schemes):
    scheme = schemes["alt-npp-4over9"]
    fourth, fifth = scheme.streams(4), scheme.streams(5)
    assert [s.expr.terms for s in fourth] == [((1, Part(2, 3, (1,))),), ((1, Part(2, 1, (1, 3))),)]
    assert [s.expr.terms for s in fifth] == [((1, Part(3, 3, (1,))),), ((1, Part(3, 1, (1, 2))),)]
    assert [s.zf for s in fifth] == [(), (1,)]
    assert "not a second slot 4" in builtin("alt-npp-4over9")
