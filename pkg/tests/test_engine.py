from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from conftest import HEADER
from doflab.bounds import box_inequalities
from doflab.core import DofPoint
from doflab.engine import (
    CHANNEL_DOMAIN,
    PRIME,
    FieldBackend,
    FloatBackend,
    Mode,
    RationalBackend,
    coefficients_of,
    decode_check,
    desired_columns,
    draw_channels,
    expand,
    get_backend,
    keyed_rng,
    make_precoders,
    run_trial,
    simulate,
)
from doflab.errors import CausalityError, InfeasiblePrecoderError, ParameterError
from doflab.polytope import contains
from doflab.schemedsl import DataSym, Expr, Part, Stream, parse_scheme

BUILTINS = ["alt-npp-4over9", "hybrid-5over3-a", "hybrid-5over3-b"]


def as_lists(channels):
    return [[[str(x) for x in row] for row in slot] for slot in channels.entries]


def observed_rows(observations, scheme):
    return {(r, t): observations.row(r, t) for r in range(1, scheme.K + 1) for t in range(1, scheme.T + 1)}


# -- randomness ------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["field", "rational", "float"])
def test_channels_are_deterministic(schemes, mode):
    scheme = schemes["hybrid-5over3-a"]
    first = draw_channels(scheme, 7, mode, trial=3)
    again = draw_channels(scheme, 7, mode, trial=3)
    assert as_lists(first) == as_lists(again)
    assert as_lists(first) != as_lists(draw_channels(scheme, 8, mode, trial=3))


def test_field_entries_are_in_range(schemes):
    channels = draw_channels(schemes["hybrid-5over3-a"], 1, Mode.FIELD)
    values = [int(x) for slot in channels.entries for row in slot for x in row]
    assert all(0 <= v < PRIME for v in values)
    assert len(set(values)) == len(values)


def test_keyed_streams_are_independent():
    a = keyed_rng(5, CHANNEL_DOMAIN, 1, 1, 0).standard_normal(4000)
    b = keyed_rng(5, CHANNEL_DOMAIN, 2, 1, 0).standard_normal(4000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_field_draws_look_uniform():
    backend = FieldBackend()
    draws = np.array([int(x) for t in range(1, 101) for x in backend.draw(keyed_rng(9, CHANNEL_DOMAIN, t, 1, 0), 100)])
    counts, _ = np.histogram(draws, bins=10, range=(0, PRIME))
    assert stats.chisquare(counts).pvalue > 1e-4


def test_unknown_mode():
    with pytest.raises(ParameterError):
        get_backend("complex")
    assert Mode.parse("FLOAT") is Mode.FLOAT


# -- precoders -------------------------------------------------------------------


def test_field_zero_forcing_is_exact(schemes):
    backend = FieldBackend()
    for seed in range(100):
        scheme = schemes[BUILTINS[seed % 3]]
        channels = draw_channels(scheme, seed, Mode.FIELD)
        precoders = make_precoders(scheme, channels)
        for t in range(1, scheme.T + 1):
            for index, stream in enumerate(scheme.streams(t)):
                for r in stream.zf:
                    assert backend.dot(channels.row(t, r), precoders.beam(t, index)) == 0


def test_float_zero_forcing_within_tolerance(schemes):
    scheme = schemes["alt-npp-4over9"]
    channels = draw_channels(scheme, 3, Mode.FLOAT)
    precoders = make_precoders(scheme, channels)
    for t in range(1, scheme.T + 1):
        for index, stream in enumerate(scheme.streams(t)):
            for r in stream.zf:
                assert abs(channels.row(t, r) @ precoders.beam(t, index)) <= 1e-9


def test_rational_zero_forcing_is_exact(schemes):
    scheme = schemes["hybrid-5over3-b"]
    channels = draw_channels(scheme, 4, Mode.RATIONAL)
    precoders = make_precoders(scheme, channels)
    backend = RationalBackend()
    for index, stream in enumerate(scheme.streams(1)):
        for r in stream.zf:
            assert backend.dot(channels.row(1, r), precoders.beam(1, index)) == 0


@pytest.mark.parametrize("backend", [FieldBackend(), RationalBackend(), FloatBackend()])
def test_null_space_of_two_rows_is_a_line(backend):
    H = backend.matrix([backend.draw(keyed_rng(1, CHANNEL_DOMAIN, 1, r, 0), 3) for r in (1, 2)], 3)
    assert backend.null_space(H).shape == (1, 3)


def test_zero_forcing_every_antenna_is_infeasible():
    text = HEADER.replace("csit 1-2: P D D", "csit 1-2: P P P") + "slot 1:\n  send b zf R1, R2, R3\n"
    scheme = parse_scheme(text)
    with pytest.raises(InfeasiblePrecoderError):
        make_precoders(scheme, draw_channels(scheme, 0, Mode.FIELD))


# -- expansion -------------------------------------------------------------------


def test_zero_forced_symbols_are_absent_at_the_protected_receiver(schemes):
    scheme = schemes["hybrid-5over3-a"]
    channels = draw_channels(scheme, 2, Mode.FIELD)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    names = scheme.symbol_names
    first = observations.row(1, 1)
    for i, name in enumerate(names):
        if name in ("v1", "v2", "w1", "w2"):
            assert first[i] == 0
        elif name in ("u1", "u2", "u3"):
            assert first[i] != 0


def test_part_keeps_only_owner_columns(schemes):
    scheme = schemes["hybrid-5over3-a"]
    backend = FieldBackend()
    channels = draw_channels(scheme, 2, Mode.FIELD)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    observed = observed_rows(observations, scheme)
    vector = coefficients_of(scheme, Expr(((1, Part(3, 3, (1,))),)), observed, 5, backend)
    for i, (_, user) in enumerate(scheme.symbols):
        if user != 1:
            assert vector[i] == 0


def test_future_observation_raises(schemes):
    scheme = schemes["hybrid-5over3-a"]
    with pytest.raises(CausalityError):
        coefficients_of(scheme, Expr(((1, Part(2, 3, (1,))),)), {}, 3, FieldBackend())


def test_coefficients_are_linear(schemes):
    scheme = schemes["hybrid-5over3-a"]
    backend = FieldBackend()
    channels = draw_channels(scheme, 6, Mode.FIELD)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    observed = observed_rows(observations, scheme)
    atoms = [DataSym(n) for n in scheme.symbol_names]
    atoms += [Part(r, t, owners) for r in (1, 2, 3) for t in (1, 2, 3) for owners in ((1,), (2, 3), (1, 2, 3))]
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = (atoms[int(i)] for i in rng.choice(len(atoms), size=2))
        sign = int(rng.choice([-1, 1]))
        combined = coefficients_of(scheme, Expr(((1, a), (sign, b))), observed, 4, backend)
        left = coefficients_of(scheme, Expr(((1, a),)), observed, 4, backend)
        right = coefficients_of(scheme, Expr(((1, b),)), observed, 4, backend)
        expected = left + right if sign > 0 else left - right
        assert np.array_equal(combined.view(np.ndarray), expected.view(np.ndarray))


def test_empty_slot_gives_zero_rows():
    scheme = parse_scheme(HEADER + "slot 1:\n  send a\n")
    channels = draw_channels(scheme, 0, Mode.RATIONAL)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    for r in (1, 2, 3):
        assert all(x == 0 for x in observations.row(r, 2))


# -- decodability ----------------------------------------------------------------


@pytest.mark.parametrize("backend", [FieldBackend(), RationalBackend(), FloatBackend()])
def test_decode_check_small_cases(backend):
    identity = backend.matrix([backend.unit(3, i) for i in range(3)], 3)
    assert decode_check(identity, [0, 1])
    twin = backend.matrix([backend.unit(2, 0), backend.unit(2, 0)], 2)
    twin[:, 1] = twin[:, 0]
    assert not decode_check(twin, [0])


def test_rank_deficit_when_desired_columns_collide():
    backend = FieldBackend()
    G = backend.matrix([backend.unit(3, 0) + backend.unit(3, 1), backend.unit(3, 2)], 3)
    assert not decode_check(G, [0, 1])
    assert decode_check(G, [2])


@pytest.mark.parametrize("name", BUILTINS)
def test_dropping_a_desired_symbol_keeps_decodability(schemes, name):
    scheme = schemes[name]
    channels = draw_channels(scheme, 1, Mode.FIELD)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    for r in range(1, scheme.K + 1):
        desired = desired_columns(scheme, r)
        assert decode_check(observations.receiver(r), desired)
        assert decode_check(observations.receiver(r), desired[1:])


# -- simulation ------------------------------------------------------------------


@pytest.mark.parametrize(
    "name, achieved",
    [
        ("hybrid-5over3-a", (1, F(1, 3), F(1, 3))),
        ("hybrid-5over3-b", (1, F(1, 3), F(1, 3))),
        ("alt-npp-4over9", (1, F(4, 9), F(4, 9))),
    ],
)
def test_builtins_decode_in_every_trial(schemes, name, achieved):
    report = simulate(schemes[name], 100, 7, Mode.FIELD)
    assert report.successes_per_receiver == (100, 100, 100)
    assert report.all_decodable == 100
    assert report.achieved_dof == DofPoint.private(*achieved)
    assert report.failure_bound < 1e-12


def test_achieved_points_respect_the_outer_bound(schemes, private31):
    for name in ("hybrid-5over3-a", "hybrid-5over3-b"):
        point = simulate(schemes[name], 5, 1).achieved_dof
        assert contains(private31, point).feasible
    corner = simulate(schemes["alt-npp-4over9"], 5, 1).achieved_dof
    assert corner == DofPoint.private(1, F(4, 9), F(4, 9))
    assert all(row.holds(corner) for row in box_inequalities(3))


def test_negative_control_never_decodes(schemes):
    broken = schemes["hybrid-5over3-b"].with_additions(
        symbols=(("v3", 2),), streams={1: [Stream(Expr(((1, DataSym("v3")),)), (1,))]}
    )
    report = simulate(broken, 100, 7, Mode.FIELD)
    assert report.all_decodable == 0
    assert report.successes_per_receiver[1] == 0
    assert report.achieved_dof is None


@pytest.mark.parametrize("name", BUILTINS)
def test_field_and_rational_agree(schemes, name):
    scheme = schemes[name]
    for seed in range(20):
        field, _ = run_trial(scheme, seed, Mode.FIELD, 0)
        rational, _ = run_trial(scheme, seed, Mode.RATIONAL, 0)
        assert [r.decodable for r in field.receivers] == [r.decodable for r in rational.receivers]


def test_float_mode_decodes(schemes):
    report = simulate(schemes["hybrid-5over3-a"], 10, 3, Mode.FLOAT)
    assert report.all_decodable == 10
    assert report.failure_bound is None


def test_threads_do_not_change_the_report(schemes):
    scheme = schemes["hybrid-5over3-b"]
    assert simulate(scheme, 12, 4, threads=4) == simulate(scheme, 12, 4, threads=1)


def test_simulate_rejects_bad_arguments(schemes):
    with pytest.raises(ParameterError):
        simulate(schemes["hybrid-5over3-a"], 0, 1)
    with pytest.raises(ParameterError):
        simulate(schemes["hybrid-5over3-a"], 1, 1, threads=0)


def test_report_document(schemes):
    document = simulate(schemes["hybrid-5over3-a"], 3, 2).to_dict()
    assert document["achieved_dof"] == ["1", "1/3", "1/3"]
    assert document["successes_per_receiver"] == [3, 3, 3]
    assert document["mode"] == "field"
