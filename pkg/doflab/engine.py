"""
Linear simulation of a scheme.

Channels and beamformers are drawn at random, each receiver's observations are
expanded into coordinates over the declared data symbols, and decodability is
certified by rank: receiver r decodes its symbols iff

    rank(G_r) == rank(G_r restricted to other users' symbols) + number of desired symbols

Three arithmetic backends share one interface: a large prime field (exact,
Schwartz-Zippel bounded false negatives), random rationals (exact) and complex
floats (SVD rank with a relative threshold).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import galois
import numpy as np
import scipy.linalg

from . import linalg
from .core import DofPoint, UserSubset, format_rational
from .errors import CausalityError, InfeasiblePrecoderError, ParameterError
from .schemedsl import DataSym, Expr, Obs, Part, Scheme, Stream

logger = logging.getLogger(__name__)

PRIME = 2**61 - 1
FLOAT_RANK_TOLERANCE = 1e-9

CHANNEL_DOMAIN = 1
BEAM_DOMAIN = 2


class Mode(Enum):
    FIELD = "field"
    RATIONAL = "rational"
    FLOAT = "float"

    @classmethod
    def parse(cls, value: Mode | str) -> Mode:
        if isinstance(value, Mode):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ParameterError(f"unknown mode {value!r} (use field, rational or float)") from None


def keyed_rng(seed: int, domain: int, slot: int, index: int, trial: int) -> np.random.Generator:
    """Counter-based generator; every (seed, domain, slot, index, trial) gets its own stream."""
    key = [seed & (2**64 - 1), domain]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, slot, index, trial]))


# -- arithmetic backends ---------------------------------------------------------


@lru_cache(maxsize=None)
def prime_field():
    return galois.GF(PRIME)


class FieldBackend:
    mode = Mode.FIELD

    def __init__(self):
        self.GF = prime_field()

    def draw(self, rng: np.random.Generator, n: int):
        return self.GF(rng.integers(0, PRIME, size=n, dtype=np.int64).tolist())

    def zeros(self, n: int):
        return self.GF.Zeros(n)

    def unit(self, n: int, i: int):
        vector = self.GF.Zeros(n)
        vector[i] = 1
        return vector

    def matrix(self, rows: Sequence, ncols: int):
        if not len(rows):
            return self.GF.Zeros((0, ncols))
        return self.GF(np.vstack([np.asarray(row.view(np.ndarray)) for row in rows]))

    def dot(self, a, b):
        return (a * b).sum()

    def scale(self, scalar, vector):
        return scalar * vector

    def combine(self, coefficients, basis):
        return coefficients @ basis

    def null_space(self, A):
        return A.null_space()

    def rank(self, A, scale=None) -> int:
        if A.shape[0] == 0 or A.shape[1] == 0:
            return 0
        return int(np.linalg.matrix_rank(A))

    def is_zero(self, vector) -> bool:
        return not np.any(vector.view(np.ndarray))


class RationalBackend:
    mode = Mode.RATIONAL

    def draw(self, rng: np.random.Generator, n: int):
        numerators = rng.integers(-(2**20), 2**20 + 1, size=n)
        denominators = rng.integers(1, 2**10 + 1, size=n)
        return np.array([Fraction(int(a), int(b)) for a, b in zip(numerators, denominators)], dtype=object)

    def zeros(self, n: int):
        return np.array([Fraction(0)] * n, dtype=object)

    def unit(self, n: int, i: int):
        vector = self.zeros(n)
        vector[i] = Fraction(1)
        return vector

    def matrix(self, rows: Sequence, ncols: int):
        if not len(rows):
            return np.empty((0, ncols), dtype=object)
        return np.array([list(row) for row in rows], dtype=object)

    def dot(self, a, b):
        return sum((x * y for x, y in zip(a, b)), Fraction(0))

    def scale(self, scalar, vector):
        return np.array([scalar * x for x in vector], dtype=object)

    def combine(self, coefficients, basis):
        return np.array(
            [sum((c * row[j] for c, row in zip(coefficients, basis)), Fraction(0)) for j in range(basis.shape[1])],
            dtype=object,
        )

    def null_space(self, A):
        basis = linalg.null_space(A.tolist(), A.shape[1])
        return np.array(basis, dtype=object).reshape(len(basis), A.shape[1])

    def rank(self, A, scale=None) -> int:
        if A.shape[0] == 0 or A.shape[1] == 0:
            return 0
        return linalg.rank(A.tolist())

    def is_zero(self, vector) -> bool:
        return all(x == 0 for x in vector)


class FloatBackend:
    mode = Mode.FLOAT

    def draw(self, rng: np.random.Generator, n: int):
        return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)

    def zeros(self, n: int):
        return np.zeros(n, dtype=complex)

    def unit(self, n: int, i: int):
        vector = np.zeros(n, dtype=complex)
        vector[i] = 1
        return vector

    def matrix(self, rows: Sequence, ncols: int):
        if not len(rows):
            return np.zeros((0, ncols), dtype=complex)
        return np.vstack(rows).astype(complex)

    def dot(self, a, b):
        return a @ b

    def scale(self, scalar, vector):
        return scalar * vector

    def combine(self, coefficients, basis):
        return coefficients @ basis

    def null_space(self, A):
        return scipy.linalg.null_space(A).T

    def rank(self, A, scale=None) -> int:
        """Singular values above FLOAT_RANK_TOLERANCE times `scale` (default: A's largest)."""
        if A.shape[0] == 0 or A.shape[1] == 0:
            return 0
        singular = np.linalg.svd(A, compute_uv=False)
        reference = singular.max() if scale is None else scale
        if reference == 0:
            return 0
        return int(np.sum(singular > FLOAT_RANK_TOLERANCE * reference))

    def is_zero(self, vector) -> bool:
        return not np.any(vector)


def get_backend(mode: Mode | str):
    mode = Mode.parse(mode)
    if mode is Mode.FIELD:
        return FieldBackend()
    if mode is Mode.RATIONAL:
        return RationalBackend()
    return FloatBackend()


def _backend_for(G):
    if isinstance(G, galois.FieldArray):
        return FieldBackend()
    if G.dtype == object:
        return RationalBackend()
    return FloatBackend()


# -- channels, precoders, expansion ----------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    mode: Mode
    seed: int
    trial: int
    entries: tuple[tuple[object, ...], ...]  # [slot-1][receiver-1] -> row of length M

    def row(self, slot: int, receiver: int):
        return self.entries[slot - 1][receiver - 1]


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    beams: tuple[tuple[object, ...], ...]  # [slot-1][stream] -> column of length M

    def beam(self, slot: int, stream: int):
        return self.beams[slot - 1][stream]


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    """G_r for every receiver; columns follow the declared data-symbol order."""

    mode: Mode
    symbols: tuple[str, ...]
    matrices: tuple[object, ...]  # [receiver-1] -> T x N
    degree: int

    def receiver(self, r: int):
        return self.matrices[r - 1]

    def row(self, r: int, slot: int):
        return self.matrices[r - 1][slot - 1]


def draw_channels(scheme: Scheme, seed: int, mode: Mode | str, trial: int = 0) -> ChannelRealization:
    backend = get_backend(mode)
    entries = tuple(
        tuple(
            backend.draw(keyed_rng(seed, CHANNEL_DOMAIN, t, r, trial), scheme.M)
            for r in range(1, scheme.K + 1)
        )
        for t in range(1, scheme.T + 1)
    )
    return ChannelRealization(backend.mode, seed, trial, entries)


def make_precoders(scheme: Scheme, channels: ChannelRealization) -> PrecoderSet:
    """Generic beams, restricted to the joint null space of the zero-forced receivers."""
    backend = get_backend(channels.mode)
    beams = []
    for t in range(1, scheme.T + 1):
        slot_beams = []
        for index, stream in enumerate(scheme.streams(t)):
            rng = keyed_rng(channels.seed, BEAM_DOMAIN, t, index, channels.trial)
            if not stream.zf:
                beam = backend.draw(rng, scheme.M)
            else:
                H = backend.matrix([channels.row(t, r) for r in stream.zf], scheme.M)
                basis = backend.null_space(H)
                if basis.shape[0] == 0:
                    raise InfeasiblePrecoderError(
                        f"slot {t}: zero-forcing at {len(stream.zf)} receivers leaves no null space with M={scheme.M}"
                    )
                beam = backend.combine(backend.draw(rng, basis.shape[0]), basis)
            slot_beams.append(beam)
        beams.append(tuple(slot_beams))
    return PrecoderSet(tuple(beams))


def _beam_degree(stream: Stream) -> int:
    # null-space basis entries are minors of the stacked zf rows
    return 1 + len(stream.zf)


def coefficients_of(
    scheme: Scheme, expr: Expr, observed: dict[tuple[int, int], object], slot: int, backend
):
    """Coordinates of an expression over the data symbols, given rows observed before `slot`."""
    names = scheme.symbol_names
    index = {name: i for i, name in enumerate(names)}
    destinations = dict(scheme.symbols)
    total = backend.zeros(len(names))
    for sign, atom in expr.terms:
        if isinstance(atom, DataSym):
            if atom.name not in index:
                raise ParameterError(f"undefined data symbol {atom.name!r}")
            vector = backend.unit(len(names), index[atom.name])
        else:
            if not 1 <= atom.slot < slot or (atom.receiver, atom.slot) not in observed:
                raise CausalityError(f"slot {slot} refers to {atom}, which is not observed yet")
            vector = observed[(atom.receiver, atom.slot)].copy()
            if isinstance(atom, Part):
                for i, name in enumerate(names):
                    if destinations[name] not in atom.owners:
                        vector[i] = 0
        total = total + vector if sign > 0 else total - vector
    return total


def expand(scheme: Scheme, channels: ChannelRealization, precoders: PrecoderSet) -> ObservationMatrix:
    backend = get_backend(channels.mode)
    N = len(scheme.symbols)
    observed: dict[tuple[int, int], object] = {}
    row_degree: dict[int, int] = {}
    for t in range(1, scheme.T + 1):
        streams = scheme.streams(t)
        vectors = [coefficients_of(scheme, s.expr, observed, t, backend) for s in streams]
        degree = 0
        for stream, vector in zip(streams, vectors):
            inner = max(
                (row_degree[a.slot] for a in stream.expr.atoms if isinstance(a, (Obs, Part))), default=0
            )
            degree = max(degree, 1 + _beam_degree(stream) + inner)
        row_degree[t] = degree
        for r in range(1, scheme.K + 1):
            row = backend.zeros(N)
            for index, vector in enumerate(vectors):
                gain = backend.dot(channels.row(t, r), precoders.beam(t, index))
                row = row + backend.scale(gain, vector)
            observed[(r, t)] = row
    matrices = tuple(
        backend.matrix([observed[(r, t)] for t in range(1, scheme.T + 1)], N) for r in range(1, scheme.K + 1)
    )
    return ObservationMatrix(backend.mode, scheme.symbol_names, matrices, max(row_degree.values(), default=0))


# -- decodability ----------------------------------------------------------------


@dataclass(frozen=True)
class ReceiverDecode:
    receiver: int
    desired_count: int
    rank_full: int
    rank_interference: int

    @property
    def decodable(self) -> bool:
        return self.rank_full == self.rank_interference + self.desired_count

    def to_dict(self) -> dict:
        return {
            "receiver": self.receiver,
            "desired_count": self.desired_count,
            "rank_full": self.rank_full,
            "rank_interference": self.rank_interference,
            "decodable": self.decodable,
        }


def rank_pair(G, desired: Sequence[int]) -> tuple[int, int]:
    backend = _backend_for(G)
    wanted = set(desired)
    others = [j for j in range(G.shape[1]) if j not in wanted]
    scale = None
    if backend.mode is Mode.FLOAT and G.size:
        scale = np.linalg.svd(G, compute_uv=False).max()
    return backend.rank(G, scale), backend.rank(G[:, others], scale)


def decode_check(G, desired: Sequence[int]) -> bool:
    """True when the desired columns are identifiable from the rows of G."""
    full, interference = rank_pair(G, desired)
    return full == interference + len(set(desired))


@dataclass(frozen=True)
class DecodeReport:
    trial: int
    receivers: tuple[ReceiverDecode, ...]
    achieved: DofPoint | None

    @property
    def decodable(self) -> bool:
        return all(r.decodable for r in self.receivers)


def desired_columns(scheme: Scheme, receiver: int) -> list[int]:
    return [i for i, (_, user) in enumerate(scheme.symbols) if user == receiver]


def run_trial(scheme: Scheme, seed: int, mode: Mode | str, trial: int) -> tuple[DecodeReport, int]:
    channels = draw_channels(scheme, seed, mode, trial)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    receivers = []
    for r in range(1, scheme.K + 1):
        desired = desired_columns(scheme, r)
        full, interference = rank_pair(observations.receiver(r), desired)
        receivers.append(ReceiverDecode(r, len(desired), full, interference))
    achieved = None
    if all(r.decodable for r in receivers):
        achieved = DofPoint.private(*(Fraction(r.desired_count, scheme.T) for r in receivers))
    report = DecodeReport(trial, tuple(receivers), achieved)
    logger.debug("trial %d: %s", trial, "decodable" if report.decodable else "rank-deficient")
    return report, observations.degree


@dataclass(frozen=True)
class SimReport:
    scheme: str
    mode: Mode
    seed: int
    trials: int
    successes_per_receiver: tuple[int, ...]
    all_decodable: int
    achieved_dof: DofPoint | None
    failure_bound: float | None

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "trials": self.trials,
            "successes_per_receiver": list(self.successes_per_receiver),
            "all_decodable": self.all_decodable,
            "achieved_dof": (
                [format_rational(self.achieved_dof[s]) for s in _private_axes(self.achieved_dof.K)]
                if self.achieved_dof is not None
                else None
            ),
            "mode": self.mode.value,
            "seed": self.seed,
            "failure_bound": self.failure_bound,
        }


def _private_axes(K: int) -> list[UserSubset]:
    return [UserSubset.of(i) for i in range(1, K + 1)]


def simulate(
    scheme: Scheme, trials: int, seed: int, mode: Mode | str = Mode.FIELD, threads: int = 1
) -> SimReport:
    """Runs independent trials; trial i uses keys (seed, i)."""
    if trials < 1:
        raise ParameterError(f"trials must be at least 1, got {trials}")
    if threads < 1:
        raise ParameterError(f"threads must be at least 1, got {threads}")
    mode = Mode.parse(mode)

    def one(trial: int):
        return run_trial(scheme, seed, mode, trial)

    if threads == 1:
        results = [one(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))

    successes = [0] * scheme.K
    complete = 0
    achieved: set = set()
    degree = 0
    for report, trial_degree in results:
        degree = max(degree, trial_degree)
        for r in report.receivers:
            successes[r.receiver - 1] += int(r.decodable)
        if report.achieved is not None:
            complete += 1
            achieved.add(report.achieved)
    point = achieved.pop() if complete == trials and len(achieved) == 1 else None

    bound = None
    if mode is Mode.FIELD:
        # both rank conditions of every receiver, each a product of minors of degree <= T * row degree
        bound = min(1.0, 2 * scheme.K * scheme.T * degree / PRIME)
    logger.info("%s: %d/%d trials fully decodable (%s mode)", scheme.name, complete, trials, mode.value)
    return SimReport(scheme.name, mode, seed, trials, tuple(successes), complete, point, bound)
