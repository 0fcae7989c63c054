"""Finite-SNR mutual information of expanded schemes and the DoF slope it implies."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import Mode, desired_columns, draw_channels, expand, make_precoders, rank_pair
from .errors import NumericError, ParameterError
from .schemedsl import Scheme

logger = logging.getLogger(__name__)

MIN_SLOPE_SNR_DB = 40.0


@dataclass(frozen=True)
class SnrPoint:
    """Total transmit power P (linear, unit noise) shared equally by the streams of a slot."""

    power: float
    streams: int = 1

    def __post_init__(self):
        if not self.power > 0:
            raise ParameterError(f"power must be positive, got {self.power}")
        if self.streams < 1:
            raise ParameterError(f"streams per slot must be at least 1, got {self.streams}")

    @classmethod
    def from_db(cls, db: float, streams: int = 1) -> SnrPoint:
        return cls(10 ** (db / 10), streams)

    @property
    def per_stream(self) -> float:
        return self.power / self.streams


def _log2det(G: np.ndarray, rho: float) -> float:
    T = G.shape[0]
    if G.shape[1] == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(np.eye(T) + rho * G @ G.conj().T)
    if sign == 0 or not np.isfinite(logdet):
        raise NumericError("covariance determinant is not finite")
    return float(logdet / np.log(2))


def _as_float(G) -> np.ndarray:
    G = np.asarray(G, dtype=complex)
    if not np.all(np.isfinite(G)):
        raise NumericError("observation matrix has non-finite entries")
    return G


def conditional_mutual_info(
    G, columns: Sequence[int], known: Sequence[int], snr: SnrPoint
) -> float:
    """Bits about `columns` given `known` columns, the remaining symbols acting as Gaussian noise."""
    G = _as_float(G)
    known = set(known)
    wanted = set(columns) - known
    remaining = [j for j in range(G.shape[1]) if j not in known]
    interference = [j for j in remaining if j not in wanted]
    rho = snr.per_stream
    bits = _log2det(G[:, remaining], rho) - _log2det(G[:, interference], rho)
    return max(bits, 0.0)


def mutual_info(G, desired: Sequence[int], snr: SnrPoint) -> float:
    """log2det(I + rho G G^H) - log2det(I + rho G_int G_int^H) over the slots of G."""
    return conditional_mutual_info(G, desired, (), snr)


@dataclass(frozen=True)
class ReceiverRate:
    receiver: int
    bits: tuple[float, float]
    slope: float
    decodable: bool

    @property
    def rank_flag(self) -> str:
        return "ok" if self.decodable else "rank-deficient"

    def to_dict(self) -> dict:
        return {
            "receiver": self.receiver,
            "bits": [round(float(b), 6) for b in self.bits],
            "slope": round(float(self.slope), 6),
            "rank_flag": self.rank_flag,
        }


def streams_per_slot(scheme: Scheme) -> int:
    return max((len(scheme.streams(t)) for t in range(1, scheme.T + 1)), default=1) or 1


def dof_slope(scheme: Scheme, seed: int, snr_db_pair: tuple[float, float]) -> list[ReceiverRate]:
    """Per-receiver [I(P2) - I(P1)] / [T (log2 P2 - log2 P1)] on one float realization."""
    low_db, high_db = snr_db_pair
    if low_db == high_db:
        raise ParameterError("the two SNR values must differ")
    if min(low_db, high_db) < MIN_SLOPE_SNR_DB:
        raise ParameterError(f"both SNR values must be at least {MIN_SLOPE_SNR_DB:g} dB")

    channels = draw_channels(scheme, seed, Mode.FLOAT)
    observations = expand(scheme, channels, make_precoders(scheme, channels))
    streams = streams_per_slot(scheme)
    low, high = SnrPoint.from_db(low_db, streams), SnrPoint.from_db(high_db, streams)
    span = scheme.T * (np.log2(high.power) - np.log2(low.power))

    rates = []
    for r in range(1, scheme.K + 1):
        G = observations.receiver(r)
        desired = desired_columns(scheme, r)
        full, interference = rank_pair(G, desired)
        bits = (mutual_info(G, desired, low), mutual_info(G, desired, high))
        slope = (bits[1] - bits[0]) / span
        rates.append(ReceiverRate(r, bits, float(slope), full == interference + len(desired)))
        if full != interference + len(desired):
            logger.warning("receiver R%d is rank-deficient; its slope is not a DoF", r)
    return rates
