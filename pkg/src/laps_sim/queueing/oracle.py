"""Closed-form M/G/1 FCFS predictions used to validate the simulator."""

from __future__ import annotations

from dataclasses import dataclass

from laps_sim.errors import ConfigError, InvalidMoments, UnstableQueue


@dataclass(frozen=True)
class ServiceMix:
    """Poisson arrivals with a two-point short/long service distribution."""

    lam: float
    p_short: float
    s_short: float
    s_long: float

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ConfigError(f"arrival rate must be > 0, got {self.lam}")
        if not 0 <= self.p_short <= 1:
            raise ConfigError(f"p_short must be in [0, 1], got {self.p_short}")
        if not 0 < self.s_short <= self.s_long:
            raise ConfigError(
                f"need 0 < s_short <= s_long, got {self.s_short}, {self.s_long}"
            )

    @property
    def mean_service(self) -> float:
        return self.p_short * self.s_short + (1 - self.p_short) * self.s_long

    @property
    def second_moment(self) -> float:
        return self.p_short * self.s_short**2 + (1 - self.p_short) * self.s_long**2

    @property
    def rho(self) -> float:
        return self.lam * self.mean_service


def _check_stable(rho: float) -> None:
    if rho >= 1:
        raise UnstableQueue(f"utilization {rho:.4f} >= 1")


def pk_wait(lam: float, e_s: float, e_s2: float) -> float:
    """Pollaczek-Khinchine mean waiting time in queue."""
    if e_s2 < e_s * e_s:
        raise InvalidMoments(f"E[S^2]={e_s2} is below E[S]^2={e_s * e_s}")
    rho = lam * e_s
    _check_stable(rho)
    return lam * e_s2 / (2 * (1 - rho))


def mix_wait(mix: ServiceMix) -> float:
    return pk_wait(mix.lam, mix.mean_service, mix.second_moment)


def hol_penalty(mix: ServiceMix) -> float:
    """Extra wait caused by service-time variance of the two-point mix."""
    _check_stable(mix.rho)
    p = mix.p_short
    spread = mix.s_long - mix.s_short
    return mix.lam * p * (1 - p) * spread**2 / (2 * (1 - mix.rho))


def normalized_latency(s_i: float, w: float) -> float:
    """Response time over service time, ``1 + w / s_i``."""
    if s_i <= 0:
        raise ValueError(f"service time must be > 0, got {s_i}")
    if w < 0:
        raise ValueError(f"wait must be >= 0, got {w}")
    return 1.0 + w / s_i
