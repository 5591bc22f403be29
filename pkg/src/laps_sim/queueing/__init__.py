"""Queueing-theory oracle."""

from .oracle import ServiceMix, hol_penalty, mix_wait, normalized_latency, pk_wait

__all__ = ["ServiceMix", "hol_penalty", "mix_wait", "normalized_latency", "pk_wait"]
