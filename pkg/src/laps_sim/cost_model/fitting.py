"""Runtime fitting of cost coefficients from latency samples."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from laps_sim.errors import DegenerateSamples, EmptyInput, ParseError
from .latency import CostParams, compute_latency

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = ["L", "H", "t_comp", "t_mem"]


@dataclass(frozen=True)
class LatencySample:
    L: float
    H: float
    t_comp: float
    t_mem: float

    def __post_init__(self) -> None:
        if min(self.L, self.H, self.t_comp, self.t_mem) < 0:
            raise ValueError(f"latency sample fields must be >= 0: {self}")


def _nonneg_lstsq(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares with negative coefficients clamped to 0 and the rest refit."""
    active = list(range(X.shape[1]))
    coef = np.zeros(X.shape[1])
    while active:
        sol, *_ = np.linalg.lstsq(X[:, active], y, rcond=None)
        if np.all(sol >= 0):
            coef[active] = sol
            break
        worst = active[int(np.argmin(sol))]
        active.remove(worst)
    return coef


def _relative_rows(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = np.where(y > 0, y, 1.0)
    return X / scale[:, None], y / scale


def fit_params(samples: Sequence[LatencySample]) -> CostParams:
    """Fit ``alpha, beta`` from compute times and ``gamma_w, gamma_r`` from I/O."""
    if not samples:
        raise EmptyInput("no latency samples to fit")
    if len(samples) < 4:
        raise DegenerateSamples(f"need at least 4 samples, got {len(samples)}")

    L = np.array([s.L for s in samples], dtype=float)
    H = np.array([s.H for s in samples], dtype=float)
    t_comp = np.array([s.t_comp for s in samples], dtype=float)
    t_mem = np.array([s.t_mem for s in samples], dtype=float)

    if np.unique(L).size < 2 or np.unique(H).size < 2:
        raise DegenerateSamples("samples need at least two distinct L and H values")

    X_comp = np.column_stack([L * (L + 2 * H), L])
    X_mem = np.column_stack([L, H])
    for name, X in (("compute", X_comp), ("memory", X_mem)):
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise DegenerateSamples(f"{name} design matrix is rank-deficient")

    alpha, beta = _nonneg_lstsq(*_relative_rows(X_comp, t_comp))
    gamma_w, gamma_r = _nonneg_lstsq(*_relative_rows(X_mem, t_mem))
    if alpha <= 0:
        raise DegenerateSamples("fitted alpha is not positive")

    params = CostParams(
        alpha=float(alpha),
        beta=float(beta),
        gamma_w=float(gamma_w),
        gamma_r=float(gamma_r),
    )
    logger.info("fitted %s from %d samples", params, len(samples))
    return params


def generate_samples(
    p: CostParams,
    n_samples: int = 50,
    noise: float = 0.0,
    seed: int = 42,
    max_new_tokens: int = 2048,
    max_history: int = 4096,
) -> list[LatencySample]:
    """Draw synthetic runtime samples from a known parameter set.

    ``noise`` is a multiplicative standard deviation applied to both times.
    """
    rng = np.random.default_rng(seed)
    L = rng.integers(1, max_new_tokens + 1, size=n_samples)
    H = rng.integers(0, max_history + 1, size=n_samples)
    # Half the draws are first-turn prefills.
    H[rng.random(n_samples) < 0.5] = 0
    samples = []
    for l_i, h_i in zip(L, H):
        t_comp, t_mem = compute_latency(float(l_i), float(h_i), p)
        if noise > 0:
            t_comp *= 1.0 + noise * rng.standard_normal()
            t_mem *= 1.0 + noise * rng.standard_normal()
        samples.append(
            LatencySample(
                L=float(l_i),
                H=float(h_i),
                t_comp=max(t_comp, 0.0),
                t_mem=max(t_mem, 0.0),
            )
        )
    return samples


def samples_to_frame(samples: Sequence[LatencySample]) -> pd.DataFrame:
    return pd.DataFrame(
        [[s.L, s.H, s.t_comp, s.t_mem] for s in samples], columns=SAMPLE_COLUMNS
    )


def load_samples(path: Path | str) -> list[LatencySample]:
    """Read a ``L,H,t_comp,t_mem`` CSV file."""
    df = pd.read_csv(path)
    missing = [col for col in SAMPLE_COLUMNS if col not in df.columns]
    if missing:
        raise ParseError(f"sample file {path} is missing columns {missing}")
    df = df[SAMPLE_COLUMNS].apply(pd.to_numeric, errors="coerce")
    bad = df[df.isna().any(axis=1)]
    if not bad.empty:
        # +2: header row and 1-based numbering
        raise ParseError(
            "non-numeric latency sample", line_number=int(bad.index[0]) + 2
        )
    return [
        LatencySample(L=row.L, H=row.H, t_comp=row.t_comp, t_mem=row.t_mem)
        for row in df.itertuples(index=False)
    ]
