"""Seeded Monte Carlo sampling of measurement strings from an instrument.

The sampler is the brute-force oracle for every analytic formula in the
package: single trajectories, and ensembles of empirical distributions with
their sample mean and covariance.

Randomness is counter-based and splittable: run ``i`` of master seed ``s``
always draws from ``Philox(SeedSequence(s, spawn_key=(i,)))``, one uniform
per measurement, so results are bit-identical under any execution order and
an ensemble reproduces exactly what per-run single calls would produce.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .empirical import EmpiricalDistribution, ed_from_string
from .errors import TrajectoryCollapseError, ValidationError
from .instruments import Instrument, _as_vec_state

#: per-step probabilities below this (total) mean numerical collapse
COLLAPSE_TOL = 1e-14

#: negative outcome probabilities above this magnitude are model errors
NEG_PROB_TOL = 1e-12


def _run_generator(seed: int, run_index: int | None = None) -> np.random.Generator:
    spawn = () if run_index is None else (run_index,)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=spawn)))


@dataclass(frozen=True)
class TrajectoryRun:
    """One sampled measurement string and the conditional state it left behind."""

    seed: int
    n: int
    outcomes: tuple[str, ...]
    final_state: np.ndarray  # vectorized, unit trace

    def __post_init__(self):
        arr = np.asarray(self.final_state, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "final_state", arr)

    @property
    def string(self) -> str:
        return "".join(self.outcomes)

    def ed(self, length: int, alphabet: Sequence[str]) -> EmpiricalDistribution:
        return ed_from_string(self.outcomes, length, alphabet)


def _clean_probs(raw: np.ndarray, where: str) -> np.ndarray:
    imag = float(np.max(np.abs(raw.imag)))
    if imag > 1e-10:
        raise ValidationError(f"{where}: outcome probabilities have imaginary part {imag:.3e}")
    probs = raw.real
    worst = float(probs.min())
    if worst < -NEG_PROB_TOL:
        raise ValidationError(f"{where}: outcome probability {worst:.3e} below roundoff tolerance")
    return np.clip(probs, 0.0, None)


def sample_string(
    inst: Instrument,
    n: int,
    seed: int,
    rho0: np.ndarray | None = None,
    run_index: int | None = None,
) -> TrajectoryRun:
    """Sample one length-``n`` outcome string.

    At each step the outcome is drawn by inverse CDF over tr(M_x rho) and
    the state is renormalized; the initial state defaults to the steady
    state.  Deterministic given (seed, run_index).
    """
    if n < 1:
        raise ValidationError("string length must be >= 1")
    vec = np.array(_as_vec_state(inst, rho0))
    rows = inst.trace_covectors
    mats = inst.superops
    uniforms = _run_generator(seed, run_index).random(n)
    outcome_codes = np.empty(n, dtype=np.int64)
    for step in range(n):
        probs = _clean_probs(rows @ vec, f"step {step}")
        total = probs.sum()
        if total < COLLAPSE_TOL:
            raise TrajectoryCollapseError(f"all outcome probabilities vanished at step {step}")
        cdf = np.cumsum(probs)
        code = int(np.searchsorted(cdf, uniforms[step] * total, side="right"))
        code = min(code, len(mats) - 1)
        vec = (mats[code] @ vec) / probs[code]
        outcome_codes[step] = code
    outcomes = tuple(inst.alphabet[c] for c in outcome_codes)
    return TrajectoryRun(seed=seed, n=n, outcomes=outcomes, final_state=vec)


@dataclass(frozen=True)
class EDEnsemble:
    """Empirical-distribution statistics over independent sampled runs.

    ``sample_cov`` is the unbiased (runs - 1) estimator; ``eds`` optionally
    keeps the per-run histograms (rows) for distribution-level diagnostics.
    """

    alphabet: tuple[str, ...]
    length: int
    n: int
    runs: int
    seed: int
    sample_mean: np.ndarray
    sample_cov: np.ndarray
    eds: np.ndarray | None = None

    def __post_init__(self):
        for name in ("sample_mean", "sample_cov"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.eds is not None:
            eds = np.asarray(self.eds, dtype=float)
            eds.setflags(write=False)
            object.__setattr__(self, "eds", eds)

    @property
    def n_eff(self) -> int:
        return self.n - self.length + 1


def sample_ed_ensemble(
    inst: Instrument,
    length: int,
    n: int,
    runs: int,
    seed: int,
    rho0: np.ndarray | None = None,
    keep_eds: bool = True,
) -> EDEnsemble:
    """Ensemble of ED-L histograms from ``runs`` independent trajectories.

    Vectorized across runs but stream-compatible with :func:`sample_string`:
    run ``i`` consumes exactly the uniforms of ``(seed, run_index=i)``, so
    the ensemble is bit-identical to looping over single runs.
    """
    if runs < 2:
        raise ValidationError("an ensemble needs at least 2 runs")
    if n < length:
        raise ValidationError("string length must be at least the window length")
    d_out = inst.n_outcomes
    vec0 = np.array(_as_vec_state(inst, rho0))
    states = np.tile(vec0, (runs, 1))  # (runs, d^2)
    rows = inst.trace_covectors  # (d_out, d^2)
    mats = [m.T for m in inst.superops]  # right-multiplication form

    uniforms = np.empty((runs, n))
    for i in range(runs):
        uniforms[i] = _run_generator(seed, i).random(n)

    n_codes = d_out**length
    counts = np.zeros((runs, n_codes), dtype=np.int64)
    window = np.zeros(runs, dtype=np.int64)
    run_idx = np.arange(runs)
    for step in range(n):
        probs = _clean_probs(states @ rows.T, f"step {step}")
        totals = probs.sum(axis=1)
        if float(totals.min()) < COLLAPSE_TOL:
            raise TrajectoryCollapseError(f"outcome probabilities vanished at step {step}")
        cdf = np.cumsum(probs, axis=1)
        targets = uniforms[:, step] * totals
        codes = (cdf < targets[:, None]).sum(axis=1)
        np.clip(codes, 0, d_out - 1, out=codes)
        for x in range(d_out):
            mask = codes == x
            if not np.any(mask):
                continue
            states[mask] = (states[mask] @ mats[x]) / probs[mask, x][:, None]
        window = (window * d_out + codes) % n_codes
        if step >= length - 1:
            np.add.at(counts, (run_idx, window), 1)
    eds = counts / (n - length + 1)
    sample_mean = eds.mean(axis=0)
    sample_cov = np.cov(eds.T, ddof=1) if n_codes > 1 else np.array([[float(eds.var(ddof=1))]])
    return EDEnsemble(
        alphabet=inst.alphabet,
        length=length,
        n=n,
        runs=runs,
        seed=seed,
        sample_mean=sample_mean,
        sample_cov=np.atleast_2d(sample_cov),
        eds=eds if keep_eds else None,
    )


def dump_strings(runs: Iterable[TrajectoryRun | Sequence[str]], stream: IO[str]) -> None:
    """Write one run per line: labels concatenated when single-character,
    comma-separated otherwise."""
    for run in runs:
        outcomes = run.outcomes if isinstance(run, TrajectoryRun) else tuple(run)
        if all(len(label) == 1 for label in outcomes):
            stream.write("".join(outcomes))
        else:
            stream.write(",".join(outcomes))
        stream.write("\n")


def load_strings(stream: IO[str]) -> list[tuple[str, ...]]:
    """Inverse of :func:`dump_strings`."""
    out = []
    for line in stream:
        line = line.strip()
        if not line:
            continue
        out.append(tuple(line.split(",")) if "," in line else tuple(line))
    return out


def count_modes(samples: np.ndarray, bandwidth: float, grid_size: int = 512) -> int:
    """Number of local maxima of a Gaussian KDE of ``samples``.

    ``bandwidth`` is the absolute kernel width.  Used to compare the shape
    of ED-entry distributions (e.g. Zeno-split multimodality) rather than to
    estimate densities precisely.
    """
    from scipy.stats import gaussian_kde

    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 2:
        raise ValidationError("mode counting needs a 1-D sample of size >= 2")
    spread = samples.std()
    if spread == 0.0:
        return 1
    kde = gaussian_kde(samples, bw_method=bandwidth / spread)
    lo = samples.min() - 3 * bandwidth
    hi = samples.max() + 3 * bandwidth
    grid = np.linspace(lo, hi, grid_size)
    density = kde(grid)
    interior = density[1:-1]
    peaks = (interior > density[:-2]) & (interior >= density[2:])
    return int(np.count_nonzero(peaks))
