"""Empirical distributions of length-L outcome sequences and their covariance.

The empirical distribution ED-L of a length-N outcome string is the
normalized sliding-window histogram of its contiguous length-L substrings
(N - L + 1 windows, no wraparound).  Its ensemble covariance decomposes into
a multinomial part plus a correlation part driven by the lag-correlation
matrix

    Psi[y, x] = sum_l w_l [ p(y after l steps | x) - p(y) ],

computed here either as the exact finite-N truncated sum (the oracle) or in
its large-N asymptotic form, where the lag sum collapses onto the Drazin
inverse of (I - M) plus finitely many window-overlap corrections.

All vectors and matrices over length-L sequences are indexed
lexicographically with the first symbol most significant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GuardRailError, ValidationError, ZeroProbabilityError
from .instruments import Instrument
from .supop import drazin_via_projector, identity_covector

#: probabilities at or below this are treated as exact zeros (support dropped)
SUPPORT_TOL = 1e-12

#: guard on direct summation length for the exact finite-N lag sum
FINITE_N_GUARD = 10_000


def all_sequences(alphabet: Sequence[str], length: int) -> list[tuple[str, ...]]:
    """All length-``length`` label tuples in lexicographic order."""
    return list(itertools.product(tuple(alphabet), repeat=length))


def sequence_index(seq: Sequence[str], alphabet: Sequence[str]) -> int:
    """Flat lexicographic index of a label tuple (first symbol most significant)."""
    lookup = {label: i for i, label in enumerate(alphabet)}
    idx = 0
    for label in seq:
        try:
            idx = idx * len(alphabet) + lookup[label]
        except KeyError:
            raise ValidationError(f"unknown symbol {label!r}") from None
    return idx


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Histogram of length-L windows of one outcome string.

    ``q`` runs over the full lexicographic sequence space; every entry is an
    integer multiple of 1 / (n - length + 1).
    """

    alphabet: tuple[str, ...]
    length: int
    n: int
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.size != len(self.alphabet) ** self.length:
            raise ValidationError("histogram size does not match alphabet^length")
        if np.any(q < 0):
            raise ValidationError("empirical distribution has negative entries")
        if abs(q.sum() - 1.0) > 1e-12:
            raise ValidationError(f"empirical distribution sums to {q.sum()!r}, not 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alphabet", tuple(self.alphabet))

    @property
    def n_windows(self) -> int:
        return self.n - self.length + 1

    def counts(self) -> np.ndarray:
        """Integer window counts recovered from the normalized histogram."""
        return np.rint(self.q * self.n_windows).astype(int)

    def value(self, seq: Sequence[str]) -> float:
        return float(self.q[sequence_index(seq, self.alphabet)])


def ed_from_string(
    string: Iterable[str], length: int, alphabet: Sequence[str]
) -> EmpiricalDistribution:
    """Sliding-window ED-L of an outcome string (windows 1..N-L+1, no wraparound)."""
    symbols = list(string)
    n = len(symbols)
    if length < 1:
        raise ValidationError("window length must be >= 1")
    if n < length:
        raise ValidationError(f"string length {n} shorter than window length {length}")
    alphabet = tuple(alphabet)
    lookup = {label: i for i, label in enumerate(alphabet)}
    try:
        codes = [lookup[s] for s in symbols]
    except KeyError as exc:
        raise ValidationError(f"unknown symbol {exc.args[0]!r} in string") from None
    d = len(alphabet)
    counts = np.zeros(d**length, dtype=np.int64)
    code = 0
    modulus = d**length
    for i, c in enumerate(codes):
        code = (code * d + c) % modulus
        if i >= length - 1:
            counts[code] += 1
    q = counts / (n - length + 1)
    return EmpiricalDistribution(alphabet=alphabet, length=length, n=n, q=q)


def _prefix_states(inst: Instrument, length: int) -> np.ndarray:
    """Vectorized states M_{x_k}...M_{x_1} |pi> for all length-``length`` sequences.

    Building level by level keeps each level lexicographically sorted with
    the first symbol most significant.
    """
    states = [inst.steady_state]
    for _ in range(length):
        states = [m @ s for s in states for m in inst.superops]
    return np.array(states)


def _suffix_covectors(inst: Instrument, length: int) -> np.ndarray:
    """Covectors <<1| M_{y_L}...M_{y_1} for all length-``length`` sequences.

    Each pass prepends the next-earlier symbol: the new symbol multiplies on
    the right (it acts first) and becomes the most significant index digit,
    keeping the list lexicographic.
    """
    covs = [identity_covector(inst.dim)]
    for _ in range(length):
        covs = [c @ m for m in inst.superops for c in covs]
    return np.array(covs)


def marginal_probs(inst: Instrument, length: int) -> np.ndarray:
    """Exact length-L sequence probabilities p(x) = <<1| M_x |pi>>, full space."""
    if length < 0:
        raise ValidationError("sequence length must be >= 0")
    states = _prefix_states(inst, length)
    one = identity_covector(inst.dim)
    values = states @ one
    imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if imag > 1e-10:
        raise ValidationError(f"sequence probabilities have imaginary residual {imag:.3e}")
    p = np.clip(values.real, 0.0, 1.0)
    return p


def cond_prob(
    inst: Instrument,
    y_seq: Sequence[str],
    x_seq: Sequence[str],
    lag: int,
) -> float:
    """Stationary probability of sequence ``y_seq`` starting ``lag`` steps after ``x_seq``.

    For lag >= L the intermediate steps are marginalized through the summed
    channel; for 1 <= lag < L the windows overlap and the value vanishes
    unless the first L - lag symbols of y equal the last L - lag of x.
    """
    y_seq = tuple(y_seq)
    x_seq = tuple(x_seq)
    if len(y_seq) != len(x_seq):
        raise ValidationError("conditional sequences must have equal length")
    length = len(x_seq)
    if lag < 1:
        raise ValidationError("lag must be >= 1")
    one = identity_covector(inst.dim)
    u = inst.steady_state
    for label in x_seq:
        u = inst.superop(label) @ u
    p_x = complex(one @ u).real
    if p_x <= SUPPORT_TOL:
        raise ZeroProbabilityError(f"conditioning sequence {x_seq!r} has zero probability")
    if lag >= length:
        v = np.linalg.matrix_power(inst.total, lag - length) @ u
        for label in y_seq:
            v = inst.superop(label) @ v
        joint = complex(one @ v).real
    else:
        overlap = length - lag
        if y_seq[:overlap] != x_seq[lag:]:
            return 0.0
        v = u
        for label in y_seq[overlap:]:
            v = inst.superop(label) @ v
        joint = complex(one @ v).real
    return max(joint, 0.0) / p_x


@dataclass(frozen=True)
class PsiMatrix:
    """Lag-correlation matrix over the positive-probability sequence support.

    ``values[y, x]`` weights how observing x shifts the later frequency of y;
    columns sum to zero.  Zero-probability sequences are dropped from the
    index set (``support`` lists what is kept, ``dropped`` what was removed)
    because the defining formula conditions on x.
    """

    alphabet: tuple[str, ...]
    length: int
    mode: str  # "finite" or "asymptotic"
    values: np.ndarray
    p: np.ndarray
    support: tuple[tuple[str, ...], ...]
    dropped: tuple[tuple[str, ...], ...]
    n: int | None = None

    def __post_init__(self):
        for name in ("values", "p"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _restrict_support(
    inst: Instrument, length: int, support_tol: float
) -> tuple[np.ndarray, np.ndarray, list, list]:
    p_full = marginal_probs(inst, length)
    sequences = all_sequences(inst.alphabet, length)
    keep = np.flatnonzero(p_full > support_tol)
    dropped = [sequences[i] for i in np.flatnonzero(p_full <= support_tol)]
    kept = [sequences[i] for i in keep]
    return p_full, keep, kept, dropped


def _overlap_corrections(
    inst: Instrument,
    length: int,
    keep: np.ndarray,
    kept: list,
    p_kept: np.ndarray,
    u_kept: np.ndarray,
    weights: dict[int, float],
) -> np.ndarray:
    """Matrix of weighted overlap terms sum_l w_l [p_{y<-x}(l) - p_y], 1 <= l < L.

    ``u_kept[:, j]`` holds M_x |pi> for kept x; the overlapping conditional
    applies only the last ``l`` symbols of y on top of it, gated by the
    prefix/suffix Kronecker match.
    """
    k = len(kept)
    out = np.zeros((k, k))
    one = identity_covector(inst.dim)
    for lag, weight in weights.items():
        tail_len = lag
        overlap = length - lag
        # covector cache for every possible y-tail of this lag
        tails = {}
        for tail in all_sequences(inst.alphabet, tail_len):
            cov = one
            for label in reversed(tail):
                cov = cov @ inst.superop(label)
            tails[tail] = cov
        for col, x in enumerate(kept):
            suffix = x[lag:]
            cond = np.zeros(k)
            for row, y in enumerate(kept):
                if y[:overlap] != suffix:
                    continue
                joint = complex(tails[y[overlap:]] @ u_kept[:, col]).real
                cond[row] = max(joint, 0.0) / p_kept[col]
            out[:, col] += weight * (cond - p_kept)
    return out


def psi_finite(
    inst: Instrument,
    length: int,
    n: int,
    guard: int = FINITE_N_GUARD,
    support_tol: float = SUPPORT_TOL,
) -> PsiMatrix:
    """Exact finite-N lag-correlation matrix by direct summation.

    Sums lags l = 1 .. N-L with weights 1 - l/(N-L+1); kept exact (including
    the L-dependent offsets) so it can serve as the oracle for the
    asymptotic formula.
    """
    if n > guard:
        raise GuardRailError(f"N={n} exceeds the direct-summation guard {guard}")
    if n < length:
        raise ValidationError("N must be at least the window length")
    p_full, keep, kept, dropped = _restrict_support(inst, length, support_tol)
    p_kept = p_full[keep]
    k = keep.size
    n_windows = n - length + 1

    u_all = _prefix_states(inst, length)  # rows: M_x |pi>
    w_all = _suffix_covectors(inst, length)  # rows: <<1| M_y
    u_kept = u_all[keep].T  # (d^2, k)
    w_kept = w_all[keep]  # (k, d^2)

    max_lag = n - length
    overlap_weights = {
        lag: 1.0 - lag / n_windows for lag in range(1, min(length, max_lag + 1))
    }
    values = _overlap_corrections(inst, length, keep, kept, p_kept, u_kept, overlap_weights)

    # non-overlapping lags: l = L .. N-L, one application of the summed
    # channel per step, all (y, x) pairs in a single matmul
    v = u_kept.copy()
    for lag in range(length, max_lag + 1):
        weight = 1.0 - lag / n_windows
        cond = (w_kept @ v).real / p_kept[None, :]
        values += weight * (cond - p_kept[:, None])
        v = inst.total @ v
    return PsiMatrix(
        alphabet=inst.alphabet,
        length=length,
        mode="finite",
        values=values,
        p=p_kept,
        support=tuple(kept),
        dropped=tuple(dropped),
        n=n,
    )


def psi_asymptotic(
    inst: Instrument,
    length: int,
    support_tol: float = SUPPORT_TOL,
) -> PsiMatrix:
    """Large-N lag-correlation matrix.

    The non-overlapping lag sum telescopes onto the Drazin inverse,

        (1/p_x) <<1| M_y (I - M)^D M_x |pi>>,

    and the L-1 window-overlap corrections are added with unit weight.
    Requires a unique steady state.
    """
    p_full, keep, kept, dropped = _restrict_support(inst, length, support_tol)
    p_kept = p_full[keep]
    k = keep.size

    u_all = _prefix_states(inst, length)
    w_all = _suffix_covectors(inst, length)
    u_kept = u_all[keep].T
    w_kept = w_all[keep]

    d2 = inst.dim**2
    core = drazin_via_projector(np.eye(d2) - inst.total, inst.fixed_point_projector)
    values = (w_kept @ core @ u_kept).real / p_kept[None, :]

    overlap_weights = {lag: 1.0 for lag in range(1, length)}
    values += _overlap_corrections(inst, length, keep, kept, p_kept, u_kept, overlap_weights)
    return PsiMatrix(
        alphabet=inst.alphabet,
        length=length,
        mode="asymptotic",
        values=values,
        p=p_kept,
        support=tuple(kept),
        dropped=tuple(dropped),
        n=None,
    )


@dataclass(frozen=True)
class CovarianceDecomposition:
    """ED covariance split into multinomial and correlation parts.

    sigma_0 = sigma_p + sigma_psi is the N-free covariance scale; the actual
    ED covariance is sigma_0 / n_eff with n_eff = N - L + 1 windows.
    """

    p: np.ndarray
    sigma_p: np.ndarray
    sigma_psi: np.ndarray
    sigma_0: np.ndarray
    n_eff: int | None = None
    support: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        for name in ("p", "sigma_p", "sigma_psi", "sigma_0"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def sigma(self) -> np.ndarray:
        if self.n_eff is None:
            raise ValidationError("no window count attached; use sigma_0 directly")
        return self.sigma_0 / self.n_eff


def covariance(
    p: np.ndarray,
    psi: PsiMatrix | np.ndarray,
    n: int | None = None,
    length: int | None = None,
) -> CovarianceDecomposition:
    """Assemble the covariance decomposition from marginals and a Psi matrix.

    sigma_p = diag(p) - p p^T, sigma_psi = Psi diag(p) + diag(p) Psi^T.
    When ``n`` is given the window count n_eff = n - L + 1 is attached.
    """
    support = None
    if isinstance(psi, PsiMatrix):
        support = psi.support
        if length is None:
            length = psi.length
        psi_values = psi.values
    else:
        psi_values = np.asarray(psi, dtype=float)
    p = np.asarray(p, dtype=float)
    if psi_values.shape != (p.size, p.size):
        raise ValidationError(
            f"dimension mismatch: p has {p.size} entries, psi is {psi_values.shape}"
        )
    pm = np.diag(p)
    sigma_p = pm - np.outer(p, p)
    sigma_psi = psi_values @ pm + pm @ psi_values.T
    sigma_0 = sigma_p + sigma_psi
    n_eff = None
    if n is not None:
        if length is None:
            raise ValidationError("window length required to compute n_eff from N")
        n_eff = n - length + 1
        if n_eff < 1:
            raise ValidationError("N must be at least the window length")
    return CovarianceDecomposition(
        p=p,
        sigma_p=sigma_p,
        sigma_psi=sigma_psi,
        sigma_0=sigma_0,
        n_eff=n_eff,
        support=support,
    )


def analytic_covariance(
    inst: Instrument, length: int, n: int | None = None
) -> CovarianceDecomposition:
    """Asymptotic covariance decomposition of ED-L for an instrument."""
    psi = psi_asymptotic(inst, length)
    return covariance(psi.p, psi, n=n, length=length)
