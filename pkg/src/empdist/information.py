"""Relative-entropy correlation measures, Markov surrogates, Fisher information.

Everything here compares covariances of empirical distributions.  Those
covariances are singular by construction (normalization, and for L >= 2 the
window in/out constraints), so Gaussian relative entropies are evaluated on
the common support: determinants become pseudo-determinants and inverses
become Drazin inverses.  All logarithms are natural; results are in nats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .empirical import (
    CovarianceDecomposition,
    EmpiricalDistribution,
    PsiMatrix,
    SUPPORT_TOL,
    all_sequences,
    covariance,
    marginal_probs,
    psi_asymptotic,
)
from .errors import NumericsError, SupportMismatchError, ValidationError
from .instruments import Instrument
from .supop import drazin_inverse, pseudo_det, sym_drazin

#: relative eigenvalue threshold separating support from nullspace
RANK_TOL = 1e-10

#: tolerance (in sin of largest principal angle) for "same support"
ANGLE_TOL = 1e-8


def _check_symmetric(s: np.ndarray, name: str) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    scale = max(float(np.max(np.abs(s))), 1.0)
    if np.max(np.abs(s - s.T)) > 1e-8 * scale:
        raise ValidationError(f"{name} is not symmetric within tolerance")
    return (s + s.T) / 2


def _support(s: np.ndarray, rank_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal support basis (columns) and kept eigenvalues of a PSD matrix."""
    evals, evecs = np.linalg.eigh(s)
    top = float(np.max(np.abs(evals))) if evals.size else 0.0
    if top == 0.0:
        return evecs[:, :0], evals[:0]
    if evals.min() < -1e-9 * top:
        raise ValidationError(f"matrix is not PSD (min eigenvalue {evals.min():.3e})")
    keep = evals > rank_tol * top
    return evecs[:, keep], evals[keep]


def gaussian_kl(
    sigma1: np.ndarray,
    sigma2: np.ndarray,
    dmu: np.ndarray | None = None,
    rank_tol: float = RANK_TOL,
    angle_tol: float = ANGLE_TOL,
) -> float:
    """KL divergence (nats) between centered/shifted Gaussians with singular covariances.

    Evaluates
        (1/2) [ tr(S2^D S1) + dmu^T S2^D dmu + ln(pdet S2 / pdet S1) - r ]
    on the common support of rank r.  Distributions with mismatching
    supports, or a mean shift leaving the support, are perfectly
    distinguishable: returns ``math.inf``.
    """
    s1 = _check_symmetric(sigma1, "sigma1")
    s2 = _check_symmetric(sigma2, "sigma2")
    if s1.shape != s2.shape:
        raise ValidationError(f"shape mismatch: {s1.shape} vs {s2.shape}")
    u1, w1 = _support(s1, rank_tol)
    u2, w2 = _support(s2, rank_tol)
    if u1.shape[1] != u2.shape[1]:
        return math.inf
    rank = u1.shape[1]
    if rank == 0:
        return 0.0 if dmu is None or not np.any(dmu) else math.inf
    # sin of the largest principal angle between the two supports
    residual = u1 - u2 @ (u2.T @ u1)
    if float(np.linalg.norm(residual, 2)) > angle_tol:
        return math.inf
    quad = 0.0
    if dmu is not None:
        dmu = np.asarray(dmu, dtype=float)
        coords = u2.T @ dmu
        outside = dmu - u2 @ coords
        if float(np.linalg.norm(outside)) > angle_tol * max(float(np.linalg.norm(dmu)), 1.0):
            return math.inf
        quad = float(coords @ ((1.0 / w2) * coords))
    a1 = u2.T @ s1 @ u2
    trace = float(np.trace(a1 / w2[None, :]))
    log_ratio = float(np.sum(np.log(w2)) - np.sum(np.log(w1)))
    kl = 0.5 * (trace + quad + log_ratio - rank)
    return max(kl, 0.0) if kl > -1e-9 else kl


def correlation_information(decomp: CovarianceDecomposition) -> float:
    """Information (nats) carried by outcome correlations in a single-window ED.

    KL divergence between the true ED covariance scale and the multinomial
    covariance of an uncorrelated surrogate with the same marginals:
        (1/2) [ ln(pdet sigma_p / pdet sigma_0) + tr(sigma_p^D sigma_psi) ].

    pdet sigma_p has the closed form d * prod(p); it is used as the fast
    path and cross-checked against the eigenvalue route.
    """
    p = decomp.p
    d = p.size
    if d < 2:
        raise SupportMismatchError("correlation information needs at least 2 live outcomes")
    if np.any(p <= 0):
        raise SupportMismatchError("marginals contain zero entries; restrict support first")
    pdet_p_closed = d * float(np.prod(p))
    pdet_p_eig = pseudo_det(decomp.sigma_p)
    if abs(pdet_p_eig - pdet_p_closed) > 1e-8 * abs(pdet_p_closed):
        raise NumericsError(
            "multinomial pseudo-determinant disagrees with closed form: "
            f"{pdet_p_eig!r} vs {pdet_p_closed!r}"
        )
    sigma_0 = _check_symmetric(decomp.sigma_0, "sigma_0")
    evals = np.linalg.eigvalsh(sigma_0)
    top = float(np.max(np.abs(evals)))
    null_dim = int(np.sum(np.abs(evals) <= RANK_TOL * top)) if top > 0 else d
    if null_dim != 1:
        raise SupportMismatchError(
            f"sigma_0 nullspace has dimension {null_dim}; expected only the "
            "normalization direction (deterministic outcomes?)"
        )
    ones = np.full((d, 1), 1.0 / math.sqrt(d))
    drazin_p = sym_drazin(decomp.sigma_p, ones)
    pdet_0 = pseudo_det(sigma_0)
    value = 0.5 * (math.log(pdet_p_closed / pdet_0) + float(np.trace(drazin_p @ decomp.sigma_psi)))
    return max(value, 0.0) if value > -1e-12 else value


@dataclass(frozen=True)
class MarkovModel:
    """Order-k Markov marginalization of an instrument's outcome process.

    ``tensor[c, s]`` is the conditional probability of symbol s after context
    c (contexts of length k with positive probability, lexicographic);
    ``reduced`` is the first-order chain over contexts obtained by shifting
    one symbol, and ``window_p`` its stationary vector (the exact context
    probabilities).  Order 0 is the iid reduction: a single empty context and
    a rank-one chain over single symbols.
    """

    order: int
    alphabet: tuple[str, ...]
    contexts: tuple[tuple[str, ...], ...]
    tensor: np.ndarray
    reduced: np.ndarray
    window_p: np.ndarray
    reduced_index: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for name in ("tensor", "reduced", "window_p"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def markov_tensor(inst: Instrument, order: int, support_tol: float = SUPPORT_TOL) -> MarkovModel:
    """Exact order-k Markov marginalization of the instrument statistics.

    The conditional tensor comes from exact (k+1)- and k-sequence
    probabilities; contexts with zero probability are dropped from the
    window support.
    """
    if order < 0:
        raise ValidationError("Markov order must be >= 0")
    d = inst.n_outcomes
    alphabet = inst.alphabet
    if order == 0:
        p = marginal_probs(inst, 1)
        reduced = np.tile(p[:, None], (1, d))
        return MarkovModel(
            order=0,
            alphabet=alphabet,
            contexts=((),),
            tensor=p[None, :],
            reduced=reduced,
            window_p=p,
            reduced_index=tuple((a,) for a in alphabet),
        )
    p_ctx_full = marginal_probs(inst, order)
    p_next_full = marginal_probs(inst, order + 1)
    ctx_all = all_sequences(alphabet, order)
    keep = np.flatnonzero(p_ctx_full > support_tol)
    contexts = [ctx_all[i] for i in keep]
    ctx_pos = {c: i for i, c in enumerate(contexts)}
    k = len(contexts)
    tensor = np.zeros((k, d))
    for i, c in enumerate(contexts):
        base = keep[i] * d
        tensor[i] = p_next_full[base : base + d] / p_ctx_full[keep[i]]
    reduced = np.zeros((k, k))
    for i, c in enumerate(contexts):
        for s, label in enumerate(alphabet):
            if tensor[i, s] <= 0:
                continue
            shifted = c[1:] + (label,)
            j = ctx_pos.get(shifted)
            if j is None:
                raise NumericsError(
                    f"context {shifted!r} reachable from {c!r} but outside the support"
                )
            reduced[j, i] += tensor[i, s]
    window_p = p_ctx_full[keep]
    residual = float(np.max(np.abs(reduced @ window_p - window_p)))
    if residual > 1e-8:
        raise NumericsError(f"window chain is not stationary on exact marginals ({residual:.3e})")
    return MarkovModel(
        order=order,
        alphabet=alphabet,
        contexts=tuple(contexts),
        tensor=tensor,
        reduced=reduced,
        window_p=window_p,
        reduced_index=tuple(contexts),
    )


def _markov_window_probs(
    model: MarkovModel, width: int, support_tol: float = SUPPORT_TOL
) -> tuple[list[tuple[str, ...]], np.ndarray]:
    """Stationary width-w window probabilities implied by the Markov model."""
    k = model.order
    if width < max(k, 1):
        raise ValidationError("window width must be at least the Markov order")
    if k == 0:
        p1 = model.window_p
        windows, probs = [], []
        lookup = {a: i for i, a in enumerate(model.alphabet)}
        for w in all_sequences(model.alphabet, width):
            pr = float(np.prod([p1[lookup[s]] for s in w]))
            if pr > support_tol:
                windows.append(w)
                probs.append(pr)
        return windows, np.array(probs)
    ctx_pos = {c: i for i, c in enumerate(model.contexts)}
    sym_pos = {a: i for i, a in enumerate(model.alphabet)}
    windows = list(model.contexts)
    probs = model.window_p.copy()
    for _ in range(width - k):
        new_windows, new_probs = [], []
        for w, pr in zip(windows, probs):
            ctx = ctx_pos[w[-k:]]
            for s, label in enumerate(model.alphabet):
                q = model.tensor[ctx, s]
                if pr * q > support_tol:
                    new_windows.append(w + (label,))
                    new_probs.append(pr * q)
        windows, probs = new_windows, np.array(new_probs)
    return windows, probs


def markov_covariance(
    model: MarkovModel, length: int, support_tol: float = SUPPORT_TOL
) -> CovarianceDecomposition:
    """ED-L covariance scale of the order-k Markov surrogate.

    A first-order chain over sliding windows of width w = max(k, L, 1)
    carries the surrogate's correlations (Psi_w = T (I - T)^D); the window
    covariance is then aggregated onto each window's leading L-gram (the
    aggregation is the identity when w = L).
    """
    if length < 1:
        raise ValidationError("sequence length must be >= 1")
    width = max(model.order, length, 1)
    windows, p_w = _markov_window_probs(model, width, support_tol)
    win_pos = {w: i for i, w in enumerate(windows)}
    ctx_pos = {c: i for i, c in enumerate(model.contexts)}
    m = len(windows)
    t = np.zeros((m, m))
    for i, w in enumerate(windows):
        if model.order == 0:
            cond = model.tensor[0]
        else:
            cond = model.tensor[ctx_pos[w[-model.order :]]]
        for s, label in enumerate(model.alphabet):
            if cond[s] <= 0:
                continue
            nxt = win_pos.get(w[1:] + (label,))
            if nxt is None:
                continue  # truncated by the support threshold
            t[nxt, i] += cond[s]
    # renormalize columns against support-threshold truncation leakage
    colsums = t.sum(axis=0)
    if np.max(np.abs(colsums - 1.0)) > 1e-9:
        t = t / colsums[None, :]
    stat_residual = float(np.max(np.abs(t @ p_w - p_w)))
    if stat_residual > 1e-8:
        raise NumericsError(f"window chain not stationary (residual {stat_residual:.3e})")
    psi_w = drazin_inverse(
        np.eye(m, dtype=complex) - t, np.ones(m), p_w.astype(complex)
    ).real
    psi_w = t @ psi_w
    sigma_w = covariance(p_w, psi_w)
    if width == length:
        agg = np.eye(m)
        grams = windows
    else:
        gram_list: list[tuple[str, ...]] = []
        gram_pos: dict[tuple[str, ...], int] = {}
        rows, cols = [], []
        for j, w in enumerate(windows):
            g = w[:length]
            if g not in gram_pos:
                gram_pos[g] = len(gram_list)
                gram_list.append(g)
            rows.append(gram_pos[g])
            cols.append(j)
        agg = np.zeros((len(gram_list), m))
        agg[rows, cols] = 1.0
        grams = gram_list
    p_l = agg @ p_w
    sigma_0 = agg @ sigma_w.sigma_0 @ agg.T
    sigma_p = np.diag(p_l) - np.outer(p_l, p_l)
    return CovarianceDecomposition(
        p=p_l,
        sigma_p=sigma_p,
        sigma_psi=sigma_0 - sigma_p,
        sigma_0=sigma_0,
        n_eff=None,
        support=tuple(grams),
    )


def markov_information(
    inst: Instrument,
    length: int,
    order: int,
    support_tol: float = SUPPORT_TOL,
) -> float:
    """Distinguishability (nats) of the process from its order-k marginalization.

    KL divergence between the ED-L covariance scales of the full model and
    of the order-k Markov surrogate; N drops out because both covariances
    carry the same 1/n_eff factor.  When k + 1 < L the surrogate's mean
    L-gram distribution differs from the true one, the divergence grows
    without bound in N, and ``math.inf`` is returned as the flag.
    """
    if order < 0 or length < 1:
        raise ValidationError("need length >= 1 and order >= 0")
    if order + 1 < length:
        return math.inf
    psi = psi_asymptotic(inst, length, support_tol=support_tol)
    full = covariance(psi.p, psi)
    model = markov_tensor(inst, order, support_tol=support_tol)
    surrogate = markov_covariance(model, length, support_tol=support_tol)
    if full.support != surrogate.support:
        return math.inf
    if np.max(np.abs(full.p - surrogate.p)) > 1e-9:
        return math.inf
    return gaussian_kl(full.sigma_0, surrogate.sigma_0)


@dataclass(frozen=True)
class MarkovComparisonEntry:
    length: int
    order: int
    value: float

    @property
    def divergent(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class CorrelationReport:
    """Correlation information plus the (L, k) Markov-comparison table."""

    information: float
    entries: tuple[MarkovComparisonEntry, ...]
    diagnostics: dict = field(default_factory=dict)

    def value(self, length: int, order: int) -> float:
        for e in self.entries:
            if e.length == length and e.order == order:
                return e.value
        raise KeyError((length, order))


def correlation_report(
    inst: Instrument,
    lengths: Sequence[int],
    orders: Sequence[int],
) -> CorrelationReport:
    """Evaluate the (L, k) comparison table plus the plain correlation information."""
    psi1 = psi_asymptotic(inst, 1)
    decomp = covariance(psi1.p, psi1)
    info = correlation_information(decomp)
    entries = []
    for length in lengths:
        for order in orders:
            entries.append(
                MarkovComparisonEntry(
                    length=length,
                    order=order,
                    value=markov_information(inst, length, order),
                )
            )
    diagnostics = {
        "support_dim": int(decomp.p.size),
        "pdet_sigma_p": pseudo_det(decomp.sigma_p),
        "pdet_sigma_0": pseudo_det(decomp.sigma_0),
    }
    return CorrelationReport(information=info, entries=tuple(entries), diagnostics=diagnostics)


def fisher_empirical(
    family: Callable[[float], Instrument],
    theta0: float,
    length: int,
    n: int,
    step: float = 1e-5,
    cond_limit: float = 1e12,
) -> float:
    """Fisher information about theta carried by the ED-L of an N-outcome string.

    Large-N form: F = N (dp)^T (P + Psi P + P Psi^T)^{-1} (dp), with dp by
    central finite differences (relative step ``step``).  The matrix differs
    from sigma_0 by + p p^T and is invertible on the full support.
    """
    if step <= 0:
        raise ValidationError("finite-difference step must be positive")
    delta = step * max(abs(theta0), 1.0)
    inst0 = family(theta0)
    psi = psi_asymptotic(inst0, length)
    keep = [i for i, seq in enumerate(all_sequences(inst0.alphabet, length)) if seq in set(psi.support)]
    p_plus = marginal_probs(family(theta0 + delta), length)[keep]
    p_minus = marginal_probs(family(theta0 - delta), length)[keep]
    dp = (p_plus - p_minus) / (2 * delta)
    pm = np.diag(psi.p)
    info_matrix = pm + psi.values @ pm + pm @ psi.values.T
    cond = np.linalg.cond(info_matrix)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NumericsError(f"information matrix is ill-conditioned (cond={cond:.2e})")
    return float(n * dp @ np.linalg.solve(info_matrix, dp))


# ---------------------------------------------------------------------------
# structural constraints of sliding-window EDs (in/out flow balance)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintReport:
    """Per-context residuals of the in/out flow balance of an ED.

    For every (L-1)-gram the count of windows entering it equals the count
    leaving it, up to a boundary term of at most one window; ``bound`` is
    that tolerance in normalized units.  All residuals also sum to zero
    (the one redundancy with normalization).
    """

    length: int
    n: int
    residuals: dict[tuple[str, ...], float]
    bound: float
    ok: bool

    @property
    def max_abs_residual(self) -> float:
        return max((abs(v) for v in self.residuals.values()), default=0.0)

    @property
    def redundancy_residual(self) -> float:
        return sum(self.residuals.values())


def ed_constraints_check(
    ed: EmpiricalDistribution, strict: bool = False
) -> ConstraintReport:
    """Verify the in/out flow balance of a sliding-window ED.

    Any ED built from one contiguous string satisfies, for every
    (L-1)-context w, sum_z q[z + w] = sum_z q[w + z] up to one boundary
    window; a violation means the histogram was not produced that way.
    """
    if ed.length < 2:
        raise ValidationError("flow constraints need window length >= 2")
    d = len(ed.alphabet)
    q = ed.q.reshape((d,) * ed.length)
    # residual per (L-1)-context: windows entering it minus windows leaving it
    into = q.sum(axis=0).reshape(-1)  # sum over the first symbol
    out_of = q.sum(axis=ed.length - 1).reshape(-1)  # sum over the last symbol
    contexts = all_sequences(ed.alphabet, ed.length - 1)
    bound = 1.0 / (ed.n - ed.length + 1) + 1e-12
    residuals = {c: float(into[i] - out_of[i]) for i, c in enumerate(contexts)}
    ok = all(abs(v) <= bound for v in residuals.values())
    if strict and not ok:
        worst = max(residuals.items(), key=lambda kv: abs(kv[1]))
        raise ValidationError(
            f"ED violates the flow constraint at context {worst[0]!r} "
            f"(residual {worst[1]:.3e}, bound {bound:.3e}); not a sliding-window histogram"
        )
    return ConstraintReport(length=ed.length, n=ed.n, residuals=residuals, bound=bound, ok=ok)


@dataclass(frozen=True)
class CompressedED:
    """Losslessly filtered ED: all windows starting with one symbol removed."""

    alphabet: tuple[str, ...]
    length: int
    n: int
    dropped_symbol: str
    values: np.ndarray  # entries for sequences NOT starting with dropped_symbol

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def kept_sequences(self) -> list[tuple[str, ...]]:
        return [s for s in all_sequences(self.alphabet, self.length) if s[0] != self.dropped_symbol]


def ed_compress(ed: EmpiricalDistribution, drop_symbol: str) -> CompressedED:
    """Drop the d^{L-1} entries whose window starts with ``drop_symbol``.

    The flow constraints make those entries redundant (exactly when the
    boundary term vanishes), leaving d^L - d^{L-1} independent values.
    """
    if drop_symbol not in ed.alphabet:
        raise ValidationError(f"unknown symbol {drop_symbol!r}")
    if ed.length < 2:
        raise ValidationError("compression needs window length >= 2")
    d = len(ed.alphabet)
    sym = ed.alphabet.index(drop_symbol)
    block = d ** (ed.length - 1)
    mask = np.ones(d**ed.length, dtype=bool)
    mask[sym * block : (sym + 1) * block] = False
    return CompressedED(
        alphabet=ed.alphabet,
        length=ed.length,
        n=ed.n,
        dropped_symbol=drop_symbol,
        values=ed.q[mask],
    )


def ed_reconstruct(compressed: CompressedED) -> EmpiricalDistribution:
    """Rebuild the full ED from a compressed one via the flow constraints.

    Each removed entry q[y + w] equals sum_z q[w + z] - sum_{z != y} q[z + w],
    resolved recursively in order of the number of leading dropped symbols;
    the all-dropped-symbol entry comes from normalization.  Counts are
    reconstructed in integer arithmetic, so the round trip is exact whenever
    the input histogram was exact (boundary term zero).
    """
    alphabet = compressed.alphabet
    d = len(alphabet)
    length = compressed.length
    y = compressed.dropped_symbol
    n_windows = compressed.n - length + 1
    scaled = compressed.values * n_windows
    counts = np.rint(scaled)
    exact_counts = bool(np.max(np.abs(scaled - counts)) < 1e-9) if scaled.size else True
    values = scaled if not exact_counts else counts

    table: dict[tuple[str, ...], float] = {}
    for seq, v in zip(
        (s for s in all_sequences(alphabet, length) if s[0] != y), values
    ):
        table[seq] = float(v)

    def leading_drops(ctx: tuple[str, ...]) -> int:
        c = 0
        for s in ctx:
            if s != y:
                break
            c += 1
        return c

    contexts = all_sequences(alphabet, length - 1)
    for level in range(length - 1):
        for ctx in contexts:
            if leading_drops(ctx) != level:
                continue
            outgoing = sum(table[ctx + (z,)] for z in alphabet)
            incoming_known = sum(table[(z,) + ctx] for z in alphabet if z != y)
            table[(y,) + ctx] = outgoing - incoming_known
    total = n_windows if exact_counts else float(n_windows)
    rest = sum(v for seq, v in table.items() if seq != (y,) * length)
    table[(y,) * length] = total - rest
    q = np.array([table[s] for s in all_sequences(alphabet, length)]) / n_windows
    if np.any(q < -1e-9):
        raise ValidationError(
            "reconstruction produced negative entries; the compressed ED violates "
            "the flow constraints (nonzero boundary term or malformed input)"
        )
    q = np.clip(q, 0.0, None)
    return EmpiricalDistribution(alphabet=alphabet, length=length, n=compressed.n, q=q)
