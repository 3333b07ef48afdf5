"""Quantum instruments: construction, validation, and sequence probabilities.

An instrument is an ordered outcome alphabet together with one superoperator
per outcome; the outcome superoperators are trace non-increasing and their
sum is trace preserving.  Instruments are built from per-outcome Kraus sets,
or from Lindblad data (jump processes where only some jumps are observed),
or ingested from JSON (see :mod:`empdist.serialization`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DarkStateError, ValidationError
from .supop import (
    devectorize,
    fixed_point_projector,
    identity_covector,
    sandwich_superop,
    stationary_state,
    vectorize,
)

logger = logging.getLogger(__name__)

#: max-norm tolerance for trace preservation of the summed channel
TRACE_PRESERVATION_TOL = 1e-10

#: absolute tolerance below which imaginary parts of probabilities are roundoff
IMAG_TOL = 1e-10


def _hermitian_basis(dim: int) -> list[np.ndarray]:
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[i, j] = sym[j, i] = 1.0
            basis.append(sym)
            asym = np.zeros((dim, dim), dtype=complex)
            asym[i, j] = 1.0j
            asym[j, i] = -1.0j
            basis.append(asym)
    return basis


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) S(|i><j|) of a superoperator."""
    d2 = superop.shape[0]
    d = math.isqrt(d2)
    choi = np.zeros((d2, d2), dtype=complex)
    for i in range(d):
        for j in range(d):
            eij = np.zeros((d, d), dtype=complex)
            eij[i, j] = 1.0
            out = devectorize(superop @ vectorize(eij))
            choi[i * d : (i + 1) * d, j * d : (j + 1) * d] = out
    return choi


class Instrument:
    """Ordered outcome alphabet plus one superoperator per outcome.

    Immutable after construction; all stored arrays are read-only.  All
    vector/matrix indexing over length-L outcome sequences downstream is
    lexicographic in this alphabet order, first symbol most significant.
    """

    def __init__(
        self,
        alphabet: Sequence[str],
        superops: Sequence[np.ndarray],
        validate: bool = True,
        choi_check: bool = True,
        reference_state: np.ndarray | None = None,
    ):
        self.alphabet: tuple[str, ...] = tuple(str(x) for x in alphabet)
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValidationError("outcome labels must be unique")
        if len(self.alphabet) != len(superops):
            raise ValidationError("one superoperator per outcome label required")
        if not self.alphabet:
            raise ValidationError("alphabet must be non-empty")
        mats = []
        for m in superops:
            m = np.array(m, dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValidationError(f"superoperator must be square, got {m.shape}")
            m.setflags(write=False)
            mats.append(m)
        d2 = mats[0].shape[0]
        if any(m.shape[0] != d2 for m in mats):
            raise ValidationError("all outcome superoperators must share one dimension")
        d = math.isqrt(d2)
        if d * d != d2:
            raise ValidationError(f"superoperator dimension {d2} is not a perfect square")
        self.superops: tuple[np.ndarray, ...] = tuple(mats)
        self.dim: int = d
        self._index = {label: i for i, label in enumerate(self.alphabet)}
        self._reference_state: np.ndarray | None = None
        if reference_state is not None:
            self._reference_state = self._check_reference(reference_state)
        if validate:
            self.validate(choi_check=choi_check)

    @property
    def n_outcomes(self) -> int:
        return len(self.alphabet)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValidationError(f"unknown outcome label {label!r}") from None

    def superop(self, outcome: str | int) -> np.ndarray:
        if isinstance(outcome, str):
            return self.superops[self.index(outcome)]
        return self.superops[outcome]

    @cached_property
    def total(self) -> np.ndarray:
        """Summed channel: measure, discard the outcome."""
        total = sum(self.superops[1:], start=self.superops[0].copy())
        total.setflags(write=False)
        return total

    @cached_property
    def trace_covectors(self) -> np.ndarray:
        """Rows <<1| M_x, one per outcome; dot with a vectorized state gives p(x)."""
        one = identity_covector(self.dim)
        rows = np.array([one @ m for m in self.superops])
        rows.setflags(write=False)
        return rows

    def _check_reference(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=complex)
        vec = vectorize(state) if state.ndim == 2 else state.copy()
        if vec.size != self.dim**2:
            raise ValidationError("reference state dimension does not match instrument")
        one = identity_covector(self.dim)
        trace = complex(one @ vec)
        if abs(trace - 1.0) > 1e-8:
            raise ValidationError(f"reference state must have unit trace, got {trace}")
        residual = float(np.max(np.abs(self.total @ vec - vec)))
        if residual > 1e-8:
            raise ValidationError(
                f"reference state is not a fixed point of the summed channel "
                f"(residual {residual:.3e})"
            )
        vec.setflags(write=False)
        return vec

    def with_reference_state(self, state: np.ndarray) -> "Instrument":
        """Copy of this instrument with an explicitly chosen stationary state.

        Needed when the summed channel has conserved sectors (degenerate
        fixed point): the statistics are then defined relative to a chosen
        stationary state, typically the fixed point of one sector.
        """
        return Instrument(
            self.alphabet, self.superops, validate=False, reference_state=state
        )

    @cached_property
    def steady_state(self) -> np.ndarray:
        """Vectorized stationary state used by all statistics.

        The unique fixed point of the summed channel, unless a reference
        state was pinned explicitly; degenerate channels without a pinned
        reference raise :class:`DegenerateSteadyStateError`.
        """
        if self._reference_state is not None:
            return self._reference_state
        pi = stationary_state(self.total)
        pi.setflags(write=False)
        return pi

    @property
    def steady_density(self) -> np.ndarray:
        return devectorize(self.steady_state)

    @cached_property
    def fixed_point_projector(self) -> np.ndarray:
        """Projector used by the Drazin inverse of (I - summed channel).

        Rank one (|pi><<1|) when the fixed point is simple; the full
        eigenvalue-1 spectral projector when conserved sectors make it
        degenerate.
        """
        one = identity_covector(self.dim)
        if self._reference_state is None:
            proj = np.outer(self.steady_state, one)
        else:
            proj = fixed_point_projector(self.total)
            rank = float(np.trace(proj).real)
            if abs(rank - 1.0) < 0.5:
                proj = np.outer(self.steady_state, one)
        proj.setflags(write=False)
        return proj

    def validate(self, atol: float = TRACE_PRESERVATION_TOL, choi_check: bool = True) -> None:
        """Check trace preservation of the sum and Hermiticity preservation.

        Choi positivity of each outcome superoperator is checked when
        ``choi_check`` is set; violations only warn (complete positivity of
        user-supplied superoperators is not a hard contract).
        """
        one = identity_covector(self.dim)
        residual = float(np.max(np.abs(one @ self.total - one)))
        if residual > atol:
            raise ValidationError(
                f"summed channel is not trace preserving (residual {residual:.3e})"
            )
        for label, m in zip(self.alphabet, self.superops):
            for h in _hermitian_basis(self.dim):
                out = devectorize(m @ vectorize(h))
                herm_res = float(np.max(np.abs(out - out.conj().T)))
                if herm_res > 1e-9:
                    raise ValidationError(
                        f"outcome {label!r} does not preserve Hermiticity "
                        f"(residual {herm_res:.3e})"
                    )
            if float(np.max(np.abs(m))) < 1e-14:
                logger.warning("outcome %r has a (near-)zero superoperator; degenerate support", label)
        if choi_check:
            for label, m in zip(self.alphabet, self.superops):
                evals = np.linalg.eigvalsh(choi_matrix(m))
                if evals.min() < -1e-10:
                    logger.warning(
                        "outcome %r fails Choi positivity (min eigenvalue %.3e)",
                        label,
                        float(evals.min()),
                    )

    def __repr__(self) -> str:
        return f"Instrument(alphabet={self.alphabet!r}, dim={self.dim})"


def from_kraus(
    kraus_sets: Sequence[Sequence[np.ndarray]],
    alphabet: Sequence[str] | None = None,
    completeness_tol: float = 1e-8,
) -> Instrument:
    """Instrument from per-outcome Kraus operator lists.

    Outcome x gets the superoperator sum_k K_{x,k} . K_{x,k}^dagger; the
    Kraus completeness relation sum_{x,k} K^dagger K = I is enforced.
    """
    if alphabet is None:
        alphabet = [str(i) for i in range(len(kraus_sets))]
    sets = [[np.asarray(k, dtype=complex) for k in ks] for ks in kraus_sets]
    dims = {k.shape for ks in sets for k in ks}
    if len(dims) != 1:
        raise ValidationError(f"all Kraus operators must share one shape, got {dims}")
    (d, d2) = dims.pop()
    if d != d2:
        raise ValidationError("Kraus operators must be square")
    completeness = sum(k.conj().T @ k for ks in sets for k in ks)
    residual = float(np.max(np.abs(completeness - np.eye(d))))
    if residual > completeness_tol:
        raise ValidationError(f"Kraus completeness violated (residual {residual:.3e})")
    superops = []
    for ks in sets:
        m = np.zeros((d * d, d * d), dtype=complex)
        for k in ks:
            m = m + sandwich_superop(k, k)
        superops.append(m)
    return Instrument(alphabet, superops)


def dissipator(jump_op: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> L rho L^dagger - (1/2){L^dagger L, rho}."""
    l = np.asarray(jump_op, dtype=complex)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise ValidationError(f"jump operator must be square, got {l.shape}")
    d = l.shape[0]
    ldl = l.conj().T @ l
    eye = np.eye(d)
    return (
        sandwich_superop(l, l)
        - 0.5 * np.kron(eye, ldl)
        - 0.5 * np.kron(ldl.T, eye)
    )


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i [H, rho]."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


@dataclass(frozen=True)
class LindbladSystem:
    """Generator data for a jump process with partially observed jumps.

    ``observed`` maps outcome labels to jump operators (rates folded into
    the operators); ``unobserved`` jumps contribute dissipation but never
    produce outcomes.
    """

    hamiltonian: np.ndarray
    observed: dict[str, np.ndarray]
    unobserved: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if np.max(np.abs(h - h.conj().T)) > 1e-10 * max(float(np.max(np.abs(h))), 1.0):
            raise ValidationError("Hamiltonian must be Hermitian")
        if not self.observed:
            raise ValidationError("at least one observed jump is required")

    def liouvillian(self) -> np.ndarray:
        """Full generator: Hamiltonian part plus all dissipators."""
        gen = hamiltonian_superop(self.hamiltonian)
        for op in self.observed.values():
            gen = gen + dissipator(op)
        for op in self.unobserved:
            gen = gen + dissipator(op)
        return gen


def jump_instrument(system: LindbladSystem, cond_limit: float = 1e12) -> Instrument:
    """Instrument of observed jumps with time tags integrated out.

    Between observed jumps the state evolves under the no-jump generator
    L0 = L - sum_x J_x; integrating the inter-jump time over [0, inf) turns
    each outcome into M_x = -J_x L0^{-1}.  L0 must be invertible (no dark
    states: a jump is always eventually observed); this paper-level
    assumption is enforced as a runtime check.
    """
    gen = system.liouvillian()
    d = np.asarray(system.hamiltonian).shape[0]
    one = identity_covector(d)
    gen_residual = float(np.max(np.abs(one @ gen)))
    if gen_residual > 1e-9:
        raise ValidationError(f"generator does not annihilate the trace (residual {gen_residual:.3e})")
    jumps = {label: sandwich_superop(op, op) for label, op in system.observed.items()}
    no_jump = gen - sum(jumps.values())
    cond = np.linalg.cond(no_jump)
    if not np.isfinite(cond) or cond > cond_limit:
        raise DarkStateError(
            f"no-jump generator is (near-)singular (cond={cond:.2e}): dark state present"
        )
    neg_inv = -np.linalg.solve(no_jump, np.eye(d * d))
    superops = [jumps[label] @ neg_inv for label in system.observed]
    return Instrument(tuple(system.observed), superops)


def sequence_superop(inst: Instrument, outcomes: Sequence[str]) -> np.ndarray:
    """Ordered product for an outcome sequence; the earliest outcome acts first."""
    result = np.eye(inst.dim**2, dtype=complex)
    for label in outcomes:
        result = inst.superop(label) @ result
    return result


def _as_vec_state(inst: Instrument, rho0: np.ndarray | None) -> np.ndarray:
    if rho0 is None:
        return inst.steady_state
    rho0 = np.asarray(rho0, dtype=complex)
    vec = vectorize(rho0) if rho0.ndim == 2 else rho0
    if vec.size != inst.dim**2:
        raise ValidationError(f"state dimension {vec.size} does not match instrument")
    trace = complex(identity_covector(inst.dim) @ vec)
    if abs(trace - 1.0) > 1e-8:
        raise ValidationError(f"initial state must have unit trace, got {trace}")
    return vec


def _real_probability(value: complex, what: str = "probability") -> float:
    if abs(value.imag) > IMAG_TOL:
        raise ValidationError(f"{what} has non-negligible imaginary part {value.imag:.3e}")
    real = value.real
    if real < -IMAG_TOL:
        raise ValidationError(f"{what} is negative beyond tolerance: {real:.3e}")
    return min(max(real, 0.0), 1.0)


def sequence_prob(
    inst: Instrument, outcomes: Sequence[str], rho0: np.ndarray | None = None
) -> float:
    """Probability of a contiguous outcome sequence from ``rho0`` (default: steady state)."""
    vec = _as_vec_state(inst, rho0)
    for label in outcomes:
        vec = inst.superop(label) @ vec
    value = complex(identity_covector(inst.dim) @ vec)
    return _real_probability(value, "sequence probability")


def gapped_sequence_prob(
    inst: Instrument,
    indexed_outcomes: Sequence[tuple[int, str]],
    rho0: np.ndarray | None = None,
) -> float:
    """Probability of outcomes pinned at 1-based measurement indices.

    Intermediate outcomes are marginalized: each unit gap inserts one power
    of the summed channel, and the leading gap before the first index acts
    on ``rho0`` first.  Indices must be strictly increasing.
    """
    indices = [i for i, _ in indexed_outcomes]
    if any(i < 1 for i in indices):
        raise ValidationError("measurement indices are 1-based and must be >= 1")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValidationError(f"indices must be strictly increasing, got {indices}")
    vec = _as_vec_state(inst, rho0)
    previous = 0
    for index, label in indexed_outcomes:
        gap = index - previous - 1
        if gap > 0:
            vec = np.linalg.matrix_power(inst.total, gap) @ vec
        vec = inst.superop(label) @ vec
        previous = index
    value = complex(identity_covector(inst.dim) @ vec)
    return _real_probability(value, "gapped sequence probability")
