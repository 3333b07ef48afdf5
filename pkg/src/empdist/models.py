"""Instrument factories for the example systems, plus a classical-chain embedding.

All spin-chain operators are built by Kronecker products with identity
padding, sites ordered left to right.  Chain sizes are guarded: superoperator
storage grows as 16^sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GuardRailError, ValidationError
from .instruments import Instrument, LindbladSystem, from_kraus, jump_instrument
from .supop import hermitian_exp, sandwich_superop

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

XX_CHAIN_MAX_SITES = 5
PERIODIC_CHAIN_MAX_SITES = 4


def site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Single-site operator embedded in an n-site chain (site is 0-based)."""
    out = np.eye(1, dtype=complex)
    for j in range(n_sites):
        out = np.kron(out, op if j == site else np.eye(2, dtype=complex))
    return out


@dataclass(frozen=True)
class AmpDampParams:
    """Damping strength in [0, 1] and inter-measurement X-rotation angle."""

    lam: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"damping must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.phi < 2 * math.pi + 1e-12:
            raise ValidationError(f"rotation angle must lie in [0, 2 pi), got {self.phi}")


def rotation_x(phi: float) -> np.ndarray:
    """exp(-i phi sigma_x / 2)."""
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def amp_damp_qubit(params: AmpDampParams | None = None, *, lam: float | None = None, phi: float | None = None) -> Instrument:
    """Two-outcome qubit instrument: X-rotation followed by a damping-type measurement.

    Outcome "0" keeps the state (attenuating the excited amplitude), outcome
    "1" is the decay click that resets to the ground state.
    """
    if params is None:
        params = AmpDampParams(lam=lam, phi=phi)
    k0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - params.lam)]], dtype=complex)
    k1 = np.array([[0.0, math.sqrt(params.lam)], [0.0, 0.0]], dtype=complex)
    rot = rotation_x(params.phi)
    return from_kraus([[k0 @ rot], [k1 @ rot]], alphabet=("0", "1"))


@dataclass(frozen=True)
class XXChainParams:
    """Boundary-driven nearest-neighbor hopping chain with end-site baths.

    The on-site field varies linearly from -field/2 to +field/2 across the
    chain; bath occupations fill_* in [0, 1] set the up/down jump split at
    each end.  ``observed`` selects which of the four boundary jumps produce
    outcomes (the rest are folded into the unobserved dissipation).
    """

    sites: int
    hopping: float = 1.0
    field: float = 0.0
    gamma_left: float = 1.0
    gamma_right: float = 1.0
    fill_left: float = 0.75
    fill_right: float = 0.25
    observed: tuple[str, ...] = ("L-", "R-")

    def __post_init__(self):
        if self.sites < 2:
            raise ValidationError("chain needs at least 2 sites")
        if self.sites > XX_CHAIN_MAX_SITES:
            raise GuardRailError(
                f"chain size {self.sites} exceeds the dense-superoperator guard "
                f"({XX_CHAIN_MAX_SITES})"
            )
        if min(self.gamma_left, self.gamma_right) < 0:
            raise ValidationError("bath rates must be non-negative")
        for f in (self.fill_left, self.fill_right):
            if not 0.0 <= f <= 1.0:
                raise ValidationError("bath occupations must lie in [0, 1]")
        known = {"L+", "L-", "R+", "R-"}
        if not self.observed or not set(self.observed) <= known:
            raise ValidationError(f"observed jumps must be a non-empty subset of {sorted(known)}")


def xx_chain_hamiltonian(params: XXChainParams) -> np.ndarray:
    m = params.sites
    h = np.zeros((2**m, 2**m), dtype=complex)
    for i in range(m - 1):
        h += params.hopping * (
            site_operator(SIGMA_PLUS, i, m) @ site_operator(SIGMA_MINUS, i + 1, m)
            + site_operator(SIGMA_MINUS, i, m) @ site_operator(SIGMA_PLUS, i + 1, m)
        )
    for i in range(m):
        field_i = params.field * i / (m - 1) - params.field / 2
        h += field_i * site_operator(SIGMA_Z, i, m)
    return h


def xx_chain_system(params: XXChainParams) -> LindbladSystem:
    """Lindblad data for the boundary-driven chain with the requested observed set."""
    m = params.sites
    jumps = {
        "L+": math.sqrt(params.gamma_left * params.fill_left) * site_operator(SIGMA_PLUS, 0, m),
        "L-": math.sqrt(params.gamma_left * (1 - params.fill_left)) * site_operator(SIGMA_MINUS, 0, m),
        "R+": math.sqrt(params.gamma_right * params.fill_right) * site_operator(SIGMA_PLUS, m - 1, m),
        "R-": math.sqrt(params.gamma_right * (1 - params.fill_right)) * site_operator(SIGMA_MINUS, m - 1, m),
    }
    observed = {label: jumps[label] for label in params.observed}
    unobserved = tuple(op for label, op in jumps.items() if label not in params.observed)
    return LindbladSystem(
        hamiltonian=xx_chain_hamiltonian(params),
        observed=observed,
        unobserved=unobserved,
    )


def xx_chain(params: XXChainParams) -> Instrument:
    """Jump instrument of the boundary-driven chain (default: boundary emissions)."""
    return jump_instrument(xx_chain_system(params))


@dataclass(frozen=True)
class PeriodicChainParams:
    """Closed hopping ring with pair creation/annihilation, stroboscopically measured.

    Every ``period`` of unitary evolution one site is projectively measured
    (uniformly random site, weight 1/sites); ``site_resolved`` keeps the site
    label in the outcome, otherwise only up/down survives.

    Pair terms change the total occupation by two, so occupation parity is
    conserved and the summed channel has one fixed point per parity sector
    (and one per occupation number when pairing is zero).  ``parity_sector``
    pins the stationary state to one sector ("even"/"odd"); left unset, any
    degeneracy is reported by the steady-state solver instead of being
    silently broken.
    """

    sites: int
    hopping: float = 1.0
    pairing: float = 1.0
    period: float = 1.0
    site_resolved: bool = False
    parity_sector: str | None = None

    def __post_init__(self):
        if self.sites < 2:
            raise ValidationError("ring needs at least 2 sites")
        if self.sites > PERIODIC_CHAIN_MAX_SITES:
            raise GuardRailError(
                f"ring size {self.sites} exceeds the dense-superoperator guard "
                f"({PERIODIC_CHAIN_MAX_SITES})"
            )
        if self.period <= 0:
            raise ValidationError("measurement period must be positive")
        if self.parity_sector not in (None, "even", "odd"):
            raise ValidationError("parity_sector must be 'even', 'odd', or None")


def periodic_chain_hamiltonian(params: PeriodicChainParams) -> np.ndarray:
    m = params.sites
    h = np.zeros((2**m, 2**m), dtype=complex)
    for i in range(m):
        j = (i + 1) % m
        h -= params.hopping * (
            site_operator(SIGMA_PLUS, i, m) @ site_operator(SIGMA_MINUS, j, m)
            + site_operator(SIGMA_MINUS, i, m) @ site_operator(SIGMA_PLUS, j, m)
        )
        h -= params.pairing * (
            site_operator(SIGMA_PLUS, i, m) @ site_operator(SIGMA_PLUS, j, m)
            + site_operator(SIGMA_MINUS, i, m) @ site_operator(SIGMA_MINUS, j, m)
        )
    return h


def periodic_chain(params: PeriodicChainParams) -> Instrument:
    """Stroboscopic random-site projective measurement on the ring.

    Site-resolved outcomes are labeled "<site>+" / "<site>-" (1-based site);
    site-blind outcomes sum the per-site superoperators into "+" and "-".
    With zero pairing the dynamics conserve total occupation and the summed
    channel has one steady state per occupation sector; the degeneracy is
    reported by the steady-state solver rather than silently broken.
    """
    m = params.sites
    u = hermitian_exp(periodic_chain_hamiltonian(params), params.period)
    per_site: dict[str, np.ndarray] = {}
    for j in range(m):
        up = site_operator(SIGMA_PLUS @ SIGMA_MINUS, j, m)  # occupied projector
        down = site_operator(SIGMA_MINUS @ SIGMA_PLUS, j, m)  # empty projector
        per_site[f"{j + 1}+"] = sandwich_superop(up @ u, up @ u) / m
        per_site[f"{j + 1}-"] = sandwich_superop(down @ u, down @ u) / m
    if params.site_resolved:
        labels = tuple(per_site)
        inst = Instrument(labels, [per_site[label] for label in labels])
    else:
        plus = sum(per_site[f"{j + 1}+"] for j in range(m))
        minus = sum(per_site[f"{j + 1}-"] for j in range(m))
        inst = Instrument(("+", "-"), [plus, minus])
    if params.parity_sector is not None:
        inst = inst.with_reference_state(
            _parity_sector_state(inst, params.parity_sector)
        )
    return inst


def _parity_sector_state(inst: Instrument, parity: str) -> np.ndarray:
    """Stationary state of the summed channel restricted to one parity sector.

    The sector block of the vectorized space is itself a trace-preserving
    channel; its (unique) fixed point is embedded back into the full space.
    """
    from .supop import devectorize as _devec
    from .supop import stationary_state as _stationary

    d = inst.dim
    want = 0 if parity == "even" else 1
    sector = [b for b in range(d) if bin(b).count("1") % 2 == want]
    vec_idx = [i + d * j for j in sector for i in sector]
    block = np.asarray(inst.total)[np.ix_(vec_idx, vec_idx)]
    pi_block = _devec(_stationary(block))
    rho = np.zeros((d, d), dtype=complex)
    rho[np.ix_(sector, sector)] = pi_block
    return rho


def classical_markov(transition: np.ndarray, labels: tuple[str, ...] | None = None) -> Instrument:
    """Embed a column-stochastic chain as an instrument over diagonal states.

    Outcome x maps basis state j to T[x, j] |x><x|, so outcome strings
    reproduce the chain exactly; used as the tractable oracle model.
    """
    t = np.asarray(transition, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValidationError(f"transition matrix must be square, got {t.shape}")
    if np.any(t < -1e-12):
        raise ValidationError("transition matrix has negative entries")
    colsums = t.sum(axis=0)
    if np.max(np.abs(colsums - 1.0)) > 1e-10:
        raise ValidationError("transition matrix must be column-stochastic")
    d = t.shape[0]
    if labels is None:
        labels = tuple(str(i) for i in range(d))
    kraus_sets = []
    for x in range(d):
        ops = []
        for j in range(d):
            if t[x, j] == 0.0:
                continue
            k = np.zeros((d, d), dtype=complex)
            k[x, j] = math.sqrt(t[x, j])
            ops.append(k)
        kraus_sets.append(ops)
    return from_kraus(kraus_sets, alphabet=labels)


def symmetric_two_state_chain(flip: float) -> Instrument:
    """Convenience: 2-state chain that flips with probability ``flip``."""
    t = np.array([[1 - flip, flip], [flip, 1 - flip]])
    return classical_markov(t)
