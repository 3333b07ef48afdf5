"""Independent reference values and brute-force oracles used across the tests.

Everything here is deliberately implemented by a different route than the
library: closed-form expressions, direct enumeration over all strings,
stepwise conditional-probability chains, quadrature, and power iteration.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from empdist import ed_from_string
from empdist.instruments import Instrument
from empdist.supop import devectorize, identity_covector, vectorize


# -- closed forms for the bitflip (phi = pi) amplitude-damped qubit ----------


def bitflip_steady(lam: float) -> np.ndarray:
    return np.diag([1.0 / (2 - lam), (1 - lam) / (2 - lam)]).astype(complex)


def bitflip_marginals(lam: float) -> np.ndarray:
    return np.array([2 * (1 - lam) / (2 - lam), lam / (2 - lam)])


def bitflip_psi(lam: float) -> np.ndarray:
    return (lam / (2 - lam) ** 2) * np.array(
        [[lam / 2, -(1 - lam)], [-lam / 2, (1 - lam)]]
    )


def bitflip_sigma0(lam: float) -> np.ndarray:
    return (4 * (1 - lam) * lam / (2 - lam) ** 3) * np.array([[1.0, -1.0], [-1.0, 1.0]])


def bitflip_sigma_p(lam: float) -> np.ndarray:
    return (2 - lam) / 2 * bitflip_sigma0(lam)


def bitflip_information(lam: float) -> float:
    return 0.5 * (lam / (2 - lam) + math.log((2 - lam) / 2))


def boundary_chain_info_bound(fill: float) -> float:
    """Large-gradient limit of the correlation information of the driven chain."""
    return 0.5 * math.log(1.0 / ((1 - fill) ** 2 + fill**2)) - fill * (1 - fill)


# -- brute-force oracles ------------------------------------------------------


def enumeration_ed_moments(inst: Instrument, length: int, n: int):
    """Exact ED-L mean and covariance by summing over every length-n string."""
    one = identity_covector(inst.dim)
    d_grams = inst.n_outcomes**length
    mean = np.zeros(d_grams)
    second = np.zeros((d_grams, d_grams))
    for string in itertools.product(inst.alphabet, repeat=n):
        vec = inst.steady_state
        for label in string:
            vec = inst.superop(label) @ vec
        prob = float((one @ vec).real)
        if prob <= 0.0:
            continue
        q = ed_from_string(string, length, inst.alphabet).q
        mean += prob * q
        second += prob * np.outer(q, q)
    return mean, second - np.outer(mean, mean)


def stepwise_sequence_prob(inst: Instrument, outcomes, rho0: np.ndarray | None = None) -> float:
    """Chain of conditionals with explicit state renormalization at every step."""
    rho = devectorize(inst.steady_state) if rho0 is None else np.asarray(rho0, dtype=complex)
    prob = 1.0
    for label in outcomes:
        out = devectorize(inst.superop(label) @ vectorize(rho))
        p_step = float(np.trace(out).real)
        prob *= p_step
        if p_step == 0.0:
            return 0.0
        rho = out / p_step
    return prob


def power_iteration_steady(superop: np.ndarray, steps: int = 20_000, tol: float = 1e-13) -> np.ndarray:
    """Fixed point by repeated application to the maximally mixed state."""
    superop = np.asarray(superop, dtype=complex)
    d = math.isqrt(superop.shape[0])
    vec = vectorize(np.eye(d, dtype=complex) / d)
    for _ in range(steps):
        new = superop @ vec
        new = new / (identity_covector(d) @ new)
        if np.max(np.abs(new - vec)) < tol:
            return new
        vec = new
    return vec


def spectral_drazin(superop: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """(I - M)^D via the eigendecomposition route: sum_j P_j / (1 - lambda_j)."""
    superop = np.asarray(superop, dtype=complex)
    evals, evecs = np.linalg.eig(superop)
    left = np.linalg.inv(evecs)
    radius = float(np.max(np.abs(evals)))
    out = np.zeros_like(superop)
    for j, lam in enumerate(evals):
        if abs(lam - 1.0) < tol * radius:
            continue
        out += np.outer(evecs[:, j], left[j, :]) / (1.0 - lam)
    return out


def gaussian_kl_quadrature(sigma1, sigma2, dmu, half_width: float = 12.0, points: int = 801) -> float:
    """KL of two full-rank 2-D Gaussians by direct grid integration."""
    sigma1 = np.asarray(sigma1, float)
    sigma2 = np.asarray(sigma2, float)
    dmu = np.asarray(dmu, float)
    inv1, inv2 = np.linalg.inv(sigma1), np.linalg.inv(sigma2)
    det1, det2 = np.linalg.det(sigma1), np.linalg.det(sigma2)
    scale = math.sqrt(float(np.max(np.linalg.eigvalsh(sigma1))))
    xs = np.linspace(-half_width * scale, half_width * scale, points)
    dx = xs[1] - xs[0]
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    quad1 = np.einsum("ni,ij,nj->n", pts, inv1, pts)
    shifted = pts - dmu
    quad2 = np.einsum("ni,ij,nj->n", shifted, inv2, shifted)
    log_p = -0.5 * quad1 - math.log(2 * math.pi * math.sqrt(det1))
    log_q = -0.5 * quad2 - math.log(2 * math.pi * math.sqrt(det2))
    p = np.exp(log_p)
    return float(np.sum(p * (log_p - log_q)) * dx * dx)


def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_simplex(dim: int, rng: np.random.Generator) -> np.ndarray:
    p = rng.dirichlet(np.ones(dim))
    return np.clip(p, 1e-9, None) / np.clip(p, 1e-9, None).sum()
