"""JSON encoding of instruments, matrices, and result objects.

Conventions: complex numbers are [re, im] pairs, matrices are row-major
nested lists with explicit dimensions, real symmetric matrices are written
as plain floats.  Python's shortest-repr float serialization makes the
instrument JSON round trip bit-identical.
"""

from __future__ import annotations

import json
import math
from typing import Any, IO

import numpy as np

from .empirical import CovarianceDecomposition, PsiMatrix
from .errors import ValidationError
from .information import ConstraintReport, CorrelationReport
from .instruments import Instrument
from .sampler import EDEnsemble


def complex_matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "data": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def complex_matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed complex-matrix JSON: {exc}") from None
    m = np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)
    if m.shape != (rows, cols):
        raise ValidationError(f"matrix data shape {m.shape} != declared ({rows}, {cols})")
    return m


def real_matrix_to_json(m: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.atleast_2d(np.asarray(m, dtype=float))]


def vector_to_json(v: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(v, dtype=float)]


def instrument_to_json(inst: Instrument) -> dict:
    return {
        "alphabet": list(inst.alphabet),
        "hilbert_dim": inst.dim,
        "superops": {
            label: complex_matrix_to_json(inst.superop(label)) for label in inst.alphabet
        },
    }


def instrument_from_json(obj: dict, validate: bool = True) -> Instrument:
    try:
        alphabet = [str(x) for x in obj["alphabet"]]
        superops = [complex_matrix_from_json(obj["superops"][label]) for label in alphabet]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed instrument JSON: {exc}") from None
    inst = Instrument(alphabet, superops, validate=validate)
    declared = int(obj.get("hilbert_dim", inst.dim))
    if declared != inst.dim:
        raise ValidationError(
            f"declared hilbert_dim {declared} does not match superoperators ({inst.dim})"
        )
    return inst


def _finite_or_inf(value: float) -> Any:
    return "inf" if math.isinf(value) else float(value)


def psi_to_json(psi: PsiMatrix) -> dict:
    return {
        "length": psi.length,
        "mode": psi.mode,
        "n": psi.n,
        "support": ["".join(s) if all(len(c) == 1 for c in s) else list(s) for s in psi.support],
        "dropped": ["".join(s) if all(len(c) == 1 for c in s) else list(s) for s in psi.dropped],
        "p": vector_to_json(psi.p),
        "values": real_matrix_to_json(psi.values),
    }


def covariance_to_json(decomp: CovarianceDecomposition) -> dict:
    out = {
        "p": vector_to_json(decomp.p),
        "sigma_p": real_matrix_to_json(decomp.sigma_p),
        "sigma_psi": real_matrix_to_json(decomp.sigma_psi),
        "sigma_0": real_matrix_to_json(decomp.sigma_0),
        "n_eff": decomp.n_eff,
    }
    if decomp.n_eff is not None:
        out["sigma"] = real_matrix_to_json(decomp.sigma)
    return out


def ensemble_to_json(ens: EDEnsemble, include_eds: bool = False) -> dict:
    out = {
        "alphabet": list(ens.alphabet),
        "L": ens.length,
        "N": ens.n,
        "runs": ens.runs,
        "seed": ens.seed,
        "sample_mean": vector_to_json(ens.sample_mean),
        "sample_cov": real_matrix_to_json(ens.sample_cov),
    }
    if include_eds and ens.eds is not None:
        out["eds"] = real_matrix_to_json(ens.eds)
    return out


def correlation_report_to_json(report: CorrelationReport) -> dict:
    entries = []
    for e in report.entries:
        entry: dict[str, Any] = {"L": e.length, "k": e.order, "I_L_k": _finite_or_inf(e.value)}
        if e.divergent:
            entry["reason"] = "mean mismatch: k + 1 < L, divergence grows with N"
        entries.append(entry)
    return {
        "I": _finite_or_inf(report.information),
        "table": entries,
        "diagnostics": report.diagnostics,
    }


def constraint_report_to_json(report: ConstraintReport) -> dict:
    return {
        "L": report.length,
        "N": report.n,
        "bound": report.bound,
        "ok": report.ok,
        "max_abs_residual": report.max_abs_residual,
        "redundancy_residual": report.redundancy_residual,
        "residuals": {"".join(ctx): value for ctx, value in report.residuals.items()},
    }


def dump_json(obj: Any, stream: IO[str]) -> None:
    json.dump(obj, stream, indent=2, sort_keys=False)
    stream.write("\n")
