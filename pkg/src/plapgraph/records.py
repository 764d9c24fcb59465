"""Persisted outputs: JSON result records and plain-text summaries.

Records are written with sorted keys and ``repr`` floats, so identical runs
give identical bytes and every value survives a load unchanged.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .energy import LambdaEstimate, SolveResult

RECORD_VERSION = 1


def _dump(obj, path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)
    Path(path).write_text(text + "\n")


def write_result(result: SolveResult, path, **meta) -> None:
    """Write ``result`` plus free-form metadata (model, seed, ...) as JSON."""
    _dump({"version": RECORD_VERSION, "result": result.to_dict(), "meta": meta}, path)


def read_result(path) -> tuple[SolveResult, dict]:
    """Load and re-validate a record written by :func:`write_result`."""
    d = json.loads(Path(path).read_text())
    if d.get("version") != RECORD_VERSION or "result" not in d:
        raise ValueError(f"{path}: not a result record")
    return SolveResult.from_dict(d["result"]), d.get("meta", {})


def write_lambda(est: LambdaEstimate, path, **meta) -> None:
    _dump({"version": RECORD_VERSION, "meta": meta, "lambda": {
        "value": float(est.value), "upper_bound": bool(est.upper_bound),
        "converged": bool(est.converged), "restarts": int(est.restarts),
        "residual": float(est.residual), "u": [float(v) for v in est.minimizer]}}, path)


def read_lambda(path) -> tuple[LambdaEstimate, dict]:
    d = json.loads(Path(path).read_text())
    lam = d["lambda"]
    est = LambdaEstimate(value=float(lam["value"]), minimizer=np.asarray(lam["u"], dtype=float),
                         upper_bound=bool(lam["upper_bound"]), converged=bool(lam["converged"]),
                         restarts=int(lam["restarts"]), residual=float(lam["residual"]))
    return est, d.get("meta", {})


def summary(result: SolveResult, title: str, mask=None) -> str:
    """Plain-text digest; ``mask`` limits the positivity ratio to the unknowns."""
    u = result.u if mask is None else result.u[np.asarray(mask, dtype=bool)]
    lines = [
        title,
        f"  energy             {result.energy!r}",
        f"  equation residual  {result.equation_residual:.3e}",
        f"  Nehari residual    {result.nehari_residual:.3e}",
        f"  iterations         {result.iterations}",
        f"  converged          {'yes' if result.converged else 'no'}",
        f"  min u / max u      {np.min(u) / np.max(np.abs(u)):.3e}"
        if np.any(u) else "  u                  identically zero",
    ]
    lines += [f"  note: {w}" for w in result.warnings]
    return "\n".join(lines)
