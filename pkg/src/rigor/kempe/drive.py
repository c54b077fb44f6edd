"""Driving a mechanism by prescribing its input bars."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from ..flexsim import ProjectionError, project_to_manifold
from ..rigidity import NULL_TOL, dense_rigidity, null_count

MAX_ANGLE_STEP = 0.02


class DriveError(RuntimeError):
    pass


@dataclass
class Mechanism:
    """Edges plus which vertices are fixed and which are driven.

    ``inputs`` maps an input name to (vertex, radius); the vertex is placed
    at radius * (cos a, sin a) about ``hub`` when the input angle is a.
    """

    edges: np.ndarray
    lengths: np.ndarray
    fixed: Tuple[int, ...]
    inputs: Dict[str, Tuple[int, float]]
    hub: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        self.lengths = np.asarray(self.lengths, dtype=float)

    @property
    def pinned(self) -> Tuple[int, ...]:
        return tuple(self.fixed) + tuple(v for v, _ in self.inputs.values())

    def place_inputs(self, pos: np.ndarray, angles: Dict[str, float]) -> np.ndarray:
        out = pos.copy()
        h = pos[self.hub]
        for name, (v, r) in self.inputs.items():
            a = angles[name]
            out[v] = h + r * np.array([math.cos(a), math.sin(a)])
        return out

    def _free_cols(self, n):
        keep = np.ones(2 * n, dtype=bool)
        for v in self.pinned:
            keep[2 * v : 2 * v + 2] = False
        return keep

    def residual(self, pos: np.ndarray) -> float:
        d = np.linalg.norm(pos[self.edges[:, 0]] - pos[self.edges[:, 1]], axis=1)
        return float(np.abs(d - self.lengths).max(initial=0.0))

    def free_nullity(self, pos: np.ndarray, tol: float = NULL_TOL) -> int:
        """Dimension of the flexes left once fixed and driven vertices are pinned."""
        R = dense_rigidity(pos, self.edges)[:, self._free_cols(len(pos))]
        if R.shape[1] == 0:
            return 0
        s = np.linalg.svd(R, compute_uv=False)
        full = np.zeros(R.shape[1])
        full[: min(len(s), R.shape[1])] = s[: R.shape[1]]
        return null_count(np.concatenate([full, [np.abs(R).max()]]), tol)

    def step(self, pos: np.ndarray, angles: Dict[str, float], proj_tol: float = 1e-12) -> np.ndarray:
        """One predictor-corrector move to the given input angles."""
        target = self.place_inputs(pos, angles)
        delta = (target - pos).ravel()
        keep = self._free_cols(len(pos))
        R = dense_rigidity(pos, self.edges)
        rhs = -R[:, ~keep] @ delta[~keep]
        sol = np.linalg.lstsq(R[:, keep], rhs, rcond=None)[0]
        pred = target.copy().ravel()
        pred[keep] += sol
        pins = list(self.fixed) + [v for v, _ in self.inputs.values()]
        try:
            return project_to_manifold(pred.reshape(-1, 2), self.edges, self.lengths, pins, proj_tol)
        except ProjectionError as e:
            raise DriveError(f"projection failed while driving to {angles}: {e}") from None

    def drive(self, pos: np.ndarray, start: Dict[str, float], end: Dict[str, float], max_step: float = MAX_ANGLE_STEP, proj_tol: float = 1e-12) -> np.ndarray:
        """Move the inputs from ``start`` to ``end`` in small angle increments."""
        span = max(abs(end[k] - start[k]) for k in self.inputs) if self.inputs else 0.0
        n = max(1, int(math.ceil(span / max_step)))
        p = pos
        for i in range(1, n + 1):
            lam = i / n
            p = self.step(p, {k: start[k] + lam * (end[k] - start[k]) for k in self.inputs}, proj_tol)
        return p


def angle_of(pos: np.ndarray, v: int, hub: int = 0, near: float = 0.0) -> float:
    """Polar angle of v about the hub, unwrapped to lie within pi of ``near``."""
    d = pos[v] - pos[hub]
    a = math.atan2(d[1], d[0])
    return a + 2 * math.pi * round((near - a) / (2 * math.pi))


def sweep(mech: Mechanism, pos0: np.ndarray, ref: Dict[str, float], samples: Sequence[Dict[str, float]], max_step: float = MAX_ANGLE_STEP):
    """Visit ``samples`` in order starting from the configuration at ``ref``.

    Yields (angles, positions) pairs; the walk is continuous so each
    sample is reached on the branch of the reference configuration.
    """
    p, cur = pos0, dict(ref)
    for s in samples:
        p = mech.drive(p, cur, s, max_step)
        cur = dict(s)
        yield s, p
