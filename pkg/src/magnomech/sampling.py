"""Deterministic sample generation for checks.

Configuration points come from an unscrambled Sobol sequence over the
scenario's box (seed independent); momentum components come from a seeded
generator so --seed pins the whole sample set.
"""

import math

import numpy as np
from scipy.stats import qmc

from .errors import NumericalDomainError
from .geometry import PhasePoint
from .nonholonomic import project_to_constraint


def sobol_points(box, count):
    """``count`` low-discrepancy points inside the per-coordinate box."""
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    exponent = max(1, math.ceil(math.log2(max(count, 1))))
    raw = qmc.Sobol(d=n, scramble=False).random_base2(m=exponent)[:count]
    return box[:, 0] + raw * (box[:, 1] - box[:, 0])


def config_samples(box, count):
    return [q for q in sobol_points(box, count)]


def phase_samples(box, count, rng, p_scale=1.0):
    qs = sobol_points(box, count)
    ps = rng.uniform(-p_scale, p_scale, size=qs.shape)
    return [PhasePoint(q, p) for q, p in zip(qs, ps)]


def surface_phase_samples(dist, ham, box, count, rng, p_scale=1.0):
    """Phase samples projected onto the constraint surface."""
    return [project_to_constraint(dist, ham, z)
            for z in phase_samples(box, count, rng, p_scale)]


def newton_preimage(phase_map, target, start=None, tol=1e-12, max_iter=25):
    """Solve phase_map(z) = target with Newton iteration.

    Shipped phase maps are translations, for which one step is exact, but
    the iteration handles any smooth invertible map with a decent start.
    """
    vec = (target.vec if start is None else start.vec).copy()
    for _ in range(max_iter):
        z = PhasePoint.from_vec(vec)
        defect = phase_map.value(z).vec - target.vec
        if np.max(np.abs(defect)) < tol:
            return z
        jac = phase_map.jacobian(z)
        try:
            vec = vec - np.linalg.solve(jac, defect)
        except np.linalg.LinAlgError:
            raise NumericalDomainError("phase map Jacobian is singular") from None
    raise NumericalDomainError("preimage iteration did not converge")
