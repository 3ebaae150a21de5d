"""Default numerical tolerances and the MAGNOMECH_TOL_SCALE override.

Every verdict-level comparison goes through a Tolerances instance so that a
single environment variable can widen all thresholds on platforms with
different float behaviour. Scenario files may override individual entries.
"""

import os

DEFAULTS = {
    # hypothesis residual above which a theorem check is VACUOUS
    "hypothesis": 1e-8,
    # Type I equation residual for a PASS verdict
    "equation": 1e-7,
    # Type II residuals below this count as zero; band extends to 10x
    "status": 1e-7,
    # smallest singular value of the restricted form for compatibility
    "compat_sigma": 1e-8,
    # constraint residual treated as "on the surface"
    "constraint": 1e-8,
    # post-projection constraint residual
    "projection": 1e-12,
    # linear solve residual guard
    "solver": 1e-10,
    # invariance of declared cyclic data
    "invariance": 1e-9,
    # lift independence of reduced quantities
    "lift": 1e-10,
    # pushforward/reduced field agreement
    "related": 1e-8,
    # membership of vectors in computed subspaces
    "membership": 1e-10,
}

ENV_VAR = "MAGNOMECH_TOL_SCALE"
STATUS_BAND_FACTOR = 10.0


def env_scale():
    raw = os.environ.get(ENV_VAR)
    if raw is None:
        return 1.0
    try:
        value = float(raw)
    except ValueError:
        return 1.0
    return value if value > 0 else 1.0


class Tolerances:
    """Lookup of named tolerances with optional per-scenario overrides."""

    def __init__(self, overrides=None):
        self._values = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            self._values[key] = float(value)

    def get(self, name):
        return self._values[name] * env_scale()

    def as_dict(self):
        scale = env_scale()
        return {k: v * scale for k, v in self._values.items()}


DEFAULT_TOLERANCES = Tolerances()
