"""Shared fixtures-in-plain-code for the test suite.

Keeps the random instance generator in one place so the unit tests and the
acceptance gate exercise the exact same family.
"""

import os
import subprocess
import sys

import numpy as np

from luresim import (
    Box,
    DecomposedMovingSet,
    build_system,
    range_projector,
    scenario_dir,
)


def scenario_path(name):
    return os.path.join(scenario_dir(), name)


def run_cli(*args, env_extra=None, cwd=None):
    """Run the command line interface in a subprocess; returns CompletedProcess."""
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "luresim.cli", *[str(a) for a in args]],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


def random_box(rng, m, scale=1.0):
    """Random box in R^m with occasional infinite and pinned faces."""
    lower = np.empty(m)
    upper = np.empty(m)
    for i in range(m):
        lo = scale * rng.normal()
        width = abs(scale * rng.normal()) + 0.1 * scale
        roll = rng.random()
        if roll < 0.15:
            lower[i], upper[i] = -np.inf, lo
        elif roll < 0.30:
            lower[i], upper[i] = lo, np.inf
        elif roll < 0.35:
            lower[i] = upper[i] = lo
        else:
            lower[i], upper[i] = lo, lo + width
    return Box(lower, upper)


def random_psd(rng, m, rank=None):
    """Random PSD matrix of the given rank (possibly 0) plus a skew part."""
    if rank is None:
        rank = int(rng.integers(0, m + 1))
    g = rng.normal(size=(m, rank)) if rank else np.zeros((m, 1))
    d = g @ g.T
    if rng.random() < 0.4 and m > 1:
        w = rng.normal(size=(m, m))
        d = d + 0.3 * (w - w.T)
    return d


def random_step_instance(rng):
    """One random implicit-step problem over a box constraint.

    Two subfamilies, both solvable by construction:
    * 70%: B = C^T + Z * proj_rge(D + D^T) with D possibly rank deficient,
      so the multiplier mismatch lives in the range of D + D^T.
    * 30%: fully random B, C with D + D^T positive definite.
    The step size is shrunk until the reduced matrix M = h' C B + D has a
    positive definite symmetric part, which makes the variational problem
    uniquely solvable on every face pattern.
    """
    m = int(rng.integers(1, 4))
    n = int(rng.integers(m, 5))
    c = rng.normal(size=(m, n))
    while np.linalg.matrix_rank(c) < m:
        c = rng.normal(size=(m, n))
    if rng.random() < 0.7:
        d = random_psd(rng, m)
        z = rng.normal(size=(n, m))
        b = c.T + z @ range_projector(d + d.T)
    else:
        d = random_psd(rng, m, rank=m) + (0.1 + rng.random()) * np.eye(m)
        b = rng.normal(size=(n, m))
    box = random_box(rng, m)
    sys_ = build_system(
        b,
        c,
        d,
        DecomposedMovingSet(
            lambda t, _box=box: _box,
            np.zeros((m, n)),
            lambda t, _z=np.zeros(m): _z,
        ),
    )
    kappa = sys_.kappa
    h = 0.05
    for _ in range(40):
        hp = h / (1.0 - h * kappa)
        m_mat = hp * (c @ b) + d
        eigs = np.linalg.eigvalsh(0.5 * (m_mat + m_mat.T))
        if eigs[0] > 1e-10 * max(1.0, abs(eigs[-1])):
            break
        h *= 0.5
    else:
        raise AssertionError("step size calibration failed")
    x_prev = rng.normal(size=n)
    y_in = 1.5 * rng.normal(size=n)
    return sys_, 0.0, x_prev, y_in, h
