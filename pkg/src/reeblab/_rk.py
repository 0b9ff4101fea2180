"""Batched Dormand-Prince 5(4) integrator with post-step projection.

States are arrays of shape ``(n, d)``; step control uses the worst member of
the batch, so every member shares the same time grid. This keeps the
integrator deterministic and lets callers flow whole point clouds at once.
"""

from __future__ import annotations

import numpy as np

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    """Raised when the step size underflows; carries the last accepted state."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


def _step(f, t, y, h, k1):
    ks = [k1]
    for i in range(1, 7):
        dy = sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
        ks.append(f(t + _C[i] * h, y + h * dy))
    y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y_new, err, ks[-1]


def integrate(f, y0, times, rtol=1e-10, atol=1e-10, project=None, h0=None,
              max_steps=1_000_000):
    """Integrate ``y' = f(t, y)`` and return the states at ``times``.

    Parameters
    ----------
    f : callable
        ``f(t, y)`` with ``y`` of shape ``(n, d)``, returning the same shape.
    y0 : array_like
        Initial states, shape ``(n, d)`` (or ``(d,)`` for a single state).
    times : array_like
        Output times, monotone (increasing or decreasing), starting anywhere;
        integration starts at ``times[0]`` from ``y0``.
    project : callable, optional
        Applied to every accepted state, e.g. orthogonal projection back to a
        constraint set.

    Returns
    -------
    ndarray of shape ``(len(times), n, d)`` (or ``(len(times), d)``).
    """
    y = np.array(y0, dtype=float)
    single = y.ndim == 1
    if single:
        y = y[None, :]
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    if len(times) == 1:
        return out[:, 0] if single else out

    direction = np.sign(times[-1] - times[0]) or 1.0
    if np.any(direction * np.diff(times) < 0):
        raise ValueError("output times must be monotone")

    t = times[0]
    span = abs(times[-1] - times[0])
    h = abs(h0) if h0 else min(0.01 * span, 0.05) or 1e-3
    k1 = f(t, y)
    steps = 0
    for j in range(1, len(times)):
        target = times[j]
        while direction * (target - t) > 0:
            if steps >= max_steps:
                raise IntegrationError("step budget exhausted", t, y)
            remaining = abs(target - t)
            hs = min(h, remaining)
            last = hs == remaining
            y_new, err, k_last = _step(f, t, y, direction * hs, k1)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            norm = np.max(np.sqrt(np.mean((err / scale) ** 2, axis=-1)))
            if not np.isfinite(norm):
                norm = np.inf
            if norm <= 1.0:
                t = target if last else t + direction * hs
                if project is not None:
                    y_new = project(y_new)
                    k_last = f(t, y_new)
                y, k1 = y_new, k_last
                steps += 1
                factor = _MAX_FACTOR if norm == 0 else min(
                    _MAX_FACTOR, _SAFETY * norm ** -0.2)
                if not last:
                    h = hs * factor
                else:
                    h = max(h, hs * min(factor, 1.0))
            else:
                h = hs * max(_MIN_FACTOR, _SAFETY * norm ** -0.2)
                if h < 1e-14 * max(1.0, abs(t)):
                    raise IntegrationError("step size underflow", t, y)
        out[j] = y
    return out[:, 0] if single else out
