"""Compiled simulation kernels.

Random numbers are a pure function of (seed, path, step): every path owns a
key, and the draws for step k live in the counter block [k*256, k*256 + 256)
of that key. Slot 0 of each block is the uniform used by the bridge
correction, the rest feed a 256-layer ziggurat normal sampler. No state is
shared between paths, so the chunking of paths over threads cannot change
any result.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_R = 3.6541528853610088
_V = 0.00492867323399
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_BLOCK = 8  # log2 of counter slots per step


def _ziggurat_tables():
    f = lambda v: math.exp(-0.5 * v * v)  # noqa: E731
    x = np.zeros(257)
    x[0] = _V / f(_R)
    x[1] = _R
    for i in range(1, 255):
        x[i + 1] = math.sqrt(-2.0 * math.log(_V / x[i] + f(x[i])))
    x[256] = 0.0
    return x, np.exp(-0.5 * x * x)


ZX, ZFX = _ziggurat_tables()


@nb.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def _u01(bits):
    # 53 random bits -> [0, 1)
    return np.int64(bits >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(inline="always")
def path_key(seed, p):
    return mix64(np.uint64(seed) + mix64(np.uint64(p) + _GAMMA))


@nb.njit(inline="always")
def uniform_at(key, k):
    j = np.uint64(k) << np.uint64(_BLOCK)
    return _u01(mix64(key + j * _GAMMA))


@nb.njit(inline="always")
def normal_at(key, k, X, FX):
    j = np.uint64(k) << np.uint64(_BLOCK)
    while True:
        j += np.uint64(1)
        bits = mix64(key + j * _GAMMA)
        i = np.int64(bits & np.uint64(0xFF))
        neg = (bits & np.uint64(0x100)) != np.uint64(0)
        x = np.int64(bits >> np.uint64(12)) * (1.0 / 4503599627370496.0) * X[i]
        if x < X[i + 1]:
            return -x if neg else x
        if i == 0:
            while True:
                j += np.uint64(1)
                a = -math.log(1.0 - _u01(mix64(key + j * _GAMMA))) / _R
                j += np.uint64(1)
                c = -math.log(1.0 - _u01(mix64(key + j * _GAMMA)))
                if c + c > a * a:
                    return -(_R + a) if neg else _R + a
        j += np.uint64(1)
        y = FX[i + 1] + _u01(mix64(key + j * _GAMMA)) * (FX[i] - FX[i + 1])
        if y < math.exp(-0.5 * x * x):
            return -x if neg else x


@nb.njit(cache=True)
def normals(seed, p, n, X, FX):
    key = path_key(seed, p)
    out = np.empty(n)
    for k in range(n):
        out[k] = normal_at(key, k, X, FX)
    return out


@nb.njit(inline="always")
def _crossed(key, k, x_old, x_new, s2dt):
    # Brownian bridge: P(hit 0 inside the step | both endpoints positive).
    # exp underflows to exactly 0 beyond 745, so skipping it changes nothing.
    a = 2.0 * x_old * x_new / s2dt
    if a > 745.2:
        return False
    return uniform_at(key, k) < math.exp(-a)


@nb.njit(cache=True)
def path_kernel(x0, b, rate, mu, sigma, dt, n_steps, seed, p, bridge, X, FX):
    """One path: surplus at grid points (frozen at 0 after ruin), paid rates, ruin step or -1."""
    key = path_key(seed, p)
    sq = sigma * math.sqrt(dt)
    s2dt = sigma * sigma * dt
    xs = np.zeros(n_steps + 1)
    pay = np.zeros(n_steps)
    xs[0] = x0
    x = x0
    ruin = -1
    if x <= 0.0:
        return xs, pay, 0
    for k in range(n_steps):
        pi = rate if x >= b else 0.0
        pay[k] = pi
        xn = x + (mu - pi) * dt + sq * normal_at(key, k, X, FX)
        if xn <= 0.0 or (bridge and _crossed(key, k, x, xn, s2dt)):
            ruin = k + 1
            break
        x = xn
        xs[k + 1] = x
    return xs, pay, ruin


@nb.njit(nogil=True, cache=True)
def value_kernel(x0, b, rate, mu, sigma, dt, h, seed, p0, out, bridge, X, FX):
    """out[i] = sum_k h[k] pi(X_k) dt for paths p0 .. p0 + len(out) - 1."""
    sq = sigma * math.sqrt(dt)
    s2dt = sigma * sigma * dt
    n_steps = h.shape[0]
    for i in range(out.shape[0]):
        key = path_key(seed, p0 + i)
        x = x0
        acc = 0.0
        if x > 0.0:
            for k in range(n_steps):
                if x >= b:
                    acc += h[k]
                    xn = x + (mu - rate) * dt + sq * normal_at(key, k, X, FX)
                else:
                    xn = x + mu * dt + sq * normal_at(key, k, X, FX)
                if xn <= 0.0 or (bridge and _crossed(key, k, x, xn, s2dt)):
                    break
                x = xn
        out[i] = acc * rate * dt


@nb.njit(nogil=True, cache=True)
def spike_kernel(x0, b, M, l, n_eps, mu, sigma, dt, h, seed, p0, out, open_at_end, bridge, X, FX):
    """Per-path discounted dividend difference (equilibrium arm minus spike arm).

    Both arms see the same normals. While both are alive their surplus differ
    by dt (nl l + nM M) with integer counters, so the moment the two paths
    coincide is detected exactly and the remaining (identical) future is
    skipped. After one arm is ruined the other continues on its own.
    """
    sq = sigma * math.sqrt(dt)
    s2dt = sigma * sigma * dt
    n_steps = h.shape[0]
    for i in range(out.shape[0]):
        key = path_key(seed, p0 + i)
        xa = x0
        xb = x0
        alive_a = x0 > 0.0
        alive_b = x0 > 0.0
        coupled = True  # xb is derived from xa and the counters
        nl = 0
        nm = 0
        acc = 0.0
        for k in range(n_steps):
            if not (alive_a or alive_b):
                break
            if coupled and k >= n_eps and nl * l + nm * M == 0.0:
                break
            pa = M if (alive_a and xa >= b) else 0.0
            if k < n_eps:
                pb = l if alive_b else 0.0
            else:
                pb = M if (alive_b and xb >= b) else 0.0
            acc += h[k] * (pa - pb)
            z = sq * normal_at(key, k, X, FX)
            xa_new = xa
            xb_new = xb
            if alive_a:
                xa_new = xa + (mu - pa) * dt + z
            if coupled:
                if k < n_eps:
                    nl += 1
                if pa > 0.0:
                    nm -= 1
                if pb == M and k >= n_eps:
                    nm += 1
                xb_new = xa_new - dt * (nl * l + nm * M)
            elif alive_b:
                xb_new = xb + (mu - pb) * dt + z
            if alive_a:
                if xa_new <= 0.0 or (bridge and _crossed(key, k, xa, xa_new, s2dt)):
                    alive_a = False
                    coupled = False
                else:
                    xa = xa_new
            if alive_b:
                if xb_new <= 0.0 or (bridge and _crossed(key, k, xb, xb_new, s2dt)):
                    alive_b = False
                    coupled = False
                else:
                    xb = xb_new
        else:
            if (alive_a or alive_b) and not (coupled and nl * l + nm * M == 0.0):
                open_at_end[i] = True
        out[i] = acc * dt
