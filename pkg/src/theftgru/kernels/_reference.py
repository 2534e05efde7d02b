"""Pure-numpy GRU recurrence kernels (fallback for the compiled ``_gru``).

Both backends share one calling convention. Gate weights are stacked in
column blocks ``[z | r | h]``:

    xu  (T, B, 3N)  input projections x_t @ U + b, precomputed for all steps
    W   (N, 3N)     recurrent weights
    s0  (B, N)      initial state

Only the sequential part of the layer lives here; input projections and
weight gradients are single large matmuls done by the caller.
"""

import numpy as np
from scipy.special import expit

SIGMOID, RELU, HARD_SIGMOID, TANH = 0, 1, 2, 3


def gate(kind, a):
    """Gate value and its derivative w.r.t. the pre-activation."""
    if kind == SIGMOID:
        g = expit(a)
        return g, g * (1.0 - g)
    if kind == TANH:
        g = np.tanh(a)
        return g, 1.0 - g * g
    if kind == RELU:
        return np.maximum(a, 0.0), (a > 0).astype(a.dtype)
    if kind == HARD_SIGMOID:
        g = np.clip(0.2 * a + 0.5, 0.0, 1.0)
        return g, np.where((a > -2.5) & (a < 2.5), 0.2, 0.0)
    raise ValueError(f"unknown gate activation code {kind}")


def gru_forward(xu, W, s0, kind):
    T, B, N3 = xu.shape
    N = N3 // 3
    Wzr, Wh = W[:, :2 * N], W[:, 2 * N:]
    S = np.empty((T + 1, B, N))
    S[0] = s0
    Z, R, H, GZ, GR = (np.empty((T, B, N)) for _ in range(5))
    for t in range(T):
        s = S[t]
        g, dg = gate(kind, xu[t, :, :2 * N] + s @ Wzr)
        z, r = g[:, :N], g[:, N:]
        h = np.tanh(xu[t, :, 2 * N:] + (s * r) @ Wh)
        S[t + 1] = h + z * (s - h)
        Z[t], R[t], H[t] = z, r, h
        GZ[t], GR[t] = dg[:, :N], dg[:, N:]
    return S, Z, R, H, GZ, GR


def gru_backward(dS, S, Z, R, H, GZ, GR, W):
    """Back-propagate state gradients ``dS`` (T, B, N) through time.

    Returns the pre-activation gradients (T, B, 3N) and the gradient on s0.
    """
    T, B, N = dS.shape
    Wzr, Wh = W[:, :2 * N], W[:, 2 * N:]
    dA = np.empty((T, B, 3 * N))
    ds = np.zeros((B, N))
    for t in range(T - 1, -1, -1):
        ds = ds + dS[t]
        s, z, r, h = S[t], Z[t], R[t], H[t]
        dah = ds * (1.0 - z) * (1.0 - h * h)
        q = dah @ Wh.T
        dA[t, :, :N] = ds * (s - h) * GZ[t]
        dA[t, :, N:2 * N] = q * s * GR[t]
        dA[t, :, 2 * N:] = dah
        ds = ds * z + q * r + dA[t, :, :2 * N] @ Wzr.T
    return dA, ds
