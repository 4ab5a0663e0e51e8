"""LSTM recurrence kernels over padded batches.

Two interchangeable implementations: numba-compiled loops and a vectorised
numpy reference. ``GAZEDEP_NUMBA=0`` in the environment forces the numpy
path; it is also used when numba cannot be imported.

Layout: ``xw`` is the precomputed input projection ``x @ Wx + b`` with shape
(B, T, 4H), gate order i, f, g, o. Sequence ``b`` occupies positions
``0 .. lengths[b]-1``; with ``reverse`` the recurrence runs right to left.
Padded positions are left at zero in every output.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("GAZEDEP_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_forward_numpy(xw, lengths, wh, reverse):
    B, T, G = xw.shape
    H = G // 4
    h = np.zeros((B, T, H))
    c = np.zeros((B, T, H))
    gates = np.zeros((B, T, G))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    rows = np.arange(B)
    for s in range(T):
        idx = rows[lengths > s]
        if idx.size == 0:
            break
        pos = lengths[idx] - 1 - s if reverse else np.full(idx.size, s)
        z = xw[idx, pos] + h_prev[idx] @ wh
        ig = _sigmoid(z[:, :H])
        fg = _sigmoid(z[:, H:2 * H])
        gg = np.tanh(z[:, 2 * H:3 * H])
        og = _sigmoid(z[:, 3 * H:])
        cn = fg * c_prev[idx] + ig * gg
        hn = og * np.tanh(cn)
        gates[idx, pos] = np.concatenate((ig, fg, gg, og), axis=1)
        c[idx, pos] = cn
        h[idx, pos] = hn
        c_prev[idx] = cn
        h_prev[idx] = hn
    return h, c, gates


def lstm_backward_numpy(dh_out, h, c, gates, lengths, wh, reverse):
    B, T, G = gates.shape
    H = G // 4
    dxw = np.zeros((B, T, G))
    dwh = np.zeros_like(wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    rows = np.arange(B)
    for s in range(T - 1, -1, -1):
        idx = rows[lengths > s]
        if idx.size == 0:
            continue
        pos = lengths[idx] - 1 - s if reverse else np.full(idx.size, s)
        g4 = gates[idx, pos]
        ig, fg, gg, og = g4[:, :H], g4[:, H:2 * H], g4[:, 2 * H:3 * H], g4[:, 3 * H:]
        tc = np.tanh(c[idx, pos])
        dh = dh_out[idx, pos] + dh_next[idx]
        dc = dc_next[idx] + dh * og * (1.0 - tc * tc)
        if s > 0:
            prev = pos + 1 if reverse else pos - 1
            c_prev = c[idx, prev]
            h_prev = h[idx, prev]
        else:
            c_prev = np.zeros((idx.size, H))
            h_prev = np.zeros((idx.size, H))
        dz = np.concatenate(
            (
                dc * gg * ig * (1.0 - ig),
                dc * c_prev * fg * (1.0 - fg),
                dc * ig * (1.0 - gg * gg),
                dh * tc * og * (1.0 - og),
            ),
            axis=1,
        )
        dxw[idx, pos] = dz
        dwh += h_prev.T @ dz
        dh_next[idx] = dz @ wh.T
        dc_next[idx] = dc * fg
    return dxw, dwh


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _sig(x):
        return 0.5 * (np.tanh(0.5 * x) + 1.0)

    @numba.njit(cache=True)
    def _positions(lengths, s, reverse, active, pos):
        """Rows still running at step ``s`` and the time index each of them is at."""
        m = 0
        for b in range(lengths.shape[0]):
            if lengths[b] > s:
                active[m] = b
                pos[m] = lengths[b] - 1 - s if reverse else s
                m += 1
        return m

    @numba.njit(cache=True)
    def lstm_forward_numba(xw, lengths, wh, reverse):
        B, T, G = xw.shape
        H = G // 4
        h = np.zeros((B, T, H))
        c = np.zeros((B, T, H))
        gates = np.zeros((B, T, G))
        h_prev = np.zeros((B, H))
        c_prev = np.zeros((B, H))
        z = np.empty((B, G))
        active = np.empty(B, np.int64)
        pos = np.empty(B, np.int64)
        for s in range(T):
            m = _positions(lengths, s, reverse, active, pos)
            if m == 0:
                break
            for r in range(m):
                z[r, :] = xw[active[r], pos[r], :]
            if s > 0:
                # all rows share each row of wh while it is in cache
                for j in range(H):
                    for r in range(m):
                        hj = h_prev[active[r], j]
                        for k in range(G):
                            z[r, k] += hj * wh[j, k]
            for r in range(m):
                b, t = active[r], pos[r]
                for j in range(H):
                    ig = _sig(z[r, j])
                    fg = _sig(z[r, H + j])
                    gg = np.tanh(z[r, 2 * H + j])
                    og = _sig(z[r, 3 * H + j])
                    cn = fg * c_prev[b, j] + ig * gg
                    hn = og * np.tanh(cn)
                    c[b, t, j] = cn
                    h[b, t, j] = hn
                    c_prev[b, j] = cn
                    h_prev[b, j] = hn
                    gates[b, t, j] = ig
                    gates[b, t, H + j] = fg
                    gates[b, t, 2 * H + j] = gg
                    gates[b, t, 3 * H + j] = og
        return h, c, gates

    @numba.njit(cache=True)
    def lstm_backward_numba(dh_out, h, c, gates, lengths, wh, reverse):
        B, T, G = gates.shape
        H = G // 4
        dxw = np.zeros((B, T, G))
        dwh = np.zeros(wh.shape)
        wht = np.ascontiguousarray(wh.T)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        dz = np.empty((B, G))
        active = np.empty(B, np.int64)
        pos = np.empty(B, np.int64)
        for s in range(T - 1, -1, -1):
            m = _positions(lengths, s, reverse, active, pos)
            if m == 0:
                continue
            for r in range(m):
                b, t = active[r], pos[r]
                prev = (t + 1 if reverse else t - 1) if s > 0 else -1
                for j in range(H):
                    ig = gates[b, t, j]
                    fg = gates[b, t, H + j]
                    gg = gates[b, t, 2 * H + j]
                    og = gates[b, t, 3 * H + j]
                    tc = np.tanh(c[b, t, j])
                    dh = dh_out[b, t, j] + dh_next[b, j]
                    dc = dc_next[b, j] + dh * og * (1.0 - tc * tc)
                    cp = c[b, prev, j] if prev >= 0 else 0.0
                    dz[r, j] = dc * gg * ig * (1.0 - ig)
                    dz[r, H + j] = dc * cp * fg * (1.0 - fg)
                    dz[r, 2 * H + j] = dc * ig * (1.0 - gg * gg)
                    dz[r, 3 * H + j] = dh * tc * og * (1.0 - og)
                    dc_next[b, j] = dc * fg
                dxw[b, t, :] = dz[r, :]
                dh_next[b, :] = 0.0
            for k in range(G):
                for r in range(m):
                    dk = dz[r, k]
                    b = active[r]
                    for j in range(H):
                        dh_next[b, j] += dk * wht[k, j]
            if s > 0:
                for j in range(H):
                    for r in range(m):
                        prev = pos[r] + 1 if reverse else pos[r] - 1
                        hj = h[active[r], prev, j]
                        for k in range(G):
                            dwh[j, k] += hj * dz[r, k]
        return dxw, dwh


def lstm_forward(xw, lengths, wh, reverse):
    xw = np.ascontiguousarray(xw, dtype=np.float64)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    wh = np.ascontiguousarray(wh, dtype=np.float64)
    if USE_NUMBA:
        return lstm_forward_numba(xw, lengths, wh, bool(reverse))
    return lstm_forward_numpy(xw, lengths, wh, bool(reverse))


def lstm_backward(dh_out, h, c, gates, lengths, wh, reverse):
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (dh_out, h, c, gates)]
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    wh = np.ascontiguousarray(wh, dtype=np.float64)
    if USE_NUMBA:
        return lstm_backward_numba(*args, lengths, wh, bool(reverse))
    return lstm_backward_numpy(*args, lengths, wh, bool(reverse))
