"""Compiled inner loops for surrogate training.

The adversarial and energy-score trainers take tens of thousands of small
optimiser steps per fit; doing each step through numpy calls is dominated by
interpreter overhead on this problem size. These kernels run one full epoch
per call with the same update math as the pure-numpy formulation in
:mod:`wugo.neural`. All randomness is pre-drawn by the caller from its numpy
generator, so results stay reproducible from the run seed alone.

The hidden activation uses a clamped rational minimax approximation of tanh
(error below 1e-7); libm tanh is an order of magnitude slower inside the
compiled loops and the training dynamics are indistinguishable.

Parameter vectors are the flat layout used by :class:`wugo.neural.Mlp`:
``[w1.ravel(), b1, w2.ravel(), b2]``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Rational tanh approximation (numerator odd / denominator even polynomials).
_A1 = 4.89352455891786e-03
_A3 = 6.37261928875436e-04
_A5 = 1.48572235717979e-05
_A7 = 5.12229709037114e-08
_A9 = -8.60467152213735e-11
_A11 = 2.00018790482477e-13
_A13 = -2.76076847742355e-16
_B0 = 4.89352518554385e-03
_B2 = 2.26843463243900e-03
_B4 = 1.18534705686654e-04
_B6 = 1.19825839466702e-06


@njit(cache=True, inline="always", fastmath=True)
def _ftanh(x):
    if x > 9.0:
        return 1.0
    if x < -9.0:
        return -1.0
    x2 = x * x
    p = x * (
        _A1 + x2 * (_A3 + x2 * (_A5 + x2 * (_A7 + x2 * (_A9 + x2 * (_A11 + x2 * _A13)))))
    )
    q = _B0 + x2 * (_B2 + x2 * (_B4 + x2 * _B6))
    return p / q


@njit(cache=True, inline="always", fastmath=True)
def _adam_flat(t, m, v, p, g, lr, wd):
    b1, b2, eps = 0.9, 0.999, 1e-8
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for i in range(p.size):
        m[i] += (1.0 - b1) * (g[i] - m[i])
        v[i] += (1.0 - b2) * (g[i] * g[i] - v[i])
        p[i] -= lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)
        if wd > 0.0:
            p[i] -= lr * wd * p[i]


@njit(cache=True, inline="always", fastmath=True)
def _affine_tanh(x, w, b, out):
    # out = ftanh(x @ w.T + b), all preshaped
    u = np.dot(x, w.T)
    for r in range(out.shape[0]):
        for k in range(out.shape[1]):
            out[r, k] = _ftanh(u[r, k] + b[k])


@njit(cache=True, fastmath=True)
def wgan_epoch(
    gp, gm, gv,            # generator params / Adam moments (flat)
    dp, dm, dv,            # critic params / Adam moments (flat)
    counters,              # int64[2]: Adam step counts (gen, critic)
    latent, hidden, m_dim, # architecture
    cond_all, y_all,       # (P, m), (P,)
    idx_mat,               # (steps, bs) batch indices
    z_crit, u_gp, z_gen,   # (steps, nc, bs, L), (steps, nc, bs), (steps, bs, L)
    lr, lam, wd,
    avg_sum,               # flat accumulator for the generator average
    accumulate,            # add generator params after each generator step
):
    """One training epoch: for every batch, ``nc`` critic updates then one
    generator update. Returns the number of generator snapshots accumulated."""
    li = latent + m_dim
    di = 1 + m_dim
    h = hidden

    gw1 = gp[: h * li].reshape(h, li)
    gb1 = gp[h * li : h * li + h]
    gw2 = gp[h * li + h : h * li + 2 * h]
    gb2 = gp[h * li + 2 * h :]
    dw1 = dp[: h * di].reshape(h, di)
    db1 = dp[h * di : h * di + h]
    dw2 = dp[h * di + h : h * di + 2 * h]
    db2 = dp[h * di + 2 * h :]

    steps, nc, bs = z_crit.shape[0], z_crit.shape[1], z_crit.shape[2]
    ggrad = np.empty(gp.size)
    dgrad = np.empty(dp.size)
    gin = np.empty((bs, li))
    cin = np.empty((2 * bs, di))
    pin = np.empty((bs, di))
    t1 = np.empty((bs, h))
    tc = np.empty((2 * bs, h))
    tp = np.empty((bs, h))
    duT = np.empty((h, 2 * bs))
    epT = np.empty((h, bs))
    fake = np.empty(bs)
    snapshots = 0

    for s in range(steps):
        idx = idx_mat[s]
        for r in range(bs):
            for c in range(m_dim):
                gin[r, latent + c] = cond_all[idx[r], c]
                cin[r, 1 + c] = cond_all[idx[r], c]
                cin[bs + r, 1 + c] = cond_all[idx[r], c]
                pin[r, 1 + c] = cond_all[idx[r], c]
            cin[bs + r, 0] = y_all[idx[r]]

        for j in range(nc):
            # generator forward for this critic step's fakes
            for r in range(bs):
                for c in range(latent):
                    gin[r, c] = z_crit[s, j, r, c]
            _affine_tanh(gin, gw1, gb1, t1)
            for r in range(bs):
                acc = gb2[0]
                for k in range(h):
                    acc += t1[r, k] * gw2[k]
                fake[r] = acc
                cin[r, 0] = acc
                u = u_gp[s, j, r]
                pin[r, 0] = u * y_all[idx[r]] + (1.0 - u) * acc

            # critic W-loss gradients on the stacked fake/real batch
            _affine_tanh(cin, dw1, db1, tc)
            dgrad[:] = 0.0
            dW1 = dgrad[: h * di].reshape(h, di)
            dB1 = dgrad[h * di : h * di + h]
            dW2 = dgrad[h * di + h : h * di + 2 * h]
            dB2 = dgrad[h * di + 2 * h :]
            for r in range(2 * bs):
                go = 1.0 / bs if r < bs else -1.0 / bs
                dB2[0] += go
                for k in range(h):
                    trk = tc[r, k]
                    dW2[k] += go * trk
                    w = go * dw2[k] * (1.0 - trk * trk)
                    duT[k, r] = w
                    dB1[k] += w
            dW1 += np.dot(duT, cin)

            # gradient penalty at interpolates
            _affine_tanh(pin, dw1, db1, tp)
            for r in range(bs):
                g_r = 0.0
                for k in range(h):
                    g_r += (1.0 - tp[r, k] * tp[r, k]) * dw2[k] * dw1[k, 0]
                absg = abs(g_r)
                sgn = 1.0 if g_r > 0.0 else (-1.0 if g_r < 0.0 else 0.0)
                q = (2.0 * lam / bs) * (absg - 1.0) * sgn
                for k in range(h):
                    tpk = tp[r, k]
                    sk = 1.0 - tpk * tpk
                    epT[k, r] = q * tpk * sk
                    qsk = q * sk
                    dW2[k] += dw1[k, 0] * qsk
                    dW1[k, 0] += dw2[k] * qsk
            pen = np.dot(epT, pin)
            for k in range(h):
                coef = -2.0 * dw2[k] * dw1[k, 0]
                esum = 0.0
                for r in range(bs):
                    esum += epT[k, r]
                dB1[k] += coef * esum
                for c in range(di):
                    dW1[k, c] += coef * pen[k, c]

            counters[1] += 1
            _adam_flat(counters[1], dm, dv, dp, dgrad, lr, wd)

        # generator step: maximise critic score of fresh fakes
        for r in range(bs):
            for c in range(latent):
                gin[r, c] = z_gen[s, r, c]
        _affine_tanh(gin, gw1, gb1, t1)
        for r in range(bs):
            acc = gb2[0]
            for k in range(h):
                acc += t1[r, k] * gw2[k]
            pin[r, 0] = acc
        _affine_tanh(pin, dw1, db1, tp)

        ggrad[:] = 0.0
        gW1 = ggrad[: h * li].reshape(h, li)
        gB1 = ggrad[h * li : h * li + h]
        gW2 = ggrad[h * li + h : h * li + 2 * h]
        gB2 = ggrad[h * li + 2 * h :]
        for r in range(bs):
            dresp = 0.0
            for k in range(h):
                dresp += (1.0 - tp[r, k] * tp[r, k]) * dw2[k] * dw1[k, 0]
            go = -dresp / bs
            gB2[0] += go
            for k in range(h):
                trk = t1[r, k]
                gW2[k] += go * trk
                epT[k, r] = go * gw2[k] * (1.0 - trk * trk)
                gB1[k] += epT[k, r]
        gW1 += np.dot(epT, gin)

        counters[0] += 1
        _adam_flat(counters[0], gm, gv, gp, ggrad, lr, wd)
        if accumulate:
            for i in range(gp.size):
                avg_sum[i] += gp[i]
            snapshots += 1
    return snapshots


@njit(cache=True, fastmath=True)
def energy_epoch(
    gp, gm, gv, counters,          # generator params, moments, int64[1]
    latent, hidden, m_dim,
    cond_entries,                  # (K, m) normalised design points
    values_flat, offsets,          # concatenated sorted per-entry values
    entry_seq,                     # (steps,) entry index per step
    z_all,                         # (steps, bs, L)
    lr, wd,
    avg_sum,
    accumulate,
):
    """One epoch of energy-score training: each step generates a batch for one
    entry and descends the U-statistic squared energy distance."""
    li = latent + m_dim
    h = hidden
    gw1 = gp[: h * li].reshape(h, li)
    gb1 = gp[h * li : h * li + h]
    gw2 = gp[h * li + h : h * li + 2 * h]
    gb2 = gp[h * li + 2 * h :]

    steps, bs = z_all.shape[0], z_all.shape[1]
    gin = np.empty((bs, li))
    t1 = np.empty((bs, h))
    epT = np.empty((h, bs))
    x = np.empty(bs)
    ggrad = np.empty(gp.size)
    snapshots = 0

    for s in range(steps):
        e = entry_seq[s]
        ys = values_flat[offsets[e] : offsets[e + 1]]
        n = ys.size
        for r in range(bs):
            for c in range(latent):
                gin[r, c] = z_all[s, r, c]
            for c in range(m_dim):
                gin[r, latent + c] = cond_entries[e, c]
        _affine_tanh(gin, gw1, gb1, t1)
        for r in range(bs):
            acc = gb2[0]
            for k in range(h):
                acc += t1[r, k] * gw2[k]
            x[r] = acc
        sx = np.sort(x.copy())

        ggrad[:] = 0.0
        gW1 = ggrad[: h * li].reshape(h, li)
        gB1 = ggrad[h * li : h * li + h]
        gW2 = ggrad[h * li + h : h * li + 2 * h]
        gB2 = ggrad[h * li + 2 * h :]
        for r in range(bs):
            sy = (
                np.searchsorted(ys, x[r], side="left")
                + np.searchsorted(ys, x[r], side="right")
                - n
            )
            sxx = (
                np.searchsorted(sx, x[r], side="left")
                + np.searchsorted(sx, x[r], side="right")
                - bs
            )
            go = (2.0 / (bs * n)) * sy - (2.0 / (bs * (bs - 1))) * sxx
            gB2[0] += go
            for k in range(h):
                trk = t1[r, k]
                gW2[k] += go * trk
                epT[k, r] = go * gw2[k] * (1.0 - trk * trk)
                gB1[k] += epT[k, r]
        gW1 += np.dot(epT, gin)

        counters[0] += 1
        _adam_flat(counters[0], gm, gv, gp, ggrad, lr, wd)
        if accumulate:
            for i in range(gp.size):
                avg_sum[i] += gp[i]
            snapshots += 1
    return snapshots
