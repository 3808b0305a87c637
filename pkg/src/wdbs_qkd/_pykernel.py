"""Vectorised numpy implementation of the per-pulse simulation kernel.

Layout shared with ``_ckernel.pyx``:

``u``       float64 ``(n, 8)`` uniforms per pulse: Alice state, Eve
            click/route/bit, Bob click/route/bit/flip.
``states``  int64 Alice state values to draw from uniformly.
``params``  float64 vector, see ``PARAM_*`` below.

Returns ``(counts, aux)``: ``counts`` int64 ``(100,)`` indexed
``alice * 25 + eve_code * 5 + bob_code`` with outcome codes
0 = none, ``1 + 2 * basis + bit`` otherwise; ``aux`` int64
``[bob_multi, bob_dark, eve_multi, eve_dark]``.
"""
from __future__ import annotations

import numpy as np

N_UNIFORMS = 8
PARAM_EVE_ENABLED = 0
PARAM_EVE_SLOT = 1  # ratio, multi, signal, dark_only
PARAM_BOB_FLIP = 5
PARAM_BOB_SLOTS = 6  # 4 slots x (ratio, multi, signal, dark_only)
N_PARAMS = PARAM_BOB_SLOTS + 16

SLOT_DIRECT, SLOT_RECT, SLOT_DIAG, SLOT_VACUUM = range(4)


def _detect(state, u_click, u_route, u_bit, u_flip, ratio, multi, signal, dark_only, flip):
    sig = u_click < signal
    dark = ~sig & (u_click < signal + dark_only)
    diag = np.where(sig, u_route >= ratio, u_route >= 0.5)
    matched = diag == (state >= 2)
    p0 = np.where(matched, 1.0 - (state & 1), 0.5)
    bit = np.where(sig, u_bit >= p0, u_bit >= 0.5).astype(np.int64)
    if u_flip is not None:
        bit ^= (sig & (u_flip < flip)).astype(np.int64)
    code = np.where(sig | dark, 1 + 2 * diag.astype(np.int64) + bit, 0)
    return code, int(np.count_nonzero(u_click < multi)), int(np.count_nonzero(dark))


def simulate_chunk(u, states, params):
    u = np.asarray(u, dtype=np.float64)
    states = np.asarray(states, dtype=np.int64)
    n = u.shape[0]
    k = len(states)
    alice = states[np.minimum((u[:, 0] * k).astype(np.int64), k - 1)]
    aux = np.zeros(4, dtype=np.int64)

    if params[PARAM_EVE_ENABLED]:
        e = params[PARAM_EVE_SLOT:PARAM_EVE_SLOT + 4]
        eve, aux[2], aux[3] = _detect(alice, u[:, 1], u[:, 2], u[:, 3], None, e[0], e[1], e[2], e[3], 0.0)
        slot = np.where(eve == 0, SLOT_VACUUM, np.where(eve <= 2, SLOT_RECT, SLOT_DIAG))
        incident = np.maximum(eve - 1, 0)
    else:
        eve = np.zeros(n, dtype=np.int64)
        slot = np.full(n, SLOT_DIRECT)
        incident = alice

    table = np.asarray(params[PARAM_BOB_SLOTS:PARAM_BOB_SLOTS + 16]).reshape(4, 4)
    sp = table[slot]
    bob, aux[0], aux[1] = _detect(
        incident, u[:, 4], u[:, 5], u[:, 6], u[:, 7],
        sp[:, 0], sp[:, 1], sp[:, 2], sp[:, 3], params[PARAM_BOB_FLIP],
    )
    counts = np.bincount(alice * 25 + eve * 5 + bob, minlength=100).astype(np.int64)
    return counts, aux
