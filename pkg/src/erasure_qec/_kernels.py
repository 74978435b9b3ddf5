"""Numba kernels for sampling and posterior computation.

Randomness comes from a counter-based construction: every (seed, erasure
sample, stream) triple is hashed into an independent splitmix64 state, so the
numbers a sample sees do not depend on how samples are split across workers.
Stream 0 drives the erasure stage; stream ``1 + w`` drives 64-shot word ``w``
of the Pauli-frame stage.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .program import (
    EV_EC, EV_ERASE, EV_GATE, EV_MEAS, EV_PREP, EV_RESET,
    OP_CX, OP_CZ, OP_DEP1, OP_DEP2, OP_EC, OP_ERASE, OP_H, OP_M, OP_MX, OP_R, OP_RESET,
    OP_RX, OP_S, OP_XERR, OP_ZERR,
)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K1 = np.uint64(0xD1B54A32D192ED03)
_K2 = np.uint64(0x8CB92BA72F3D8DD7)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_state(seed, sample, stream):
    h = _mix(np.uint64(seed) + _GOLDEN)
    h = _mix(h ^ (np.uint64(sample) * _K1))
    h = _mix(h ^ (np.uint64(stream) * _K2))
    return h


@njit(cache=True, inline="always")
def _next(state):
    """One splitmix64 step; returns (output, new state)."""
    state = state + _GOLDEN
    return _mix(state), state


@njit(cache=True, inline="always")
def _uniform(state):
    r, state = _next(state)
    return (np.float64(r >> _S11) + 1.0) * _INV53, state


@njit(cache=True)
def sample_erasures_kernel(code, a, b, idx, hook, rkind, rpol, prev_ec, f0, f1,
                           n_q, n_eloc, n_ec, n_hooks, seed, sample_ids):
    S = len(sample_ids)
    fired = np.zeros((S, n_eloc), dtype=np.uint8)
    ec_true = np.zeros((S, n_ec), dtype=np.uint8)
    ec_obs = np.zeros((S, n_ec), dtype=np.uint8)
    hooks = np.zeros((S, n_hooks), dtype=np.uint8)
    erased = np.zeros(n_q, dtype=np.uint8)
    for s in range(S):
        st = stream_state(seed, sample_ids[s], 0)
        erased[:] = 0
        for i in range(len(code)):
            c = code[i]
            q = a[i]
            if c == OP_ERASE:
                u, st = _uniform(st)
                if u <= f0[i]:
                    fired[s, idx[i]] = 1
                    erased[q] = 1
            elif c == OP_CX or c == OP_CZ:
                hooks[s, hook[i]] = erased[q]
                hooks[s, hook[i] + 1] = erased[b[i]]
            elif c == OP_M or c == OP_MX:
                hooks[s, hook[i]] = erased[q]
            elif c == OP_EC:
                t = erased[q]
                u, st = _uniform(st)
                rate = f0[i] if t else f1[i]
                o = t ^ (1 if u <= rate else 0)
                ec_true[s, idx[i]] = t
                ec_obs[s, idx[i]] = o
            elif c == OP_RESET:
                applied = rpol[i] == 0 or (prev_ec[i] >= 0 and ec_obs[s, prev_ec[i]] == 1)
                if applied:
                    if erased[q]:
                        erased[q] = 0
                        hooks[s, hook[i]] = 1
                    elif rkind[i] == 2:
                        u, st = _uniform(st)
                        if u <= 0.5:
                            erased[q] = 1
                        else:
                            hooks[s, hook[i]] = 1
            elif c == OP_R or c == OP_RX:
                erased[q] = 0
    return fired, ec_true, ec_obs, hooks


@njit(cache=True, inline="always")
def _gap(st, p, logq):
    if p >= 1.0:
        return np.int64(0), st
    u, st = _uniform(st)
    g = np.log(u) / logq
    if g > 4.0e18:
        return np.int64(4000000000000000000), st
    return np.int64(g), st


@njit(cache=True)
def frame_kernel(code, a, b, idx, hook, cls, class_prob, det_ptr, det_rec, obs_ptr, obs_rec,
                 n_q, n_rec, hooks, seed, sample_ids, n_shots, biased, gauge):
    """Bit-packed Pauli-frame simulation, 64 shots per machine word.

    Returns detector and observable flips as (samples, shots, n) uint8.
    ``hooks`` holds one row of stage-1 flags per sample (may be empty rows
    when the circuit has no erasure).  With ``gauge`` set, noise is skipped
    and measurement gauges are randomized instead; this exposes detectors
    that are not deterministic.
    """
    S = len(sample_ids)
    n_det = len(det_ptr) - 1
    n_obs = len(obs_ptr) - 1
    n_words = (n_shots + 63) // 64
    n_cls = len(class_prob)
    det_out = np.zeros((S, n_shots, n_det), dtype=np.uint8)
    obs_out = np.zeros((S, n_shots, n_obs), dtype=np.uint8)
    x = np.zeros(n_q, dtype=np.uint64)
    z = np.zeros(n_q, dtype=np.uint64)
    rec = np.zeros(max(n_rec, 1), dtype=np.uint64)
    nxt = np.zeros(max(n_cls, 1), dtype=np.int64)
    used = np.zeros(max(n_cls, 1), dtype=np.int64)
    logq = np.zeros(max(n_cls, 1), dtype=np.float64)
    for k in range(n_cls):
        logq[k] = np.log1p(-class_prob[k]) if class_prob[k] < 1.0 else -np.inf
    has_hooks = hooks.shape[1] > 0
    for s in range(S):
        for w in range(n_words):
            st = stream_state(seed, sample_ids[s], 1 + w)
            x[:] = _ZERO
            z[:] = _ZERO
            for k in range(n_cls):
                used[k] = 0
                g, st = _gap(st, class_prob[k], logq[k])
                nxt[k] = g
            for i in range(len(code)):
                c = code[i]
                q = a[i]
                if c == OP_CX or c == OP_CZ:
                    r = b[i]
                    ea = False
                    eb = False
                    if has_hooks and not gauge:
                        ea = hooks[s, hook[i]] == 1
                        eb = hooks[s, hook[i] + 1] == 1
                    if ea:
                        x[q] = _ZERO
                        z[q] = _ZERO
                    if eb:
                        x[r] = _ZERO
                        z[r] = _ZERO
                    if c == OP_CX:
                        x[r] ^= x[q]
                        z[q] ^= z[r]
                    else:
                        z[q] ^= x[r]
                        z[r] ^= x[q]
                    if ea != eb:
                        t = r if ea else q
                        rz, st = _next(st)
                        z[t] ^= rz
                        if not biased:
                            rx, st = _next(st)
                            x[t] ^= rx
                elif c == OP_H:
                    tmp = x[q]
                    x[q] = z[q]
                    z[q] = tmp
                elif c == OP_S:
                    z[q] ^= x[q]
                elif c == OP_R or c == OP_RX:
                    x[q] = _ZERO
                    z[q] = _ZERO
                    if gauge:
                        rr, st = _next(st)
                        if c == OP_R:
                            z[q] = rr
                        else:
                            x[q] = rr
                elif c == OP_M or c == OP_MX:
                    v = x[q] if c == OP_M else z[q]
                    if not gauge:
                        k = cls[i]
                        if k >= 0:
                            base = used[k]
                            used[k] += 64
                            while nxt[k] < base + 64:
                                v ^= _ONE << np.uint64(nxt[k] - base)
                                g, st = _gap(st, class_prob[k], logq[k])
                                nxt[k] += 1 + g
                        if has_hooks and hooks[s, hook[i]] == 1:
                            rr, st = _next(st)
                            v ^= rr
                    else:
                        rr, st = _next(st)
                        if c == OP_M:
                            z[q] ^= rr
                        else:
                            x[q] ^= rr
                    rec[idx[i]] = v
                elif c == OP_RESET:
                    if has_hooks and not gauge and hooks[s, hook[i]] == 1:
                        rx, st = _next(st)
                        rz, st = _next(st)
                        x[q] ^= rx
                        z[q] ^= rz
                elif (c == OP_DEP1 or c == OP_DEP2 or c == OP_XERR or c == OP_ZERR) and not gauge:
                    k = cls[i]
                    if k < 0:
                        continue
                    base = used[k]
                    used[k] += 64
                    while nxt[k] < base + 64:
                        bit = _ONE << np.uint64(nxt[k] - base)
                        if c == OP_DEP1:
                            rr, st = _next(st)
                            pk = _ONE + (rr % np.uint64(3))
                            if pk & _ONE:
                                x[q] ^= bit
                            if pk & np.uint64(2):
                                z[q] ^= bit
                        elif c == OP_DEP2:
                            rr, st = _next(st)
                            pk = _ONE + (rr % np.uint64(15))
                            r = b[i]
                            if pk & _ONE:
                                x[q] ^= bit
                            if pk & np.uint64(2):
                                z[q] ^= bit
                            if pk & np.uint64(4):
                                x[r] ^= bit
                            if pk & np.uint64(8):
                                z[r] ^= bit
                        elif c == OP_XERR:
                            x[q] ^= bit
                        else:
                            z[q] ^= bit
                        g, st = _gap(st, class_prob[k], logq[k])
                        nxt[k] += 1 + g
            lo = w * 64
            hi = min(n_shots, lo + 64)
            for d in range(n_det):
                v = _ZERO
                for j in range(det_ptr[d], det_ptr[d + 1]):
                    v ^= rec[det_rec[j]]
                if v != _ZERO:
                    for sh in range(lo, hi):
                        det_out[s, sh, d] = np.uint8((v >> np.uint64(sh - lo)) & _ONE)
            for o in range(n_obs):
                v = _ZERO
                for j in range(obs_ptr[o], obs_ptr[o + 1]):
                    v ^= rec[obs_rec[j]]
                if v != _ZERO:
                    for sh in range(lo, hi):
                        obs_out[s, sh, o] = np.uint8((v >> np.uint64(sh - lo)) & _ONE)
    return det_out, obs_out


@njit(cache=True)
def posterior_kernel(ch_ptr, ev_type, ev_f0, ev_f1, ev_ec, ev_hook, ev_rkind, ev_rpol,
                     ec_obs, use_ec, n_hooks):
    """Forward-backward pass over each qubit's two-state (ok, erased) chain.

    For every hook writes: at gates and measurements, P(qubit erased | all
    check outcomes); at resets, P(the reset depolarizes the qubit | ...).
    """
    S = ec_obs.shape[0]
    post = np.zeros((S, n_hooks), dtype=np.float64)
    n_ch = len(ch_ptr) - 1
    max_len = 0
    for c in range(n_ch):
        max_len = max(max_len, ch_ptr[c + 1] - ch_ptr[c])
    F0 = np.zeros(max_len + 1)
    F1 = np.zeros(max_len + 1)
    for s in range(S):
        for c in range(n_ch):
            lo = ch_ptr[c]
            hi = ch_ptr[c + 1]
            f0 = 1.0
            f1 = 0.0
            for i in range(lo, hi):
                F0[i - lo] = f0
                F1[i - lo] = f1
                t = ev_type[i]
                if t == EV_ERASE:
                    e = ev_f0[i]
                    f1 = f1 + f0 * e
                    f0 = f0 * (1.0 - e)
                elif t == EV_EC:
                    if use_ec:
                        if ec_obs[s, ev_ec[i]]:
                            f0 *= ev_f1[i]
                            f1 *= 1.0 - ev_f0[i]
                        else:
                            f0 *= 1.0 - ev_f1[i]
                            f1 *= ev_f0[i]
                elif t == EV_RESET:
                    applied = ev_rpol[i] == 0 or (ev_ec[i] >= 0 and ec_obs[s, ev_ec[i]] == 1)
                    if applied:
                        if ev_rkind[i] == 2:
                            f0, f1 = 0.5 * f0 + f1, 0.5 * f0
                        else:
                            f0, f1 = f0 + f1, 0.0
                elif t == EV_PREP:
                    f0, f1 = f0 + f1, 0.0
                nrm = f0 + f1
                if nrm > 0.0:
                    f0 /= nrm
                    f1 /= nrm
            b0 = 1.0
            b1 = 1.0
            for i in range(hi - 1, lo - 1, -1):
                g0 = F0[i - lo]
                g1 = F1[i - lo]
                t = ev_type[i]
                if t == EV_GATE or t == EV_MEAS:
                    zz = g0 * b0 + g1 * b1
                    post[s, ev_hook[i]] = g1 * b1 / zz if zz > 0.0 else 0.0
                elif t == EV_ERASE:
                    e = ev_f0[i]
                    b0 = (1.0 - e) * b0 + e * b1
                elif t == EV_EC:
                    if use_ec:
                        if ec_obs[s, ev_ec[i]]:
                            b0 *= ev_f1[i]
                            b1 *= 1.0 - ev_f0[i]
                        else:
                            b0 *= 1.0 - ev_f1[i]
                            b1 *= ev_f0[i]
                elif t == EV_RESET:
                    applied = ev_rpol[i] == 0 or (ev_ec[i] >= 0 and ec_obs[s, ev_ec[i]] == 1)
                    if applied:
                        if ev_rkind[i] == 2:
                            zz = g0 * (0.5 * b0 + 0.5 * b1) + g1 * b0
                            dep = (g1 * b0 + 0.5 * g0 * b0) / zz if zz > 0.0 else 0.0
                            b0, b1 = 0.5 * b0 + 0.5 * b1, b0
                        else:
                            zz = (g0 + g1) * b0
                            dep = g1 * b0 / zz if zz > 0.0 else 0.0
                            b1 = b0
                        post[s, ev_hook[i]] = dep
                elif t == EV_PREP:
                    b1 = b0
                nrm = b0 + b1
                if nrm > 0.0:
                    b0 /= nrm
                    b1 /= nrm
    return post


@njit(cache=True)
def sensitivity_kernel(code, a, b, idx, n_q, recmask, site_op, site_q):
    """Which detectors/observables a Pauli right after each site flips.

    Walks the circuit backwards keeping, per qubit, the packed flip set of an
    X error and of a Z error at the current time.  Returns (n_sites, 2, W)
    with [:, 0] for X and [:, 1] for Z.
    """
    W = recmask.shape[1]
    FX = np.zeros((n_q, W), dtype=np.uint64)
    FZ = np.zeros((n_q, W), dtype=np.uint64)
    n_s = len(site_op)
    out = np.zeros((n_s, 2, W), dtype=np.uint64)
    order = np.argsort(-site_op, kind="mergesort")
    ptr = 0
    for i in range(len(code) - 1, -1, -1):
        while ptr < n_s and site_op[order[ptr]] >= i:
            s = order[ptr]
            q = site_q[s]
            for w in range(W):
                out[s, 0, w] = FX[q, w]
                out[s, 1, w] = FZ[q, w]
            ptr += 1
        c = code[i]
        p = a[i]
        if c == OP_H:
            for w in range(W):
                t = FX[p, w]
                FX[p, w] = FZ[p, w]
                FZ[p, w] = t
        elif c == OP_S:
            for w in range(W):
                FX[p, w] ^= FZ[p, w]
        elif c == OP_CX:
            t = b[i]
            for w in range(W):
                FX[p, w] ^= FX[t, w]
                FZ[t, w] ^= FZ[p, w]
        elif c == OP_CZ:
            t = b[i]
            for w in range(W):
                FX[p, w] ^= FZ[t, w]
                FX[t, w] ^= FZ[p, w]
        elif c == OP_M:
            r = idx[i]
            for w in range(W):
                FX[p, w] ^= recmask[r, w]
        elif c == OP_MX:
            r = idx[i]
            for w in range(W):
                FZ[p, w] ^= recmask[r, w]
        elif c == OP_R or c == OP_RX:
            for w in range(W):
                FX[p, w] = _ZERO
                FZ[p, w] = _ZERO
    return out


@njit(cache=True, inline="always")
def _popcount(v):
    n = 0
    while v:
        v &= v - _ONE
        n += 1
    return n


@njit(cache=True)
def template_parts_kernel(comp_ptr, comp_site, comp_pauli, snaps, recmask, cls_mask, n_det, obs_word0, fill,
                          part_ptr, part_dets, part_tpl, part_cls, part_obs):
    """Split every template's flip set by detector class.

    Each Pauli part of each component is a sub-fault; its detectors go to
    their class and its observable bits follow the class of its detectors.
    Returns (number of parts, number of detector entries, flags) where flags
    marks templates with a sub-fault flipping only observables (1) or with
    observables on a sub-fault spanning both classes (2).

    With ``fill`` False only counts; otherwise writes the CSR part arrays.
    """
    W = recmask.shape[1]
    n_t = len(comp_ptr) - 1
    acc = np.zeros((2, W), dtype=np.uint64)
    obs = np.zeros(2, dtype=np.uint64)
    sub = np.zeros(W, dtype=np.uint64)
    flags = np.zeros(n_t, dtype=np.int8)
    n_parts = 0
    n_ent = 0
    for t in range(n_t):
        for c in range(2):
            obs[c] = _ZERO
            for w in range(W):
                acc[c, w] = _ZERO
        for k in range(comp_ptr[t], comp_ptr[t + 1]):
            s = comp_site[k]
            pa = comp_pauli[k]
            for part in range(2):
                if s < 0:
                    if part == 1:
                        break
                    for w in range(W):
                        sub[w] = recmask[-1 - s, w]
                else:
                    if not (pa >> part) & 1:
                        continue
                    for w in range(W):
                        sub[w] = snaps[s, part, w]
                has0 = False
                has1 = False
                has_obs = False
                for w in range(W):
                    v = sub[w]
                    if v & cls_mask[0, w]:
                        has0 = True
                    if v & cls_mask[1, w]:
                        has1 = True
                    if w >= obs_word0 and (v & ~(cls_mask[0, w] | cls_mask[1, w])):
                        has_obs = True
                for w in range(W):
                    acc[0, w] ^= sub[w] & cls_mask[0, w]
                    acc[1, w] ^= sub[w] & cls_mask[1, w]
                if has_obs:
                    if not has0 and not has1:
                        flags[t] = 1
                    elif has0 and has1:
                        flags[t] = 2
                    target = 1 if (has1 and not has0) else 0
                    for w in range(obs_word0, W):
                        om = sub[w] & ~(cls_mask[0, w] | cls_mask[1, w])
                        if om:
                            # observables are packed from bit n_det on
                            for bit in range(64):
                                if (om >> np.uint64(bit)) & _ONE:
                                    o = w * 64 + bit - n_det
                                    obs[target] ^= _ONE << np.uint64(o)
        for c in range(2):
            cnt = 0
            for w in range(W):
                cnt += _popcount(acc[c, w])
            if cnt == 0 and obs[c] == _ZERO:
                continue
            if fill:
                part_tpl[n_parts] = t
                part_cls[n_parts] = c
                part_obs[n_parts] = obs[c]
                part_ptr[n_parts] = n_ent
                j = n_ent
                for w in range(W):
                    v = acc[c, w]
                    while v:
                        low = v & (~v + _ONE)
                        bit = _popcount(low - _ONE)
                        part_dets[j] = w * 64 + bit
                        j += 1
                        v ^= low
                part_ptr[n_parts + 1] = j
            n_parts += 1
            n_ent += cnt
    return n_parts, n_ent, flags
