"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom of the module dispatch on
:data:`baiyin._accel.USE_NUMBA`. Both flavours are deterministic; they are
not guaranteed to agree bit for bit on floating-point kernels because the
summation order differs.
"""

import numpy as np

from ._accel import USE_NUMBA, jit

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)


# ---------------------------------------------------------------- sign bits

@jit
def _mix64_numba(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@jit
def _sign_stream_numba(seed, count):
    out = np.empty(count, np.int8)
    state = np.uint64(seed)
    nwords = (count + 63) // 64
    for w in range(nwords):
        state = state + GAMMA
        z = _mix64_numba(state)
        base = w * 64
        stop = min(64, count - base)
        for b in range(stop):
            if (z >> np.uint64(b)) & _ONE:
                out[base + b] = 1
            else:
                out[base + b] = -1
    return out


def _mix64_numpy(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _sign_stream_numpy(seed, count):
    nwords = (count + 63) // 64
    k = np.arange(1, nwords + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(seed) + k * GAMMA
    words = _mix64_numpy(state)
    bits = (words[:, None] >> np.arange(64, dtype=np.uint64)) & _ONE
    return (bits.astype(np.int8) * 2 - 1).ravel()[:count]


# ------------------------------------------------- closed-walk config count

@jit
def _count_even_walks_numba(uchains, vchains, n):
    ku, lp1 = uchains.shape
    kv = vchains.shape[0]
    l = lp1 - 1
    m = 2 * l
    e = np.empty(m, np.int64)
    total = 0
    for a in range(ku):
        for b in range(kv):
            for r in range(l):
                e[2 * r] = uchains[a, r] * n + vchains[b, r]
                e[2 * r + 1] = uchains[a, r + 1] * n + vchains[b, r]
            for i in range(1, m):
                key = e[i]
                j = i - 1
                while j >= 0 and e[j] > key:
                    e[j + 1] = e[j]
                    j -= 1
                e[j + 1] = key
            ok = True
            for i in range(0, m, 2):
                if e[i] != e[i + 1]:
                    ok = False
                    break
            if ok:
                total += 1
    return total


def _count_even_walks_numpy(uchains, vchains, n, chunk_cells=1 << 22):
    ku, lp1 = uchains.shape
    kv = vchains.shape[0]
    l = lp1 - 1
    if ku == 0 or kv == 0:
        return 0
    rows = max(1, chunk_cells // max(1, kv * 2 * l))
    total = 0
    for start in range(0, ku, rows):
        u = uchains[start:start + rows]
        left = u[:, None, :l] * n + vchains[None, :, :]
        right = u[:, None, 1:] * n + vchains[None, :, :]
        edges = np.concatenate([left, right], axis=-1)
        edges.sort(axis=-1)
        total += int(np.all(edges[..., 0::2] == edges[..., 1::2], axis=-1).sum())
    return total


# --------------------------------------------- exhaustive integer traces

@jit
def _exhaustive_traces_numba(p, n, top, start, stop):
    # sums over masks of tr M(l), M(l) = n^l T(l), l = 0..top
    out = np.zeros(top + 1, np.int64)
    x = np.empty((p, n), np.int64)
    shift = n + p - 2
    c = (p - 1) * (n - 1)
    m_prev = np.empty((p, p), np.int64)
    m_cur = np.empty((p, p), np.int64)
    m_next = np.empty((p, p), np.int64)
    a = np.empty((p, p), np.int64)
    for mask in range(start, stop):
        for i in range(p):
            for k in range(n):
                x[i, k] = 2 * ((mask >> (i * n + k)) & 1) - 1
        for i in range(p):
            for j in range(i, p):
                acc = 0
                for k in range(n):
                    acc += x[i, k] * x[j, k]
                a[i, j] = acc
                a[j, i] = acc
        for i in range(p):
            for j in range(p):
                m_prev[i, j] = 1 if i == j else 0
                m_cur[i, j] = a[i, j] - (n if i == j else 0)
            a[i, i] -= shift
        out[0] += p
        if top >= 1:
            tr = 0
            for i in range(p):
                tr += m_cur[i, i]
            out[1] += tr
        for l in range(1, top):
            for i in range(p):
                for j in range(p):
                    acc = 0
                    for k in range(p):
                        acc += a[i, k] * m_cur[k, j]
                    m_next[i, j] = acc - c * m_prev[i, j]
            tr = 0
            for i in range(p):
                tr += m_next[i, i]
            out[l + 1] += tr
            for i in range(p):
                for j in range(p):
                    m_prev[i, j] = m_cur[i, j]
                    m_cur[i, j] = m_next[i, j]
    return out


def _exhaustive_traces_numpy(p, n, top, start, stop, batch=1 << 14):
    out = np.zeros(top + 1, np.int64)
    shifts = np.arange(p * n, dtype=np.int64)
    eye = np.eye(p, dtype=np.int64)
    c = (p - 1) * (n - 1)
    for lo in range(start, stop, batch):
        masks = np.arange(lo, min(stop, lo + batch), dtype=np.int64)
        x = (2 * ((masks[:, None] >> shifts) & 1) - 1).reshape(-1, p, n)
        g = np.matmul(x, x.transpose(0, 2, 1))
        a = g - (n + p - 2) * eye
        m_prev = np.broadcast_to(eye, g.shape)
        m_cur = g - n * eye
        out[0] += p * len(masks)
        if top >= 1:
            out[1] += int(np.trace(m_cur, axis1=1, axis2=2).sum())
        for l in range(1, top):
            m_next = np.matmul(a, m_cur) - c * m_prev
            out[l + 1] += int(np.trace(m_next, axis1=1, axis2=2).sum())
            m_prev, m_cur = m_cur, m_next
    return out


# ------------------------------------------- projected subgradient descent

@jit
def _sphere_descent_numba(e, x0, iters, step):
    big_n, n = e.shape
    x = x0.copy()
    nrm = 0.0
    for k in range(n):
        nrm += x[k] * x[k]
    nrm = np.sqrt(nrm)
    for k in range(n):
        x[k] /= nrm
    s = np.empty(big_n)
    g = np.empty(n)
    best = np.inf
    best_x = x.copy()
    val = 0.0
    for t in range(iters + 1):
        val = 0.0
        for j in range(big_n):
            acc = 0.0
            for k in range(n):
                acc += e[j, k] * x[k]
            s[j] = acc
            val += abs(acc)
        val /= big_n
        if val < best:
            best = val
            best_x[:] = x
        if t == iters:
            break
        for k in range(n):
            g[k] = 0.0
        for j in range(big_n):
            if s[j] > 0.0:
                for k in range(n):
                    g[k] += e[j, k]
            elif s[j] < 0.0:
                for k in range(n):
                    g[k] -= e[j, k]
        eta = step / np.sqrt(t + 1.0) / big_n
        nrm = 0.0
        for k in range(n):
            x[k] -= eta * g[k]
            nrm += x[k] * x[k]
        nrm = np.sqrt(nrm)
        for k in range(n):
            x[k] /= nrm
    return best, best_x, val


def _sphere_descent_numpy(e, x0, iters, step):
    big_n = e.shape[0]
    x = x0 / np.linalg.norm(x0)
    best = np.inf
    best_x = x.copy()
    val = 0.0
    for t in range(iters + 1):
        s = e @ x
        val = float(np.abs(s).sum() / big_n)
        if val < best:
            best = val
            best_x = x.copy()
        if t == iters:
            break
        g = e.T @ np.sign(s)
        x = x - (step / np.sqrt(t + 1.0) / big_n) * g
        x /= np.linalg.norm(x)
    return best, best_x, val


# ------------------------------------------------ exhaustive Khinchine mean

@jit
def _sign_average_numba(x):
    n = x.shape[0]
    half = 1 << (n - 1)
    acc = 0.0
    for mask in range(half):
        s = x[0]
        for k in range(1, n):
            if (mask >> (k - 1)) & 1:
                s += x[k]
            else:
                s -= x[k]
        acc += abs(s)
    return acc / half


def _sign_average_numpy(x):
    n = x.shape[0]
    masks = np.arange(1 << (n - 1), dtype=np.int64)
    signs = 2 * ((masks[:, None] >> np.arange(n - 1)) & 1) - 1
    s = x[0] + signs @ x[1:]
    return float(np.abs(s).mean())


# -------------------------------------------- Householder back-substitution

@jit
def _apply_reflectors_numba(c, tau, z):
    # z <- Q z for the lower-storage reflectors left by LAPACK sytrd
    dim, m = z.shape
    for i in range(dim - 2, -1, -1):
        t = tau[i]
        if t == 0.0:
            continue
        for col in range(m):
            dot = z[i + 1, col]
            for k in range(i + 2, dim):
                dot += c[k, i] * z[k, col]
            f = t * dot
            z[i + 1, col] -= f
            for k in range(i + 2, dim):
                z[k, col] -= f * c[k, i]
    return z


def _apply_reflectors_numpy(c, tau, z):
    dim = z.shape[0]
    for i in range(dim - 2, -1, -1):
        t = tau[i]
        if t == 0.0:
            continue
        h = c[i + 2:, i]
        dot = z[i + 1] + h @ z[i + 2:]
        f = t * dot
        z[i + 1] -= f
        z[i + 2:] -= np.outer(h, f)
    return z


# ----------------------------------------------------------------- dispatch

if USE_NUMBA:
    sign_stream = _sign_stream_numba
    count_even_walks = _count_even_walks_numba
    exhaustive_traces = _exhaustive_traces_numba
    sphere_descent = _sphere_descent_numba
    sign_average = _sign_average_numba
    apply_reflectors = _apply_reflectors_numba
else:
    sign_stream = _sign_stream_numpy
    count_even_walks = _count_even_walks_numpy
    exhaustive_traces = _exhaustive_traces_numpy
    sphere_descent = _sphere_descent_numpy
    sign_average = _sign_average_numpy
    apply_reflectors = _apply_reflectors_numpy

mix64 = _mix64_numpy
