"""Hot numeric loops shared by the walk, spectrum, and lattice machinery.

Everything here is plain array-in / array-out so the functions can run either
jitted (default) or as pure numpy/python when ``LATWALK_NUMBA=0``.  No kernel
owns RNG state: random inputs (uniforms, state paths) are pregenerated by the
caller, which is what makes replicas bit-reproducible per (seed, replica_id).

Conventions: lattice bases are column matrices, transition tables are indexed
``trans[target, source]`` with columns summing to one.
"""

import numpy as np

from ._jit import maybe_njit

_LLL_DELTA = 0.99
_LLL_MAX_SWEEPS = 4000


@maybe_njit(cache=True, nogil=True)
def jacobi_singular_values(a):
    """Singular values of ``a`` (desc), via one-sided Jacobi on columns.

    Robust for the small dense matrices used here (d <= ~128); tolerance is
    driven down to ~1e-14 relative.
    """
    m, n = a.shape
    u = a.copy().astype(np.float64)
    for _ in range(60):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = 0.0
                aqq = 0.0
                apq = 0.0
                for i in range(m):
                    app += u[i, p] * u[i, p]
                    aqq += u[i, q] * u[i, q]
                    apq += u[i, p] * u[i, q]
                denom = np.sqrt(app * aqq)
                if denom <= 0.0 or abs(apq) <= 1e-15 * denom:
                    continue
                off = max(off, abs(apq) / denom)
                zeta = (aqq - app) / (2.0 * apq)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    up = u[i, p]
                    uq = u[i, q]
                    u[i, p] = c * up - s * uq
                    u[i, q] = s * up + c * uq
        if off < 1e-14:
            break
    sv = np.empty(n, dtype=np.float64)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += u[i, j] * u[i, j]
        sv[j] = np.sqrt(acc)
    return np.sort(sv)[::-1].copy()


@maybe_njit(cache=True, nogil=True)
def _gso(b, mu, bstar, bstar_sq):
    d = b.shape[1]
    for i in range(d):
        mu[i, i] = 1.0
        for r in range(b.shape[0]):
            bstar[r, i] = b[r, i]
        for j in range(i):
            if bstar_sq[j] <= 0.0:
                mu[i, j] = 0.0
                continue
            dot = 0.0
            for r in range(b.shape[0]):
                dot += b[r, i] * bstar[r, j]
            mu[i, j] = dot / bstar_sq[j]
            for r in range(b.shape[0]):
                bstar[r, i] -= mu[i, j] * bstar[r, j]
        acc = 0.0
        for r in range(b.shape[0]):
            acc += bstar[r, i] * bstar[r, i]
        bstar_sq[i] = acc


@maybe_njit(cache=True, nogil=True)
def lll_reduce(b, delta):
    """LLL-reduce the columns of ``b`` in place.

    Returns the number of swaps performed, or -1 if the sweep cap was hit or
    a Gram-Schmidt vector degenerated (numerically dependent columns).
    """
    d = b.shape[1]
    if d <= 1:
        return 0
    mu = np.zeros((d, d), dtype=np.float64)
    bstar = np.zeros_like(b)
    bstar_sq = np.zeros(d, dtype=np.float64)
    _gso(b, mu, bstar, bstar_sq)
    for j in range(d):
        if not (bstar_sq[j] > 0.0) or not np.isfinite(bstar_sq[j]):
            return -1
    swaps = 0
    iters = 0
    k = 1
    while k < d:
        iters += 1
        if iters > _LLL_MAX_SWEEPS * d:
            return -1
        for j in range(k - 1, -1, -1):
            q = np.rint(mu[k, j])
            if q != 0.0:
                for r in range(b.shape[0]):
                    b[r, k] -= q * b[r, j]
                for l in range(j + 1):
                    mu[k, l] -= q * mu[j, l]
        if bstar_sq[k] >= (delta - mu[k, k - 1] * mu[k, k - 1]) * bstar_sq[k - 1]:
            k += 1
        else:
            for r in range(b.shape[0]):
                tmp = b[r, k]
                b[r, k] = b[r, k - 1]
                b[r, k - 1] = tmp
            swaps += 1
            _gso(b, mu, bstar, bstar_sq)
            for j in range(d):
                if not (bstar_sq[j] > 0.0) or not np.isfinite(bstar_sq[j]):
                    return -1
            k = max(k - 1, 1)
    return swaps


@maybe_njit(cache=True, nogil=True)
def _cholesky_upper(g):
    """Upper-triangular R with R^T R = g; R[0,0] <= 0 signals failure."""
    d = g.shape[0]
    r = np.zeros((d, d), dtype=np.float64)
    for i in range(d):
        acc = g[i, i]
        for k in range(i):
            acc -= r[k, i] * r[k, i]
        if acc <= 0.0:
            r[0, 0] = -1.0
            return r
        r[i, i] = np.sqrt(acc)
        for j in range(i + 1, d):
            s = g[i, j]
            for k in range(i):
                s -= r[k, i] * r[k, j]
            r[i, j] = s / r[i, i]
    return r


@maybe_njit(cache=True, nogil=True)
def enum_shortest(b):
    """Exact shortest nonzero vectors of the lattice spanned by columns of b.

    ``b`` must already be LLL-reduced.  Returns
    ``(min_eucl_sq, min_sup, coeff_eucl, coeff_sup, ok)`` where the coeff
    arrays hold the integer coordinates of the euclidean- and sup-norm
    minimizers.  Ties resolve to the first vector met in enumeration order,
    which is deterministic in the basis.
    """
    d = b.shape[1]
    g = np.dot(b.T, b)
    r = _cholesky_upper(g)
    coeff_e = np.zeros(d, dtype=np.int64)
    coeff_s = np.zeros(d, dtype=np.int64)
    if r[0, 0] <= 0.0:
        return -1.0, -1.0, coeff_e, coeff_s, False

    best_e2 = np.inf
    best_sup = np.inf
    for j in range(d):
        e2 = 0.0
        sup = 0.0
        for i in range(b.shape[0]):
            v = b[i, j]
            e2 += v * v
            if abs(v) > sup:
                sup = abs(v)
        if e2 < best_e2:
            best_e2 = e2
            for l in range(d):
                coeff_e[l] = 1 if l == j else 0
        if sup < best_sup:
            best_sup = sup
            for l in range(d):
                coeff_s[l] = 1 if l == j else 0

    # any euclidean or sup improver satisfies ||v||^2 <= d * best_sup^2
    cbound = d * best_sup * best_sup * (1.0 + 1e-9)

    x = np.zeros(d, dtype=np.int64)
    center = np.zeros(d, dtype=np.float64)
    partial = np.zeros(d + 1, dtype=np.float64)
    hi = np.zeros(d, dtype=np.int64)
    vec = np.zeros(b.shape[0], dtype=np.float64)

    i = d - 1
    rad = np.sqrt(cbound) / r[i, i]
    center[i] = 0.0
    lo_i = np.int64(np.ceil(-rad))
    hi[i] = np.int64(np.floor(rad))
    x[i] = lo_i
    while i < d:
        if x[i] > hi[i]:
            i += 1
            if i < d:
                x[i] += 1
            continue
        diff = x[i] - center[i]
        p = partial[i + 1] + (r[i, i] * diff) * (r[i, i] * diff)
        if p > cbound:
            x[i] += 1
            continue
        if i == 0:
            allzero = True
            for l in range(d):
                if x[l] != 0:
                    allzero = False
                    break
            if not allzero:
                if p < best_e2:
                    best_e2 = p
                    for l in range(d):
                        coeff_e[l] = x[l]
                sup = 0.0
                for rr in range(b.shape[0]):
                    acc = 0.0
                    for l in range(d):
                        acc += b[rr, l] * x[l]
                    vec[rr] = acc
                    if abs(acc) > sup:
                        sup = abs(acc)
                if sup < best_sup:
                    best_sup = sup
                    for l in range(d):
                        coeff_s[l] = x[l]
                    nb = d * best_sup * best_sup * (1.0 + 1e-9)
                    if nb < cbound:
                        cbound = nb
            x[0] += 1
        else:
            partial[i] = p
            i -= 1
            s = 0.0
            for j in range(i + 1, d):
                s += r[i, j] * x[j]
            center[i] = -s / r[i, i]
            rem = cbound - partial[i + 1]
            if rem < 0.0:
                rem = 0.0
            rad = np.sqrt(rem) / r[i, i]
            lo_i = np.int64(np.ceil(center[i] - rad))
            hi[i] = np.int64(np.floor(center[i] + rad))
            x[i] = lo_i
    return best_e2, best_sup, coeff_e, coeff_s, True


@maybe_njit(cache=True, nogil=True)
def enum_counts(b, radii_sq):
    """Count nonzero lattice vectors with ||v||_2^2 <= r2, per entry of radii_sq.

    ``b`` must be LLL-reduced; radii_sq ascending.  Boundary vectors count as
    inside (a slack of 1e-9 absorbs roundoff).
    """
    d = b.shape[1]
    nr = radii_sq.shape[0]
    counts = np.zeros(nr, dtype=np.int64)
    g = np.dot(b.T, b)
    r = _cholesky_upper(g)
    if r[0, 0] <= 0.0:
        counts[:] = -1
        return counts
    cbound = radii_sq[nr - 1] * (1.0 + 1e-12) + 1e-9

    x = np.zeros(d, dtype=np.int64)
    center = np.zeros(d, dtype=np.float64)
    partial = np.zeros(d + 1, dtype=np.float64)
    hi = np.zeros(d, dtype=np.int64)

    i = d - 1
    rad = np.sqrt(cbound) / r[i, i]
    center[i] = 0.0
    x[i] = np.int64(np.ceil(-rad))
    hi[i] = np.int64(np.floor(rad))
    while i < d:
        if x[i] > hi[i]:
            i += 1
            if i < d:
                x[i] += 1
            continue
        diff = x[i] - center[i]
        p = partial[i + 1] + (r[i, i] * diff) * (r[i, i] * diff)
        if p > cbound:
            x[i] += 1
            continue
        if i == 0:
            allzero = True
            for l in range(d):
                if x[l] != 0:
                    allzero = False
                    break
            if not allzero:
                for j in range(nr):
                    if p <= radii_sq[j] * (1.0 + 1e-12) + 1e-9:
                        counts[j] += 1
            x[0] += 1
        else:
            partial[i] = p
            i -= 1
            s = 0.0
            for j in range(i + 1, d):
                s += r[i, j] * x[j]
            center[i] = -s / r[i, i]
            rem = cbound - partial[i + 1]
            if rem < 0.0:
                rem = 0.0
            rad = np.sqrt(rem) / r[i, i]
            x[i] = np.int64(np.ceil(center[i] - rad))
            hi[i] = np.int64(np.floor(center[i] + rad))
    return counts


@maybe_njit(cache=True, nogil=True)
def markov_path(cum_rows, start, uniforms):
    """Sample a chain path of length len(uniforms)+1 starting at ``start``.

    ``cum_rows[s]`` is the cumulative distribution over targets when leaving
    state s (row-contiguous for speed).
    """
    n = uniforms.shape[0]
    ns = cum_rows.shape[0]
    path = np.empty(n + 1, dtype=np.int64)
    path[0] = start
    cur = start
    for k in range(n):
        u = uniforms[k]
        nxt = ns - 1
        for j in range(ns):
            if u < cum_rows[cur, j]:
                nxt = j
                break
        path[k + 1] = nxt
        cur = nxt
    return path


@maybe_njit(cache=True, nogil=True)
def walk_drive(basis, mats, path, eps, radii_sq, nbins, bin_lo, bin_width,
               joint_stride, reduce_every, alarm_entry):
    """Drive the lattice walk x_{k+1} = g_{e_k} x_k, recording observables.

    ``path[k]`` is the state applied at step k; observables are recorded at
    x_k for k = 0..n-1 (x_0 included) against path[k], matching the pairing
    of the lattice point with the state about to act.  The carried basis is
    LLL-reduced before every enumeration; ``reduce_every`` additionally caps
    how many steps may pass without reduction when nothing is observed.

    Returns (keps_counts, siegel_sums, joint_counts, sup_series, eucl_series,
    basis, alarm) with alarm 0 ok / 1 entry overflow / 2 reduction failure.
    """
    d = basis.shape[0]
    n = path.shape[0] - 1
    ne = eps.shape[0]
    nr = radii_sq.shape[0]
    ns = mats.shape[0]

    keps = np.zeros(ne, dtype=np.int64)
    siegel = np.zeros(nr, dtype=np.float64)
    joint = np.zeros((ns, nbins), dtype=np.int64)
    sup_series = np.empty(n, dtype=np.float64)
    eucl_series = np.empty(n, dtype=np.float64)
    alarm = 0

    b = basis.copy()
    for k in range(n):
        if lll_reduce(b, _LLL_DELTA) < 0:
            alarm = 2
            return keps, siegel, joint, sup_series[:k], eucl_series[:k], b, alarm
        over = False
        for i in range(d):
            for j in range(d):
                if abs(b[i, j]) > alarm_entry:
                    over = True
        if over:
            alarm = 1
            return keps, siegel, joint, sup_series[:k], eucl_series[:k], b, alarm

        e2, sup, _, _, ok = enum_shortest(b)
        if not ok:
            alarm = 2
            return keps, siegel, joint, sup_series[:k], eucl_series[:k], b, alarm
        eucl = np.sqrt(e2)
        sup_series[k] = sup
        eucl_series[k] = eucl
        for j in range(ne):
            if sup < eps[j]:
                keps[j] += 1
        if nr > 0:
            cnts = enum_counts(b, radii_sq)
            if cnts[0] < 0:
                alarm = 2
                return keps, siegel, joint, sup_series[:k], eucl_series[:k], b, alarm
            for j in range(nr):
                siegel[j] += cnts[j]
        if nbins > 0 and k % joint_stride == 0:
            t = (np.log(eucl) - bin_lo) / bin_width
            bi = np.int64(np.floor(t))
            if bi < 0:
                bi = 0
            if bi >= nbins:
                bi = nbins - 1
            joint[path[k], bi] += 1

        b = np.dot(mats[path[k]], b)
        # reduce_every is a guard for unobserved stretches; observation above
        # already reduced this step
        if reduce_every > 0 and (k + 1) % reduce_every == 0:
            if lll_reduce(b, _LLL_DELTA) < 0:
                alarm = 2
                return keps, siegel, joint, sup_series[:k + 1], eucl_series[:k + 1], b, alarm
    return keps, siegel, joint, sup_series, eucl_series, b, alarm


@maybe_njit(cache=True, nogil=True)
def qr_lyapunov(mats, path, d):
    """Accumulate QR re-orthonormalization log-norms along a matrix product.

    Returns an (n, d) array whose row k holds log|diag(R_k)| of the step-k
    QR factorization; column sums over rows estimate n * (top-i partial
    Lyapunov sums by prefix).
    """
    n = path.shape[0] - 1
    q = np.eye(d)
    out = np.empty((n, d), dtype=np.float64)
    for k in range(n):
        y = np.dot(mats[path[k]], q)
        qn, r = np.linalg.qr(y)
        for i in range(d):
            rii = r[i, i]
            out[k, i] = np.log(abs(rii))
            if rii < 0.0:
                for rr in range(d):
                    qn[rr, i] = -qn[rr, i]
        q = np.ascontiguousarray(qn)
    return out


@maybe_njit(cache=True, nogil=True)
def vector_growth(mats, path, v0):
    """Total log growth of ||prod * v0|| with per-step renormalization.

    Log factors are accumulated with compensated (Kahan) summation.
    """
    n = path.shape[0] - 1
    v = v0 / np.linalg.norm(v0)
    acc = 0.0
    comp = 0.0
    for k in range(n):
        v = np.dot(mats[path[k]], v)
        nrm = np.linalg.norm(v)
        term = np.log(nrm) - comp
        t = acc + term
        comp = (t - acc) - term
        acc = t
        v = v / nrm
    return acc


@maybe_njit(cache=True, nogil=True)
def batch_vector_growth(mats, path, v0):
    """Per-column log growth for a matrix of start vectors (d x m).

    Returns (total_logs, sq_logs): the compensated sum of per-step log
    factors and the sum of their squares (for a CLT-scale noise estimate).
    """
    n = path.shape[0] - 1
    m = v0.shape[1]
    v = v0.copy()
    for j in range(m):
        nrm = 0.0
        for i in range(v.shape[0]):
            nrm += v[i, j] * v[i, j]
        nrm = np.sqrt(nrm)
        for i in range(v.shape[0]):
            v[i, j] /= nrm
    acc = np.zeros(m, dtype=np.float64)
    comp = np.zeros(m, dtype=np.float64)
    sq = np.zeros(m, dtype=np.float64)
    for k in range(n):
        v = np.dot(mats[path[k]], v)
        for j in range(m):
            nrm = 0.0
            for i in range(v.shape[0]):
                nrm += v[i, j] * v[i, j]
            nrm = np.sqrt(nrm)
            term = np.log(nrm) - comp[j]
            t = acc[j] + term
            comp[j] = (t - acc[j]) - term
            acc[j] = t
            sq[j] += np.log(nrm) * np.log(nrm)
            for i in range(v.shape[0]):
                v[i, j] /= nrm
    return acc, sq


@maybe_njit(cache=True, nogil=True)
def block_products_growth(mats, paths, v0):
    """log ||g_w v0|| for each row w of ``paths`` (fixed word length)."""
    m = paths.shape[0]
    out = np.empty(m, dtype=np.float64)
    for r in range(m):
        v = v0 / np.linalg.norm(v0)
        acc = 0.0
        for k in range(paths.shape[1]):
            v = np.dot(mats[paths[r, k]], v)
            nrm = np.linalg.norm(v)
            acc += np.log(nrm)
            v = v / nrm
        out[r] = acc
    return out


@maybe_njit(cache=True, nogil=True)
def product_norm_growth(mats, path, renorm_every):
    """Total log of the operator norm of the full product along ``path``.

    The running product is rescaled by its Frobenius norm every
    ``renorm_every`` steps; the final operator norm is evaluated exactly via
    Jacobi singular values, so the result is log||prod||_op without overflow.
    """
    n = path.shape[0] - 1
    d = mats.shape[1]
    p = np.eye(d)
    acc = 0.0
    for k in range(n):
        p = np.dot(mats[path[k]], p)
        if (k + 1) % renorm_every == 0:
            f = np.sqrt(np.sum(p * p))
            acc += np.log(f)
            p = p / f
    sv = jacobi_singular_values(p)
    return acc + np.log(sv[0])


@maybe_njit(cache=True, nogil=True)
def stacked_products(mats, flat_states, offsets, d):
    """Products g_{w} = g_{e_{l-1}} ... g_{e_0} for words packed in flat_states.

    Word r occupies flat_states[offsets[r]:offsets[r+1]] in path order
    (e_0 first); the matrix product applies later states on the left.
    """
    m = offsets.shape[0] - 1
    out = np.empty((m, d, d), dtype=np.float64)
    for r in range(m):
        p = np.eye(d)
        for k in range(offsets[r], offsets[r + 1]):
            p = np.dot(mats[flat_states[k]], p)
        out[r] = p
    return out
