"""Event-loop kernels for both backends.

Everything here is numba-compilable and also runs interpreted; state lives
in plain numpy arrays.  Aggregate transition rates are maintained as integer
counts per row (floats enter only at selection time), so the rate index
cannot drift.  Scalar bundles:

  scal   int64[4]  = [rod_row, sum_h, sum_u, sum_d]
  rates  float64[5] = [gamma1/2, gamma2*p, gamma2*q, a, b]
  tag    int64[5]  = [alive, row, col, sign, unwrapped_dx]
  dstat  int64[2]  = [discrepancy_count, monotonicity_violations]

Event codes: 0 horizontal swap, 1 up jump, 2 down jump, 3 rod up trial,
4 rod down trial.  Counter slots: [hswap, vup, vdown, up_trials,
down_trials, up_successes, down_successes].
"""

import numpy as np

from .backend import kernel
from .rng import U64, _derive_state, rand_below, rand_exp, rand_u01

BIG_EVENTS = 1 << 62


# ---------------------------------------------------------------- sampling

@kernel
def _fill_bernoulli(s, occ, row_probs, rod_row, rod_len):
    # one uniform per free site, row-major scan; rod sites consume no draw
    H, W = occ.shape
    for r in range(H):
        pr = row_probs[r]
        for c in range(W):
            if r == rod_row and c < rod_len:
                occ[r, c] = 0
            else:
                occ[r, c] = 1 if rand_u01(s) <= pr else 0


@kernel
def _stir_row(s, occ, rod_row, rod_len, r):
    # uniform permutation of the row's free sites (Fisher-Yates)
    H, W = occ.shape
    base = rod_len if r == rod_row else 0
    n_free = W - base
    for i in range(n_free - 1, 0, -1):
        j = rand_below(s, i + 1)
        ci = base + i
        cj = base + np.int64(j)
        tmp = occ[r, ci]
        occ[r, ci] = occ[r, cj]
        occ[r, cj] = tmp


@kernel
def _stir_all(s, occ, rod_row, rod_len):
    H, W = occ.shape
    for r in range(H):
        _stir_row(s, occ, rod_row, rod_len, r)


# ------------------------------------------------------ single-copy counts

@kernel
def _n_edges(W):
    return W if W > 2 else 1


@kernel
def _edge_disc(occ, rod_row, N, r, c, cn):
    if r == rod_row and (c < N or cn < N):
        return 0
    if occ[r, c] != occ[r, cn]:
        return 1
    return 0


@kernel
def _u_term(occ, rod_row, N, r, c):
    # source (r,c) can jump up
    H, W = occ.shape
    if r < 0 or r + 1 >= H:
        return 0
    if occ[r, c] != 1 or occ[r + 1, c] != 0:
        return 0
    if r + 1 == rod_row and c < N:
        return 0
    return 1


@kernel
def _d_term(occ, rod_row, N, r, c):
    # source (r,c) can jump down
    H, W = occ.shape
    if r < 1 or r >= H:
        return 0
    if occ[r, c] != 1 or occ[r - 1, c] != 0:
        return 0
    if r - 1 == rod_row and c < N:
        return 0
    return 1


@kernel
def _hcnt_row(occ, rod_row, N, r):
    # inline form of summing _edge_disc over the ring; helper calls with
    # array arguments are too slow for the recount path
    H, W = occ.shape
    ne = W if W > 2 else 1
    cnt = 0
    if r != rod_row:
        for c in range(ne):
            cn = c + 1
            if cn == W:
                cn = 0
            if occ[r, c] != occ[r, cn]:
                cnt += 1
        return cnt
    for c in range(ne):
        cn = c + 1
        if cn == W:
            cn = 0
        if c < N or cn < N:
            continue
        if occ[r, c] != occ[r, cn]:
            cnt += 1
    return cnt


@kernel
def _ucnt_row(occ, rod_row, N, r):
    # inline form of summing _u_term over the row
    H, W = occ.shape
    if r < 0 or r + 1 >= H:
        return 0
    c0 = N if r + 1 == rod_row else 0
    cnt = 0
    for c in range(c0, W):
        if occ[r, c] == 1 and occ[r + 1, c] == 0:
            cnt += 1
    return cnt


@kernel
def _dcnt_row(occ, rod_row, N, r):
    # inline form of summing _d_term over the row
    H, W = occ.shape
    if r < 1 or r >= H:
        return 0
    c0 = N if r - 1 == rod_row else 0
    cnt = 0
    for c in range(c0, W):
        if occ[r, c] == 1 and occ[r - 1, c] == 0:
            cnt += 1
    return cnt


@kernel
def _recount_rows(occ, hcnt, ucnt, dcnt, scal, N, lo, hi):
    # refresh rows [lo, hi] and fix the running sums
    H, W = occ.shape
    if lo < 0:
        lo = 0
    if hi > H - 1:
        hi = H - 1
    rod_row = scal[0]
    for r in range(lo, hi + 1):
        h = _hcnt_row(occ, rod_row, N, r)
        u = _ucnt_row(occ, rod_row, N, r)
        d = _dcnt_row(occ, rod_row, N, r)
        scal[1] += h - hcnt[r]
        scal[2] += u - ucnt[r]
        scal[3] += d - dcnt[r]
        hcnt[r] = h
        ucnt[r] = u
        dcnt[r] = d


@kernel
def _apply_hswap(occ, hcnt, ucnt, dcnt, scal, N, r, c, cn):
    # runs once per event; all occupancy logic stays in this body because
    # helper calls taking the array argument carry refcount traffic the
    # optimiser cannot remove
    H, W = occ.shape
    rod_row = scal[0]
    # neighbour edges (the swapped edge itself stays discordant)
    b1 = 0
    b2 = 0
    pc = c - 1 if c > 0 else W - 1
    nc = cn + 1 if cn + 1 < W else 0
    g1 = not (r == rod_row and (pc < N or c < N))
    g2 = not (r == rod_row and (cn < N or nc < N))
    if W > 2:
        if g1 and occ[r, pc] != occ[r, c]:
            b1 = 1
        if g2 and occ[r, cn] != occ[r, nc]:
            b2 = 1

    # vertical terms around the two sites depend only on the centre bytes;
    # neighbour bytes and rod guards are swap-invariant (m/p = rows r-1/r+1)
    pm = r - 1 >= 0
    pp = r + 1 < H
    xm = np.int64(occ[r - 1, c]) if pm else np.int64(0)
    xp = np.int64(occ[r + 1, c]) if pp else np.int64(0)
    ym = np.int64(occ[r - 1, cn]) if pm else np.int64(0)
    yp = np.int64(occ[r + 1, cn]) if pp else np.int64(0)
    x0 = np.int64(occ[r, c])
    y0 = np.int64(occ[r, cn])
    gxr = not (r == rod_row and c < N)
    gxu = not (r + 1 == rod_row and c < N)
    gxd = not (r - 1 == rod_row and c < N)
    gyr = not (r == rod_row and cn < N)
    gyu = not (r + 1 == rod_row and cn < N)
    gyd = not (r - 1 == rod_row and cn < N)
    bxu_m = 1 if (pm and gxr and xm == 1 and x0 == 0) else 0
    bxu_0 = 1 if (pp and gxu and x0 == 1 and xp == 0) else 0
    bxd_0 = 1 if (pm and gxd and x0 == 1 and xm == 0) else 0
    bxd_p = 1 if (pp and gxr and xp == 1 and x0 == 0) else 0
    byu_m = 1 if (pm and gyr and ym == 1 and y0 == 0) else 0
    byu_0 = 1 if (pp and gyu and y0 == 1 and yp == 0) else 0
    byd_0 = 1 if (pm and gyd and y0 == 1 and ym == 0) else 0
    byd_p = 1 if (pp and gyr and yp == 1 and y0 == 0) else 0

    tmp = occ[r, c]
    occ[r, c] = occ[r, cn]
    occ[r, cn] = tmp

    if W > 2:
        a1 = 0
        a2 = 0
        if g1 and occ[r, pc] != occ[r, c]:
            a1 = 1
        if g2 and occ[r, cn] != occ[r, nc]:
            a2 = 1
        hcnt[r] += a1 - b1 + a2 - b2
        scal[1] += a1 - b1 + a2 - b2

    # after the swap the centre bytes have exchanged roles
    axu_m = 1 if (pm and gxr and xm == 1 and y0 == 0) else 0
    axu_0 = 1 if (pp and gxu and y0 == 1 and xp == 0) else 0
    axd_0 = 1 if (pm and gxd and y0 == 1 and xm == 0) else 0
    axd_p = 1 if (pp and gxr and xp == 1 and y0 == 0) else 0
    ayu_m = 1 if (pm and gyr and ym == 1 and x0 == 0) else 0
    ayu_0 = 1 if (pp and gyu and x0 == 1 and yp == 0) else 0
    ayd_0 = 1 if (pm and gyd and x0 == 1 and ym == 0) else 0
    ayd_p = 1 if (pp and gyr and yp == 1 and x0 == 0) else 0
    du_m = (axu_m - bxu_m) + (ayu_m - byu_m)
    du_0 = (axu_0 - bxu_0) + (ayu_0 - byu_0)
    dd_0 = (axd_0 - bxd_0) + (ayd_0 - byd_0)
    dd_p = (axd_p - bxd_p) + (ayd_p - byd_p)
    if pm:
        ucnt[r - 1] += du_m
    ucnt[r] += du_0
    dcnt[r] += dd_0
    if pp:
        dcnt[r + 1] += dd_p
    scal[2] += du_m + du_0
    scal[3] += dd_0 + dd_p


@kernel
def _select_apply(occ, hcnt, ucnt, dcnt, scal, rates, N, s, stir_mode):
    """Draw the event category and apply it.  Returns (code, r, c, success).

    For horizontal swaps c is the left column of the edge; for monomer
    jumps (r, c) is the source site; for rod trials r is the target row.
    """
    H, W = occ.shape
    hw = rates[0]
    pw = rates[1]
    qw = rates[2]
    a = rates[3]
    b = rates[4]
    total = hw * scal[1] + pw * scal[2] + qw * scal[3] + a + b
    u = rand_u01(s) * total
    if u < a + b:
        rod_row = scal[0]
        if u < a:
            code = 3
            tr = rod_row + 1
        else:
            code = 4
            tr = rod_row - 1
        if stir_mode == 1:
            _stir_all(s, occ, rod_row, N)
            _recount_rows(occ, hcnt, ucnt, dcnt, scal, N, 0, H - 1)
        succ = 0
        if 0 <= tr < H:
            empty = True
            for cc in range(N):
                if occ[tr, cc] == 1:
                    empty = False
                    break
            if empty:
                succ = 1
                scal[0] = tr
                lo = rod_row if rod_row < tr else tr
                hi = rod_row if rod_row > tr else tr
                _recount_rows(occ, hcnt, ucnt, dcnt, scal, N, lo - 1, hi + 1)
        return code, tr, np.int64(-1), succ

    u -= a + b
    kind = -1
    row = -1
    for r in range(H):
        rr_h = hw * hcnt[r]
        rr_u = pw * ucnt[r]
        rr_d = qw * dcnt[r]
        rr = rr_h + rr_u + rr_d
        if u < rr:
            if u < rr_h:
                kind = 0
            elif u < rr_h + rr_u:
                kind = 1
                u -= rr_h
            else:
                kind = 2
                u -= rr_h + rr_u
            row = r
            break
        u -= rr
    if row < 0:
        # float residue fell off the end; take the last nonempty category
        for r in range(H - 1, -1, -1):
            if hw > 0.0 and hcnt[r] > 0:
                kind = 0
                row = r
                u = hw * (hcnt[r] - 1)
                break
            if pw > 0.0 and ucnt[r] > 0:
                kind = 1
                row = r
                u = pw * (ucnt[r] - 1)
                break
            if qw > 0.0 and dcnt[r] > 0:
                kind = 2
                row = r
                u = qw * (dcnt[r] - 1)
                break
    rod_row = scal[0]
    if kind == 0:
        k = np.int64(u / hw)
        if k > hcnt[row] - 1:
            k = hcnt[row] - 1
        seen = -1
        c = -1
        cn = -1
        guard = row == rod_row
        for e in range(_n_edges(W)):
            en = e + 1
            if en == W:
                en = 0
            if guard and (e < N or en < N):
                continue
            if occ[row, e] != occ[row, en]:
                seen += 1
                c = e
                cn = en
                if seen == k:
                    break
        _apply_hswap(occ, hcnt, ucnt, dcnt, scal, N, row, c, cn)
        return np.int64(0), np.int64(row), np.int64(c), np.int64(1)
    if kind == 1:
        k = np.int64(u / pw)
        if k > ucnt[row] - 1:
            k = ucnt[row] - 1
        seen = -1
        col = -1
        c0 = N if row + 1 == rod_row else 0
        if row + 1 < H:
            for cc in range(c0, W):
                if occ[row, cc] == 1 and occ[row + 1, cc] == 0:
                    seen += 1
                    col = cc
                    if seen == k:
                        break
        occ[row, col] = 0
        occ[row + 1, col] = 1
        _recount_rows(occ, hcnt, ucnt, dcnt, scal, N, row - 1, row + 2)
        return np.int64(1), np.int64(row), np.int64(col), np.int64(1)
    # kind == 2
    k = np.int64(u / qw)
    if k > dcnt[row] - 1:
        k = dcnt[row] - 1
    seen = -1
    col = -1
    c0 = N if row - 1 == rod_row else 0
    if row >= 1:
        for cc in range(c0, W):
            if occ[row, cc] == 1 and occ[row - 1, cc] == 0:
                seen += 1
                col = cc
                if seen == k:
                    break
    occ[row, col] = 0
    occ[row - 1, col] = 1
    _recount_rows(occ, hcnt, ucnt, dcnt, scal, N, row - 2, row + 1)
    return np.int64(2), np.int64(row), np.int64(col), np.int64(1)


@kernel
def _step_event(occ, hcnt, ucnt, dcnt, scal, rates, N, s, stir_mode):
    """Holding time plus one applied event: (code, dt, r, c, success)."""
    hw = rates[0]
    total = hw * scal[1] + rates[1] * scal[2] + rates[2] * scal[3] \
        + rates[3] + rates[4]
    dt = rand_exp(s) / total
    code, r, c, succ = _select_apply(occ, hcnt, ucnt, dcnt, scal, rates, N, s,
                                     stir_mode)
    return code, dt, r, c, succ


@kernel
def _run(occ, hcnt, ucnt, dcnt, scal, rates, N, s, t0, t_end, max_events,
         check_times, out_rows, record_traj, traj_t, traj_y, counters,
         stir_mode):
    """Event loop to t_end (or max_events).  Rod rows are recorded at the
    sorted check_times; successful rod moves append to traj arrays when
    record_traj is on.  Returns (t, n_events, n_traj, status); status 1
    means the trajectory buffer overflowed."""
    t = t0
    nev = 0
    ci = 0
    nc = check_times.shape[0]
    ntraj = 0
    status = 0
    reached_end = False
    while True:
        if nev >= max_events:
            break
        total = rates[0] * scal[1] + rates[1] * scal[2] + rates[2] * scal[3] \
            + rates[3] + rates[4]
        if total <= 0.0:
            t = t_end
            reached_end = True
            break
        dt = rand_exp(s) / total
        te = t + dt
        while ci < nc and check_times[ci] < te:
            out_rows[ci] = scal[0]
            ci += 1
        if te > t_end:
            t = t_end
            reached_end = True
            break
        t = te
        code, er, ec, succ = _select_apply(occ, hcnt, ucnt, dcnt, scal, rates,
                                           N, s, stir_mode)
        nev += 1
        counters[code] += 1
        if code == 3 and succ == 1:
            counters[5] += 1
        if code == 4 and succ == 1:
            counters[6] += 1
        if succ == 1 and (code == 3 or code == 4) and record_traj == 1:
            if ntraj < traj_t.shape[0]:
                traj_t[ntraj] = t
                traj_y[ntraj] = scal[0]
                ntraj += 1
            else:
                status = 1
                break
    if reached_end:
        while ci < nc:
            out_rows[ci] = scal[0]
            ci += 1
    return t, nev, ntraj, status


@kernel
def _init_counts(occ, rod_row, N):
    H, W = occ.shape
    hcnt = np.zeros(H, np.int64)
    ucnt = np.zeros(H, np.int64)
    dcnt = np.zeros(H, np.int64)
    scal = np.zeros(4, np.int64)
    scal[0] = rod_row
    _recount_rows(occ, hcnt, ucnt, dcnt, scal, N, 0, H - 1)
    return hcnt, ucnt, dcnt, scal


@kernel
def _ensemble_rod_law(master, n_reps, H, W, N, row_probs, y0_row, rates,
                      t_end, check_times, out_counts, row_accum,
                      accum_rows, stir_mode):
    """Independent replicas from the conditioned product measure; rod-row
    counts land in out_counts[check, row].  With accum_rows on, monomer row
    totals at t_end are summed into row_accum."""
    nc = check_times.shape[0]
    counters = np.zeros(8, np.int64)
    dummy_t = np.empty(0, np.float64)
    dummy_y = np.empty(0, np.int64)
    for rep in range(n_reps):
        s = _derive_state(master, U64(rep))
        occ = np.zeros((H, W), np.uint8)
        _fill_bernoulli(s, occ, row_probs, y0_row, N)
        hcnt, ucnt, dcnt, scal = _init_counts(occ, y0_row, N)
        out_rows = np.empty(nc, np.int64)
        _run(occ, hcnt, ucnt, dcnt, scal, rates, N, s, 0.0, t_end,
             BIG_EVENTS, check_times, out_rows, 0, dummy_t, dummy_y,
             counters, stir_mode)
        for k in range(nc):
            out_counts[k, out_rows[k]] += 1
        if accum_rows == 1:
            for r in range(H):
                tot = 0
                for c in range(W):
                    tot += occ[r, c]
                row_accum[r] += tot


@kernel
def _trial_stats(master, n_reps, H, W, N, row_probs, y0_row, rates, t_end,
                 stir_mode):
    """Aggregate rod trial/success counters over an ensemble."""
    counters = np.zeros(8, np.int64)
    nc0 = np.empty(0, np.float64)
    out0 = np.empty(0, np.int64)
    dummy_t = np.empty(0, np.float64)
    dummy_y = np.empty(0, np.int64)
    for rep in range(n_reps):
        s = _derive_state(master, U64(rep))
        occ = np.zeros((H, W), np.uint8)
        _fill_bernoulli(s, occ, row_probs, y0_row, N)
        hcnt, ucnt, dcnt, scal = _init_counts(occ, y0_row, N)
        _run(occ, hcnt, ucnt, dcnt, scal, rates, N, s, 0.0, t_end,
             BIG_EVENTS, nc0, out0, 0, dummy_t, dummy_y, counters, stir_mode)
    return counters


@kernel
def _encode_state(occ, rod_row):
    # bit-packed field (row-major) plus rod row in the high bits
    H, W = occ.shape
    bits = U64(0)
    k = 0
    for r in range(H):
        for c in range(W):
            if occ[r, c] == 1:
                bits |= U64(1) << U64(k)
            k += 1
    return bits | (U64(rod_row) << U64(H * W))


@kernel
def _first_step_tally(occ0, rod_row, N, rates, master, n_samples, keys):
    """Distribution of the state after one event from a fixed start."""
    H, W = occ0.shape
    s = _derive_state(master, U64(0))
    for m in range(n_samples):
        occ = occ0.copy()
        hcnt, ucnt, dcnt, scal = _init_counts(occ, rod_row, N)
        _select_apply(occ, hcnt, ucnt, dcnt, scal, rates, N, s, 0)
        keys[m] = _encode_state(occ, scal[0])


# ------------------------------------------------------------ coupled pair

@kernel
def _edge_disc2(o1, o2, rod_row, N, r, c, cn):
    if r == rod_row and (c < N or cn < N):
        return 0
    if o1[r, c] != o1[r, cn] or o2[r, c] != o2[r, cn]:
        return 1
    return 0


@kernel
def _u_term2(o1, o2, rod_row, N, r, c):
    H, W = o1.shape
    if r < 0 or r + 1 >= H:
        return 0
    if r + 1 == rod_row and c < N:
        return 0
    if (o1[r, c] == 1 and o1[r + 1, c] == 0) or \
            (o2[r, c] == 1 and o2[r + 1, c] == 0):
        return 1
    return 0


@kernel
def _d_term2(o1, o2, rod_row, N, r, c):
    H, W = o1.shape
    if r < 1 or r >= H:
        return 0
    if r - 1 == rod_row and c < N:
        return 0
    if (o1[r, c] == 1 and o1[r - 1, c] == 0) or \
            (o2[r, c] == 1 and o2[r - 1, c] == 0):
        return 1
    return 0


@kernel
def _hcnt_row2(o1, o2, rod_row, N, r):
    H, W = o1.shape
    ne = W if W > 2 else 1
    cnt = 0
    if r != rod_row:
        for c in range(ne):
            cn = c + 1
            if cn == W:
                cn = 0
            if o1[r, c] != o1[r, cn] or o2[r, c] != o2[r, cn]:
                cnt += 1
        return cnt
    for c in range(ne):
        cn = c + 1
        if cn == W:
            cn = 0
        if c < N or cn < N:
            continue
        if o1[r, c] != o1[r, cn] or o2[r, c] != o2[r, cn]:
            cnt += 1
    return cnt


@kernel
def _ucnt_row2(o1, o2, rod_row, N, r):
    H, W = o1.shape
    if r < 0 or r + 1 >= H:
        return 0
    c0 = N if r + 1 == rod_row else 0
    cnt = 0
    for c in range(c0, W):
        if (o1[r, c] == 1 and o1[r + 1, c] == 0) or \
                (o2[r, c] == 1 and o2[r + 1, c] == 0):
            cnt += 1
    return cnt


@kernel
def _dcnt_row2(o1, o2, rod_row, N, r):
    H, W = o1.shape
    if r < 1 or r >= H:
        return 0
    c0 = N if r - 1 == rod_row else 0
    cnt = 0
    for c in range(c0, W):
        if (o1[r, c] == 1 and o1[r - 1, c] == 0) or \
                (o2[r, c] == 1 and o2[r - 1, c] == 0):
            cnt += 1
    return cnt


@kernel
def _recount_rows2(o1, o2, hcnt, ucnt, dcnt, scal, N, lo, hi):
    H, W = o1.shape
    if lo < 0:
        lo = 0
    if hi > H - 1:
        hi = H - 1
    rod_row = scal[0]
    for r in range(lo, hi + 1):
        h = _hcnt_row2(o1, o2, rod_row, N, r)
        u = _ucnt_row2(o1, o2, rod_row, N, r)
        d = _dcnt_row2(o1, o2, rod_row, N, r)
        scal[1] += h - hcnt[r]
        scal[2] += u - ucnt[r]
        scal[3] += d - dcnt[r]
        hcnt[r] = h
        ucnt[r] = u
        dcnt[r] = d


@kernel
def _sign_at(o1, o2, r, c):
    return np.int64(o1[r, c]) - np.int64(o2[r, c])


@kernel
def _tag_resolve(tag, r1, c1, s1_after, r2, c2, s2_after):
    """Move or kill the tag after an event touching sites 1 and 2.
    Returns +1/-1 when the tag hopped 1->2 / 2->1, else 0."""
    if tag[0] == 0:
        return np.int64(0)
    sg = tag[3]
    at1 = tag[1] == r1 and tag[2] == c1
    at2 = tag[1] == r2 and tag[2] == c2
    if not (at1 or at2):
        return np.int64(0)
    if at1:
        if s1_after == sg:
            return np.int64(0)
        if s2_after == sg:
            tag[1] = r2
            tag[2] = c2
            return np.int64(1)
        tag[0] = 0
        return np.int64(0)
    if s2_after == sg:
        return np.int64(0)
    if s1_after == sg:
        tag[1] = r1
        tag[2] = c1
        return np.int64(-1)
    tag[0] = 0
    return np.int64(0)


@kernel
def _apply_hswap2(o1, o2, hcnt, ucnt, dcnt, scal, N, tag, r, c, cn):
    # mirrors _apply_hswap: per-event occupancy logic pasted inline, OR
    # over the two copies
    H, W = o1.shape
    rod_row = scal[0]
    b1 = 0
    b2 = 0
    pc = c - 1 if c > 0 else W - 1
    nc = cn + 1 if cn + 1 < W else 0
    g1 = not (r == rod_row and (pc < N or c < N))
    g2 = not (r == rod_row and (cn < N or nc < N))
    if W > 2:
        if g1 and (o1[r, pc] != o1[r, c] or o2[r, pc] != o2[r, c]):
            b1 = 1
        if g2 and (o1[r, cn] != o1[r, nc] or o2[r, cn] != o2[r, nc]):
            b2 = 1

    pm = r - 1 >= 0
    pp = r + 1 < H
    xm1 = np.int64(o1[r - 1, c]) if pm else np.int64(0)
    xp1 = np.int64(o1[r + 1, c]) if pp else np.int64(0)
    ym1 = np.int64(o1[r - 1, cn]) if pm else np.int64(0)
    yp1 = np.int64(o1[r + 1, cn]) if pp else np.int64(0)
    x01 = np.int64(o1[r, c])
    y01 = np.int64(o1[r, cn])
    xm2 = np.int64(o2[r - 1, c]) if pm else np.int64(0)
    xp2 = np.int64(o2[r + 1, c]) if pp else np.int64(0)
    ym2 = np.int64(o2[r - 1, cn]) if pm else np.int64(0)
    yp2 = np.int64(o2[r + 1, cn]) if pp else np.int64(0)
    x02 = np.int64(o2[r, c])
    y02 = np.int64(o2[r, cn])
    gxr = not (r == rod_row and c < N)
    gxu = not (r + 1 == rod_row and c < N)
    gxd = not (r - 1 == rod_row and c < N)
    gyr = not (r == rod_row and cn < N)
    gyu = not (r + 1 == rod_row and cn < N)
    gyd = not (r - 1 == rod_row and cn < N)
    bxu_m = 1 if (pm and gxr and ((xm1 == 1 and x01 == 0) or
                                  (xm2 == 1 and x02 == 0))) else 0
    bxu_0 = 1 if (pp and gxu and ((x01 == 1 and xp1 == 0) or
                                  (x02 == 1 and xp2 == 0))) else 0
    bxd_0 = 1 if (pm and gxd and ((x01 == 1 and xm1 == 0) or
                                  (x02 == 1 and xm2 == 0))) else 0
    bxd_p = 1 if (pp and gxr and ((xp1 == 1 and x01 == 0) or
                                  (xp2 == 1 and x02 == 0))) else 0
    byu_m = 1 if (pm and gyr and ((ym1 == 1 and y01 == 0) or
                                  (ym2 == 1 and y02 == 0))) else 0
    byu_0 = 1 if (pp and gyu and ((y01 == 1 and yp1 == 0) or
                                  (y02 == 1 and yp2 == 0))) else 0
    byd_0 = 1 if (pm and gyd and ((y01 == 1 and ym1 == 0) or
                                  (y02 == 1 and ym2 == 0))) else 0
    byd_p = 1 if (pp and gyr and ((yp1 == 1 and y01 == 0) or
                                  (yp2 == 1 and y02 == 0))) else 0

    tmp = o1[r, c]
    o1[r, c] = o1[r, cn]
    o1[r, cn] = tmp
    tmp = o2[r, c]
    o2[r, c] = o2[r, cn]
    o2[r, cn] = tmp

    if W > 2:
        a1 = 0
        a2 = 0
        if g1 and (o1[r, pc] != o1[r, c] or o2[r, pc] != o2[r, c]):
            a1 = 1
        if g2 and (o1[r, cn] != o1[r, nc] or o2[r, cn] != o2[r, nc]):
            a2 = 1
        hcnt[r] += a1 - b1 + a2 - b2
        scal[1] += a1 - b1 + a2 - b2

    axu_m = 1 if (pm and gxr and ((xm1 == 1 and y01 == 0) or
                                  (xm2 == 1 and y02 == 0))) else 0
    axu_0 = 1 if (pp and gxu and ((y01 == 1 and xp1 == 0) or
                                  (y02 == 1 and xp2 == 0))) else 0
    axd_0 = 1 if (pm and gxd and ((y01 == 1 and xm1 == 0) or
                                  (y02 == 1 and xm2 == 0))) else 0
    axd_p = 1 if (pp and gxr and ((xp1 == 1 and y01 == 0) or
                                  (xp2 == 1 and y02 == 0))) else 0
    ayu_m = 1 if (pm and gyr and ((ym1 == 1 and x01 == 0) or
                                  (ym2 == 1 and x02 == 0))) else 0
    ayu_0 = 1 if (pp and gyu and ((x01 == 1 and yp1 == 0) or
                                  (x02 == 1 and yp2 == 0))) else 0
    ayd_0 = 1 if (pm and gyd and ((x01 == 1 and ym1 == 0) or
                                  (x02 == 1 and ym2 == 0))) else 0
    ayd_p = 1 if (pp and gyr and ((yp1 == 1 and x01 == 0) or
                                  (yp2 == 1 and x02 == 0))) else 0
    du_m = (axu_m - bxu_m) + (ayu_m - byu_m)
    du_0 = (axu_0 - bxu_0) + (ayu_0 - byu_0)
    dd_0 = (axd_0 - bxd_0) + (ayd_0 - byd_0)
    dd_p = (axd_p - bxd_p) + (ayd_p - byd_p)
    if pm:
        ucnt[r - 1] += du_m
    ucnt[r] += du_0
    dcnt[r] += dd_0
    if pp:
        dcnt[r + 1] += dd_p
    scal[2] += du_m + du_0
    scal[3] += dd_0 + dd_p

    s1 = y01 - y02
    s2 = x01 - x02
    hop = _tag_resolve(tag, r, c, s1, r, cn, s2)
    if hop != 0:
        tag[4] += hop


@kernel
def _select_apply2(o1, o2, hcnt, ucnt, dcnt, scal, rates, N, s, tag, dstat):
    """Coupled analogue of _select_apply; shared clocks, per-copy
    feasibility, rod fixed.  Updates discrepancy count and the violation
    counter in dstat."""
    H, W = o1.shape
    hw = rates[0]
    pw = rates[1]
    qw = rates[2]
    total = hw * scal[1] + pw * scal[2] + qw * scal[3]
    u = rand_u01(s) * total
    kind = -1
    row = -1
    for r in range(H):
        rr_h = hw * hcnt[r]
        rr_u = pw * ucnt[r]
        rr_d = qw * dcnt[r]
        rr = rr_h + rr_u + rr_d
        if u < rr:
            if u < rr_h:
                kind = 0
            elif u < rr_h + rr_u:
                kind = 1
                u -= rr_h
            else:
                kind = 2
                u -= rr_h + rr_u
            row = r
            break
        u -= rr
    if row < 0:
        for r in range(H - 1, -1, -1):
            if hw > 0.0 and hcnt[r] > 0:
                kind = 0
                row = r
                u = hw * (hcnt[r] - 1)
                break
            if pw > 0.0 and ucnt[r] > 0:
                kind = 1
                row = r
                u = pw * (ucnt[r] - 1)
                break
            if qw > 0.0 and dcnt[r] > 0:
                kind = 2
                row = r
                u = qw * (dcnt[r] - 1)
                break
    rod_row = scal[0]
    if kind == 0:
        k = np.int64(u / hw)
        if k > hcnt[row] - 1:
            k = hcnt[row] - 1
        seen = -1
        c = -1
        cn = -1
        guard = row == rod_row
        for e in range(_n_edges(W)):
            en = e + 1
            if en == W:
                en = 0
            if guard and (e < N or en < N):
                continue
            if o1[row, e] != o1[row, en] or o2[row, e] != o2[row, en]:
                seen += 1
                c = e
                cn = en
                if seen == k:
                    break
        _apply_hswap2(o1, o2, hcnt, ucnt, dcnt, scal, N, tag, row, c, cn)
        return np.int64(0), np.int64(row), np.int64(c)
    if kind == 1:
        tr = row + 1
        k = np.int64(u / pw)
        if k > ucnt[row] - 1:
            k = ucnt[row] - 1
        seen = -1
        col = -1
        c0 = N if row + 1 == rod_row else 0
        if row + 1 < H:
            for cc in range(c0, W):
                if (o1[row, cc] == 1 and o1[row + 1, cc] == 0) or \
                        (o2[row, cc] == 1 and o2[row + 1, cc] == 0):
                    seen += 1
                    col = cc
                    if seen == k:
                        break
    else:
        tr = row - 1
        k = np.int64(u / qw)
        if k > dcnt[row] - 1:
            k = dcnt[row] - 1
        seen = -1
        col = -1
        c0 = N if row - 1 == rod_row else 0
        if row >= 1:
            for cc in range(c0, W):
                if (o1[row, cc] == 1 and o1[row - 1, cc] == 0) or \
                        (o2[row, cc] == 1 and o2[row - 1, cc] == 0):
                    seen += 1
                    col = cc
                    if seen == k:
                        break
    d_before = (np.int64(1) if _sign_at(o1, o2, row, col) != 0 else np.int64(0)) \
        + (np.int64(1) if _sign_at(o1, o2, tr, col) != 0 else np.int64(0))
    if o1[row, col] == 1 and o1[tr, col] == 0:
        o1[row, col] = 0
        o1[tr, col] = 1
    if o2[row, col] == 1 and o2[tr, col] == 0:
        o2[row, col] = 0
        o2[tr, col] = 1
    d_after = (np.int64(1) if _sign_at(o1, o2, row, col) != 0 else np.int64(0)) \
        + (np.int64(1) if _sign_at(o1, o2, tr, col) != 0 else np.int64(0))
    dstat[0] += d_after - d_before
    if d_after > d_before:
        dstat[1] += 1
    lo = row if row < tr else tr
    hi = row if row > tr else tr
    _recount_rows2(o1, o2, hcnt, ucnt, dcnt, scal, N, lo - 1, hi + 1)
    _tag_resolve(tag, row, col, _sign_at(o1, o2, row, col),
                 tr, col, _sign_at(o1, o2, tr, col))
    return kind, np.int64(row), np.int64(col)


@kernel
def _step2_event(o1, o2, hcnt, ucnt, dcnt, scal, rates, N, s, tag, dstat):
    """Holding time plus one applied coupled event: (kind, dt, r, c)."""
    total = rates[0] * scal[1] + rates[1] * scal[2] + rates[2] * scal[3]
    dt = rand_exp(s) / total
    kind, r, c = _select_apply2(o1, o2, hcnt, ucnt, dcnt, scal, rates, N, s,
                                tag, dstat)
    return kind, dt, r, c


@kernel
def _count_discrepancies(o1, o2):
    H, W = o1.shape
    n = 0
    for r in range(H):
        for c in range(W):
            if o1[r, c] != o2[r, c]:
                n += 1
    return n


@kernel
def _coupled_run(o1, o2, hcnt, ucnt, dcnt, scal, rates, N, s, tag, dstat,
                 t_end, max_events, check_times, out_tag, out_disc):
    """Coupled event loop; out_tag[k] = (alive, row, col, dx) and
    out_disc[k] = discrepancy count at each checkpoint."""
    t = 0.0
    nev = 0
    ci = 0
    nc = check_times.shape[0]
    while True:
        if nev >= max_events:
            break
        total = rates[0] * scal[1] + rates[1] * scal[2] + rates[2] * scal[3]
        if total <= 0.0:
            t = t_end
            break
        dt = rand_exp(s) / total
        te = t + dt
        while ci < nc and check_times[ci] < te:
            out_tag[ci, 0] = tag[0]
            out_tag[ci, 1] = tag[1]
            out_tag[ci, 2] = tag[2]
            out_tag[ci, 3] = tag[4]
            out_disc[ci] = dstat[0]
            ci += 1
        if te > t_end:
            t = t_end
            break
        t = te
        _select_apply2(o1, o2, hcnt, ucnt, dcnt, scal, rates, N, s, tag, dstat)
        nev += 1
    while ci < nc:
        out_tag[ci, 0] = tag[0]
        out_tag[ci, 1] = tag[1]
        out_tag[ci, 2] = tag[2]
        out_tag[ci, 3] = tag[4]
        out_disc[ci] = dstat[0]
        ci += 1
    return t, nev


@kernel
def _init_counts2(o1, o2, rod_row, N):
    H, W = o1.shape
    hcnt = np.zeros(H, np.int64)
    ucnt = np.zeros(H, np.int64)
    dcnt = np.zeros(H, np.int64)
    scal = np.zeros(4, np.int64)
    scal[0] = rod_row
    _recount_rows2(o1, o2, hcnt, ucnt, dcnt, scal, N, 0, H - 1)
    return hcnt, ucnt, dcnt, scal


@kernel
def _coupled_ensemble(master, n_reps, H, W, N, rod_row, row_probs, mode,
                      tag_row, tag_col, rates, t_end, check_times,
                      rep_tag, rep_disc, rep_viol, eta_rows, zeta_rows,
                      accum_rows):
    """Coupled replicas.  mode 0: zeta from the conditioned product measure
    with the tag site forced empty, eta = zeta + tagged particle.  mode 1:
    independent eta/zeta samples, no tag.  Per-replica checkpoint tag data
    lands in rep_tag[k, rep, 0:4], discrepancy counts in rep_disc[k, rep],
    violation totals in rep_viol[rep]; with accum_rows on, row totals of
    each copy at t_end are summed into eta_rows/zeta_rows."""
    nc = check_times.shape[0]
    for rep in range(n_reps):
        s = _derive_state(master, U64(rep))
        o2 = np.zeros((H, W), np.uint8)
        _fill_bernoulli(s, o2, row_probs, rod_row, N)
        o1 = np.zeros((H, W), np.uint8)
        tag = np.zeros(5, np.int64)
        if mode == 0:
            o2[tag_row, tag_col] = 0
            for r in range(H):
                for c in range(W):
                    o1[r, c] = o2[r, c]
            o1[tag_row, tag_col] = 1
            tag[0] = 1
            tag[1] = tag_row
            tag[2] = tag_col
            tag[3] = 1
        else:
            _fill_bernoulli(s, o1, row_probs, rod_row, N)
        hcnt, ucnt, dcnt, scal = _init_counts2(o1, o2, rod_row, N)
        dstat = np.zeros(2, np.int64)
        dstat[0] = _count_discrepancies(o1, o2)
        out_tag = np.empty((nc, 4), np.int64)
        out_disc = np.empty(nc, np.int64)
        _coupled_run(o1, o2, hcnt, ucnt, dcnt, scal, rates, N, s, tag, dstat,
                     t_end, BIG_EVENTS, check_times, out_tag, out_disc)
        for k in range(nc):
            for j in range(4):
                rep_tag[k, rep, j] = out_tag[k, j]
            rep_disc[k, rep] = out_disc[k]
        rep_viol[rep] = dstat[1]
        if accum_rows == 1:
            for r in range(H):
                t1 = 0
                t2 = 0
                for c in range(W):
                    t1 += o1[r, c]
                    t2 += o2[r, c]
                eta_rows[r] += t1
                zeta_rows[r] += t2


# ------------------------------------------------------------- limit walk

@kernel
def _rw_run(s, i0, up, down, t_end, max_events, check_times, out_idx,
            occ_time, record_traj, traj_t, traj_i):
    """Birth-death walk on a closed index window; occ_time accumulates
    holding time per index.  Returns (t, n_events, n_traj, status,
    final_index)."""
    n = up.shape[0]
    i = i0
    t = 0.0
    nev = 0
    ci = 0
    nc = check_times.shape[0]
    ntraj = 0
    status = 0
    while True:
        if nev >= max_events:
            break
        rate = up[i] + down[i]
        if rate <= 0.0:
            break
        dt = rand_exp(s) / rate
        te = t + dt
        while ci < nc and check_times[ci] < te:
            out_idx[ci] = i
            ci += 1
        if te > t_end:
            occ_time[i] += t_end - t
            t = t_end
            break
        occ_time[i] += dt
        t = te
        u = rand_u01(s) * rate
        if u < up[i]:
            i += 1
        else:
            i -= 1
        nev += 1
        if record_traj == 1:
            if ntraj < traj_t.shape[0]:
                traj_t[ntraj] = t
                traj_i[ntraj] = i
                ntraj += 1
            else:
                status = 1
                break
    while ci < nc:
        out_idx[ci] = i
        ci += 1
    return t, nev, ntraj, status, i


@kernel
def _rw_ensemble(master, n_reps, i0, up, down, t_end, check_times, counts):
    """Replica laws of the walk; counts[k, i] accumulates positions."""
    n = up.shape[0]
    nc = check_times.shape[0]
    occ_time = np.zeros(n, np.float64)
    dummy_t = np.empty(0, np.float64)
    dummy_i = np.empty(0, np.int64)
    for rep in range(n_reps):
        s = _derive_state(master, U64(rep))
        out_idx = np.empty(nc, np.int64)
        _rw_run(s, i0, up, down, t_end, BIG_EVENTS, check_times, out_idx,
                occ_time, 0, dummy_t, dummy_i)
        for k in range(nc):
            counts[k, out_idx[k]] += 1
        occ_time[:] = 0.0


@kernel
def _interp_rho(frames, frame_times, t, j):
    # piecewise-linear in time between stored density snapshots
    nf = frame_times.shape[0]
    if t <= frame_times[0]:
        return frames[0, j]
    if t >= frame_times[nf - 1]:
        return frames[nf - 1, j]
    lo = 0
    hi = nf - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if frame_times[mid] <= t:
            lo = mid
        else:
            hi = mid
    w = (t - frame_times[lo]) / (frame_times[hi] - frame_times[lo])
    return frames[lo, j] * (1.0 - w) + frames[hi, j] * w


@kernel
def _rw_inhom_run(s, i0, N, a, b, frames, frame_times, t_end, check_times,
                  out_idx):
    """Thinned walk against the constant dominating rate a+b; acceptance
    (1-rho(target,t))^N with rho interpolated from frames."""
    n = frames.shape[1]
    i = i0
    t = 0.0
    ci = 0
    nc = check_times.shape[0]
    n_acc = 0
    n_prop = 0
    while True:
        # the cap guard doubles as a loop exit edge; without it numba 0.66
        # drops the t = te store and the loop runs on a stale clock
        if n_prop >= BIG_EVENTS:
            break
        dt = rand_exp(s) / (a + b)
        te = t + dt
        while ci < nc and check_times[ci] < te:
            out_idx[ci] = i
            ci += 1
        if te > t_end:
            t = t_end
            break
        t = te
        u = rand_u01(s) * (a + b)
        j = i + 1 if u < a else i - 1
        n_prop += 1
        if 0 <= j < n:
            rho_j = _interp_rho(frames, frame_times, t, j)
            acc = np.exp(N * np.log1p(-rho_j)) if rho_j < 1.0 else 0.0
            if rand_u01(s) <= acc:
                i = j
                n_acc += 1
    while ci < nc:
        out_idx[ci] = i
        ci += 1
    return t, n_prop, n_acc


@kernel
def _rw_inhom_ensemble(master, n_reps, i0, N, a, b, frames, frame_times,
                       t_end, check_times, counts):
    nc = check_times.shape[0]
    for rep in range(n_reps):
        s = _derive_state(master, U64(rep))
        out_idx = np.empty(nc, np.int64)
        _rw_inhom_run(s, i0, N, a, b, frames, frame_times, t_end,
                      check_times, out_idx)
        for k in range(nc):
            counts[k, out_idx[k]] += 1
