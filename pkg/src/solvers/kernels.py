"""
Compiled inner loops for the harmonic and random-walk solvers.

Everything here works on flat numpy arrays: polygon vertex coordinates
``vx, vy`` (edge ``e`` runs from vertex ``e`` to vertex ``e + 1``), grid
stencils in compressed per-node form, and walker states. No fastmath, so
serial and parallel variants produce bit-identical results.
"""
import numba as nb
import numpy as np

_numba_setting = {'nogil': True, 'cache': True}


def set_workers(workers: int) -> bool:
    """Cap the numba thread pool at workers; True when the threaded kernels should run"""
    if workers <= 1:
        return False
    nb.set_num_threads(min(workers, nb.config.NUMBA_NUM_THREADS))
    return True


# Arm types of the unequal-arm stencil
ARM_NEIGHBOUR = 0
ARM_DIRICHLET = 1
ARM_REFLECTING = 2

# Node kinds
EXTERIOR = 0
INTERIOR = 1
DIRICHLET = 2

# Step laws
LAW_UNIFORM_ANGLE = 0
LAW_GAUSSIAN = 1
LAW_TWO_POINT_AXIS = 2

THETA_SNAP = 1e-9
MAX_BOUNCES = 100

_DI = np.array([1, -1, 0, 0])
_DJ = np.array([0, 0, 1, -1])

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 1.0 / 9007199254740992.0


# -- geometry ----------------------------------------------------------------

@nb.njit(**_numba_setting)
def point_in_ring(x, y, vx, vy):
    """Even-odd rule membership of (x, y) in the closed vertex ring."""
    inside = False
    n = vx.shape[0]
    j = n - 1
    for i in range(n):
        if (vy[i] > y) != (vy[j] > y):
            x_cross = vx[i] + (y - vy[i]) * (vx[j] - vx[i]) / (vy[j] - vy[i])
            if x < x_cross:
                inside = not inside
        j = i
    return inside


@nb.njit(**_numba_setting)
def first_crossing(px, py, qx, qy, vx, vy, edge_list, lo, hi, skip):
    """First edge hit by the segment p -> q.

    Scans ``edge_list[lo:hi]`` and returns ``(t, edge)`` with the hit at
    ``p + t (q - p)``; ``edge`` is -1 when the segment stays inside.
    """
    n = vx.shape[0]
    rx = qx - px
    ry = qy - py
    best_t = 2.0
    best_e = -1
    for k in range(lo, hi):
        e = edge_list[k]
        if e == skip:
            continue
        ax = vx[e]
        ay = vy[e]
        sx = vx[(e + 1) % n] - ax
        sy = vy[(e + 1) % n] - ay
        denom = rx * sy - ry * sx
        # only outward crossings of the counterclockwise ring count
        if denom <= 0.0:
            continue
        wx = ax - px
        wy = ay - py
        t = (wx * sy - wy * sx) / denom
        u = (wx * ry - wy * rx) / denom
        if t < 0.0 or t > 1.0 or u < -1e-12 or u > 1.0 + 1e-12:
            continue
        if t < best_t:
            best_t = t
            best_e = e
    if best_e < 0:
        return 1.0, -1
    return best_t, best_e


# -- finite-difference stencil -----------------------------------------------

@nb.njit(**_numba_setting)
def classify_nodes(x0, y0, h, nx, ny, vx, vy):
    kind = np.zeros((ny, nx), np.int8)
    for j in range(ny):
        y = y0 + (j + 0.5) * h
        for i in range(nx):
            x = x0 + (i + 0.5) * h
            if point_in_ring(x, y, vx, vy):
                kind[j, i] = INTERIOR
    return kind


@nb.njit(**_numba_setting)
def assemble_stencil(x0, y0, h, nx, ny, vx, vy, absorbing, folded):
    """Shortley-Weller stencil on the cell-centred grid x0 + (i + 1/2) h.

    Returns node kinds, unknown ids, neighbour ids, normalized weights,
    right-hand sides (two players), Dirichlet node values, node colours, a
    flag marking unknowns whose four arms are all regular neighbours, and
    the arm types and boundary data per node.
    """
    ne = vx.shape[0]
    all_edges = np.arange(ne)
    kind = classify_nodes(x0, y0, h, nx, ny, vx, vy)

    theta = np.ones((ny, nx, 4))
    arm = np.zeros((ny, nx, 4), np.int8)
    g = np.zeros((ny, nx, 4, 2))
    dval = np.full((ny, nx, 2), np.nan)
    for j in range(ny):
        y = y0 + (j + 0.5) * h
        for i in range(nx):
            if kind[j, i] != INTERIOR:
                continue
            x = x0 + (i + 0.5) * h
            for m in range(4):
                ii = i + _DI[m]
                jj = j + _DJ[m]
                if 0 <= ii < nx and 0 <= jj < ny and kind[jj, ii] != EXTERIOR:
                    continue
                qx = x + _DI[m] * h
                qy = y + _DJ[m] * h
                t, e = first_crossing(x, y, qx, qy, vx, vy, all_edges, 0, ne, -1)
                if e < 0 or not absorbing[e]:
                    arm[j, i, m] = ARM_REFLECTING
                    continue
                bx = x + t * (qx - x)
                by = y + t * (qy - y)
                if folded:
                    bx = abs(bx)
                    by = abs(by)
                arm[j, i, m] = ARM_DIRICHLET
                theta[j, i, m] = max(t, THETA_SNAP)
                g[j, i, m, 0] = bx
                g[j, i, m, 1] = by
                if t <= THETA_SNAP:
                    kind[j, i] = DIRICHLET
                    dval[j, i, 0] = bx
                    dval[j, i, 1] = by

    ids = np.full((ny, nx), -1, np.int64)
    n = 0
    for j in range(ny):
        for i in range(nx):
            if kind[j, i] == INTERIOR:
                ids[j, i] = n
                n += 1

    nbr = np.full((n, 4), -1, np.int64)
    weight = np.zeros((n, 4))
    rhs = np.zeros((n, 2))
    colour = np.zeros(n, np.int8)
    regular = np.zeros(n, np.bool_)
    a = np.zeros(4)
    for j in range(ny):
        for i in range(nx):
            k = ids[j, i]
            if k < 0:
                continue
            te = theta[j, i, 0]
            tw = theta[j, i, 1]
            tn = theta[j, i, 2]
            ts = theta[j, i, 3]
            a[0] = 2.0 / (te * (te + tw))
            a[1] = 2.0 / (tw * (te + tw))
            a[2] = 2.0 / (tn * (tn + ts))
            a[3] = 2.0 / (ts * (tn + ts))
            diag = a[0] + a[1] + a[2] + a[3]
            for m in range(4):
                if arm[j, i, m] == ARM_REFLECTING:
                    diag -= a[m]
            is_regular = True
            for m in range(4):
                kind_m = arm[j, i, m]
                if kind_m == ARM_NEIGHBOUR:
                    jj = j + _DJ[m]
                    ii = i + _DI[m]
                    if kind[jj, ii] == INTERIOR:
                        nbr[k, m] = ids[jj, ii]
                        weight[k, m] = a[m] / diag
                    else:
                        is_regular = False
                        rhs[k, 0] += a[m] * dval[jj, ii, 0] / diag
                        rhs[k, 1] += a[m] * dval[jj, ii, 1] / diag
                elif kind_m == ARM_DIRICHLET:
                    is_regular = False
                    rhs[k, 0] += a[m] * g[j, i, m, 0] / diag
                    rhs[k, 1] += a[m] * g[j, i, m, 1] / diag
                else:
                    is_regular = False
            colour[k] = (i + j) % 2
            regular[k] = is_regular
    return kind, ids, nbr, weight, rhs, dval, colour, regular, arm, g


@nb.njit(**_numba_setting)
def _relax(u, order, nbr, weight, rhs, omega):
    worst = 0.0
    for idx in range(order.shape[0]):
        k = order[idx]
        for f in range(2):
            target = rhs[k, f]
            for m in range(4):
                nb_k = nbr[k, m]
                if nb_k >= 0:
                    target += weight[k, m] * u[nb_k, f]
            delta = target - u[k, f]
            if abs(delta) > worst:
                worst = abs(delta)
            u[k, f] += omega * delta
    return worst


@nb.njit(parallel=True, **_numba_setting)
def _relax_parallel(u, order, nbr, weight, rhs, omega, buf):
    for idx in nb.prange(order.shape[0]):
        k = order[idx]
        worst = 0.0
        for f in range(2):
            target = rhs[k, f]
            for m in range(4):
                nb_k = nbr[k, m]
                if nb_k >= 0:
                    target += weight[k, m] * u[nb_k, f]
            delta = target - u[k, f]
            if abs(delta) > worst:
                worst = abs(delta)
            u[k, f] += omega * delta
        buf[idx] = worst
    if order.shape[0] == 0:
        return 0.0
    return buf[:order.shape[0]].max()


@nb.njit(**_numba_setting)
def sor_solve(u, red, black, nbr, weight, rhs, omega, tol, max_sweeps):
    """Red-black SOR in place on both player fields; returns (sweeps, residual)."""
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        r_red = _relax(u, red, nbr, weight, rhs, omega)
        r_black = _relax(u, black, nbr, weight, rhs, omega)
        residual = max(r_red, r_black)
        if residual <= tol:
            return sweep, residual
    return max_sweeps, residual


@nb.njit(**_numba_setting)
def sor_solve_threaded(u, red, black, nbr, weight, rhs, omega, tol, max_sweeps):
    buf = np.zeros(max(red.shape[0], black.shape[0]))
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        r_red = _relax_parallel(u, red, nbr, weight, rhs, omega, buf)
        r_black = _relax_parallel(u, black, nbr, weight, rhs, omega, buf)
        residual = max(r_red, r_black)
        if residual <= tol:
            return sweep, residual
    return max_sweeps, residual


# -- counter-based random numbers --------------------------------------------

@nb.njit(**_numba_setting)
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@nb.njit(**_numba_setting)
def counter_uniform(seed, walker, move, lane):
    """Uniform double in [0, 1) as a pure function of (seed, walker, move, lane)."""
    stream = splitmix64(np.uint64(seed) ^ splitmix64(np.uint64(walker) * np.uint64(4) + np.uint64(lane)))
    bits = splitmix64(stream ^ splitmix64(np.uint64(move)))
    return (bits >> np.uint64(11)) * _TO_UNIT


@nb.njit(**_numba_setting)
def draw_step(seed, walker, move, law, eps):
    u0 = counter_uniform(seed, walker, move, 0)
    if law == LAW_TWO_POINT_AXIS:
        sign = eps if counter_uniform(seed, walker, move, 1) < 0.5 else -eps
        if u0 < 0.5:
            return sign, 0.0
        return 0.0, sign
    angle = 2.0 * np.pi * u0
    radius = eps
    if law == LAW_GAUSSIAN:
        u1 = counter_uniform(seed, walker, move, 1)
        u2 = counter_uniform(seed, walker, move, 2)
        z = np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * np.pi * u2)
        radius = eps * abs(z)
    return radius * np.cos(angle), radius * np.sin(angle)


# -- reflected walk ----------------------------------------------------------

@nb.njit(**_numba_setting)
def walk_one(sx, sy, seed, walker, eps, law, max_moves, vx, vy, absorbing, folded,
             gx0, gy0, cell, ncx, ncy, cand_ptr, cand_idx, all_edges, margin):
    """Walk one walker to absorption.

    Returns ``(x, y, moves, status)``; status 1 means the move cap was hit.
    """
    ne = vx.shape[0]
    x = sx
    y = sy
    for move in range(max_moves):
        dx, dy = draw_step(seed, walker, move, law, eps)
        if np.sqrt(dx * dx + dy * dy) <= margin:
            ci = min(max(int((x - gx0) / cell), 0), ncx - 1)
            cj = min(max(int((y - gy0) / cell), 0), ncy - 1)
            c = cj * ncx + ci
            edge_list = cand_idx
            lo = cand_ptr[c]
            hi = cand_ptr[c + 1]
        else:
            edge_list = all_edges
            lo = 0
            hi = ne
        if lo == hi:
            x += dx
            y += dy
            continue
        px = x
        py = y
        qx = x + dx
        qy = y + dy
        skip = -1
        settled = False
        for _ in range(MAX_BOUNCES + 1):
            t, e = first_crossing(px, py, qx, qy, vx, vy, edge_list, lo, hi, skip)
            if e < 0:
                x = qx
                y = qy
                settled = True
                break
            hx = px + t * (qx - px)
            hy = py + t * (qy - py)
            if absorbing[e]:
                if folded:
                    return abs(hx), abs(hy), move + 1, 0
                return hx, hy, move + 1, 0
            ax = vx[e]
            ay = vy[e]
            ex = vx[(e + 1) % ne] - ax
            ey = vy[(e + 1) % ne] - ay
            s = ((qx - ax) * ex + (qy - ay) * ey) / (ex * ex + ey * ey)
            rx = 2.0 * (ax + s * ex) - qx
            ry = 2.0 * (ay + s * ey) - qy
            px = hx
            py = hy
            qx = rx
            qy = ry
            skip = e
        if not settled:
            x = px
            y = py
    return x, y, max_moves, 1


@nb.njit(**_numba_setting)
def walk_all(sx, sy, seed, walkers, eps, law, max_moves, vx, vy, absorbing, folded,
             gx0, gy0, cell, ncx, ncy, cand_ptr, cand_idx, all_edges, margin):
    hit = np.empty((walkers, 2))
    moves = np.empty(walkers, np.int64)
    status = np.empty(walkers, np.int8)
    for w in range(walkers):
        hx, hy, m, s = walk_one(sx, sy, seed, w, eps, law, max_moves, vx, vy, absorbing, folded,
                                gx0, gy0, cell, ncx, ncy, cand_ptr, cand_idx, all_edges, margin)
        hit[w, 0] = hx
        hit[w, 1] = hy
        moves[w] = m
        status[w] = s
    return hit, moves, status


@nb.njit(parallel=True, **_numba_setting)
def walk_all_threaded(sx, sy, seed, walkers, eps, law, max_moves, vx, vy, absorbing, folded,
                      gx0, gy0, cell, ncx, ncy, cand_ptr, cand_idx, all_edges, margin):
    hit = np.empty((walkers, 2))
    moves = np.empty(walkers, np.int64)
    status = np.empty(walkers, np.int8)
    for w in nb.prange(walkers):
        hx, hy, m, s = walk_one(sx, sy, seed, w, eps, law, max_moves, vx, vy, absorbing, folded,
                                gx0, gy0, cell, ncx, ncy, cand_ptr, cand_idx, all_edges, margin)
        hit[w, 0] = hx
        hit[w, 1] = hy
        moves[w] = m
        status[w] = s
    return hit, moves, status
