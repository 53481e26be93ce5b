"""Slow, loop-based reference implementations used to cross-check the vectorised code."""
import numpy as np


def loop_d0(f, hx, hy):
    nx, ny = f.shape
    out = np.zeros((2, nx, ny))
    for i in range(nx):
        for j in range(ny):
            out[0, i, j] = (f[(i + 1) % nx, j] - f[i, j]) / hx
            out[1, i, j] = (f[i, (j + 1) % ny] - f[i, j]) / hy
    return out


def loop_d1(a, hx, hy):
    _, nx, ny = a.shape
    out = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            # counter-clockwise circulation around plaquette (i, j)
            circ = (a[0, i, j] * hx + a[1, (i + 1) % nx, j] * hy
                    - a[0, i, (j + 1) % ny] * hx - a[1, i, j] * hy)
            out[i, j] = circ / (hx * hy)
    return out


def dense(op, shape_in, dtype=float):
    """Matrix of a real-linear operator acting on arrays of ``shape_in``."""
    size = int(np.prod(shape_in))
    cols = []
    for k in range(size):
        e = np.zeros(size, dtype=dtype)
        e[k] = 1
        cols.append(np.asarray(op(e.reshape(shape_in))).ravel())
    return np.array(cols).T


def loop_covariant_d(a_total, u, weights, seam, hx, hy):
    """Forward covariant differences with explicit link phases and seam transitions.

    ``seam[j, y]`` multiplies the value fetched across the x-seam.
    """
    n, nx, ny = u.shape
    out = np.zeros((n, 2, nx, ny), complex)
    for jj in range(n):
        w = weights[:, jj]
        for i in range(nx):
            for j in range(ny):
                ax = np.dot(w, a_total[:, 0, i, j])
                ay = np.dot(w, a_total[:, 1, i, j])
                nxt = u[jj, (i + 1) % nx, j]
                if i == nx - 1:
                    nxt = seam[jj, j] * u[jj, 0, j]
                out[jj, 0, i, j] = (np.exp(-1j * hx * ax) * nxt - u[jj, i, j]) / hx
                out[jj, 1, i, j] = (np.exp(-1j * hy * ay) * u[jj, i, (j + 1) % ny] - u[jj, i, j]) / hy
    return out


def loop_moment(u, weights, tau):
    k = weights.shape[0]
    n, nx, ny = u.shape
    out = np.zeros((k, nx, ny))
    for a in range(k):
        for i in range(nx):
            for j in range(ny):
                out[a, i, j] = 0.5 * sum(weights[a, jj] * abs(u[jj, i, j]) ** 2 for jj in range(n)) - tau[a]
    return out


def richardson_derivative(func, h=1e-3, levels=4):
    """Derivative at 0 of a scalar function by Richardson-extrapolated central differences."""
    table = []
    for m in range(levels):
        hm = h / 2**m
        row = [(func(hm) - func(-hm)) / (2 * hm)]
        for k in range(1, m + 1):
            row.append(row[k - 1] + (row[k - 1] - table[m - 1][k - 1]) / (4**k - 1))
        table.append(row)
    return table[-1][-1]


def flux_integral(curv, cell):
    return curv.sum(axis=(-2, -1)) * cell


def rk4_ode(rhs, y0, dt, n):
    y = np.array(y0, dtype=complex)
    out = [y.copy()]
    for _ in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        out.append(y.copy())
    return np.array(out)
