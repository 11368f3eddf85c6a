"""Hot numeric kernels.

Everything here is compiled by :func:`ginarcp._accel.kernel`, so it must stay
inside the numpy subset numba understands: no keyword-only arguments, no
Python objects, arrays of float64/int64/bool only.  Random numbers are always
drawn by the caller and passed in, which keeps every kernel a pure function.
"""

import numpy as np

from ._accel import kernel, kernel_or

# minimum segment length for orders 0..20
MIN_SPAN = np.array(
    [10, 10, 12, 14, 16, 18, 20, 25, 25, 25, 25] + [50] * 10, dtype=np.int64
)


# ---------------------------------------------------------------------------
# Poisson quasi-likelihood
# ---------------------------------------------------------------------------


@kernel
def lag_design(x, lo, hi, p):
    """Lagged design matrix rows ``(x[t-1], ..., x[t-p], 1)`` for ``lo <= t < hi``."""
    N = hi - lo
    Z = np.empty((N, p + 1))
    for k in range(p):
        Z[:, k] = x[lo - k - 1 : hi - k - 1]
    Z[:, p] = 1.0
    y = x[lo:hi].copy()
    return Z, y


def _qll_value_np(Z, y, theta):
    xi = Z @ theta
    return np.sum(y * np.log(xi) - xi)


@kernel_or(_qll_value_np)
def qll_value(Z, y, theta):
    N, P = Z.shape
    f = 0.0
    for t in range(N):
        xi = 0.0
        for k in range(P):
            xi += Z[t, k] * theta[k]
        f += y[t] * np.log(xi) - xi
    return f


def _qll_eval_np(Z, y, theta):
    xi = Z @ theta
    f = np.sum(y * np.log(xi) - xi)
    r = y / xi
    g = Z.T @ (r - 1.0)
    w = r / xi
    H = -(Z.T @ (w.reshape(-1, 1) * Z))
    return f, g, H


@kernel_or(_qll_eval_np)
def qll_eval(Z, y, theta):
    """Quasi-log-likelihood, its gradient and Hessian at ``theta``."""
    N, P = Z.shape
    f = 0.0
    g = np.zeros(P)
    H = np.zeros((P, P))
    for t in range(N):
        xi = 0.0
        for k in range(P):
            xi += Z[t, k] * theta[k]
        f += y[t] * np.log(xi) - xi
        r = y[t] / xi
        w = r / xi
        for i in range(P):
            zi = Z[t, i]
            g[i] += (r - 1.0) * zi
            wz = w * zi
            for j in range(i, P):
                H[i, j] -= wz * Z[t, j]
    for i in range(P):
        for j in range(i):
            H[i, j] = H[j, i]
    return f, g, H


@kernel
def project(theta, p, eps, gmax):
    """Euclidean projection onto ``{alpha_k >= eps, sum(alpha) <= 1 - eps, eps <= gamma <= gmax}``."""
    out = theta.copy()
    out[p] = min(max(out[p], eps), gmax)
    if p == 0:
        return out
    cap = 1.0 - eps
    s = 0.0
    for k in range(p):
        if out[k] < eps:
            out[k] = eps
        s += out[k]
    if s <= cap:
        return out
    # sum constraint active: project onto {b >= 0, sum(b) = c} with b = alpha - eps
    c = cap - p * eps
    b = theta[:p] - eps
    u = np.sort(b)[::-1]
    css = 0.0
    tau = 0.0
    for j in range(p):
        css += u[j]
        t = (css - c) / (j + 1)
        if u[j] - t > 0.0:
            tau = t
    for k in range(p):
        out[k] = max(b[k] - tau, 0.0) + eps
    return out


@kernel
def _newton_direction(g, H, free, p, sum_active):
    P = g.shape[0]
    idx = np.nonzero(free)[0]
    d = np.zeros(P)
    m = idx.shape[0]
    if m == 0:
        return d
    A = np.empty((m, m))
    gF = np.empty(m)
    for i in range(m):
        gF[i] = g[idx[i]]
        for j in range(m):
            A[i, j] = -H[idx[i], idx[j]]
    scale = 1.0
    for i in range(m):
        scale = max(scale, abs(A[i, i]))
    ridge = 1e-12 * scale
    ok = False
    for _ in range(12):
        Areg = A + ridge * np.eye(m)
        try:
            np.linalg.cholesky(Areg)
            ok = True
        except Exception:
            ok = False
        if ok:
            break
        ridge *= 100.0
    if not ok:
        for i in range(m):
            d[idx[i]] = gF[i] / scale
        return d
    v1 = np.linalg.solve(Areg, gF)
    if sum_active:
        a = np.zeros(m)
        na = 0
        for i in range(m):
            if idx[i] < p:
                a[i] = 1.0
                na += 1
        if na > 0 and np.dot(a, v1) > 0.0:
            v2 = np.linalg.solve(Areg, a)
            v1 = v1 - v2 * (np.dot(a, v1) / np.dot(a, v2))
    for i in range(m):
        d[idx[i]] = v1[i]
    return d


@kernel
def _line_search(Z, y, theta, f, g, d, p, eps, gmax):
    """Armijo search along the projection arc; returns the accepted point with
    its objective, gradient and Hessian."""
    beta = 1.0
    for i in range(40):
        cand = project(theta + beta * d, p, eps, gmax)
        gain = np.dot(g, cand - theta)
        if i == 0:
            fc, gc, Hc = qll_eval(Z, y, cand)
        else:
            fc = qll_value(Z, y, cand)
        if fc >= f and fc - f >= 1e-4 * max(gain, 0.0):
            if i > 0:
                fc, gc, Hc = qll_eval(Z, y, cand)
            return cand, fc, gc, Hc, True
        beta *= 0.5
    return theta, f, g, g.reshape(-1, 1) * g.reshape(1, -1), False


@kernel
def fit_newton(Z, y, theta0, eps, gmax, max_iter, tol, trace):
    """Projected Newton ascent of the quasi-log-likelihood from ``theta0``.

    ``trace[i]`` receives the objective after ``i`` accepted steps.  Returns
    ``(theta, f, iterations, converged)``.  Convergence means the projected
    mean gradient has sup-norm below ``tol``, or that no representable ascent
    remains while the predicted gain is below the objective's rounding level.
    """
    P = Z.shape[1]
    p = P - 1
    N = y.shape[0]
    act = 1e-12
    theta = project(theta0, p, eps, gmax)
    f, g, H = qll_eval(Z, y, theta)
    trace[:] = np.nan
    trace[0] = f
    it = 0
    converged = False
    while True:
        pg = project(theta + g / N, p, eps, gmax) - theta
        if np.max(np.abs(pg)) <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        free = np.ones(P, dtype=np.bool_)
        for k in range(p):
            if theta[k] <= eps + act and g[k] < 0.0:
                free[k] = False
        if theta[p] <= eps + act and g[p] < 0.0:
            free[p] = False
        if theta[p] >= gmax - act and g[p] > 0.0:
            free[p] = False
        sum_active = p > 0 and np.sum(theta[:p]) >= 1.0 - eps - act
        d = _newton_direction(g, H, free, p, sum_active)
        cand, fc, gc, Hc, ok = _line_search(Z, y, theta, f, g, d, p, eps, gmax)
        if not ok:
            diag = 1.0
            for k in range(P):
                diag = max(diag, -H[k, k])
            cand, fc, gc, Hc, ok = _line_search(Z, y, theta, f, g, g / diag, p, eps, gmax)
        if not ok or np.max(np.abs(cand - theta)) == 0.0:
            converged = np.dot(g, d) <= 1e-12 * max(1.0, abs(f))
            break
        theta = cand
        f = fc
        g = gc
        H = Hc
        it += 1
        trace[it] = f
    return theta, f, it, converged


@kernel
def fit_multistart(Z, y, starts, eps, gmax, max_iter, tol):
    """Ascend from the rows of ``starts`` in turn until one run converges.

    The objective is concave, so a converged run is a global maximiser and
    later starts cannot improve on it; they are still evaluated so callers
    can verify the result dominates every starting value.
    """
    S = starts.shape[0]
    p = Z.shape[1] - 1
    start_vals = np.empty(S)
    for s in range(S):
        start_vals[s] = qll_value(Z, y, project(starts[s], p, eps, gmax))
    trace = np.empty(max_iter + 1)
    best_trace = np.empty(max_iter + 1)
    best_theta = starts[0].copy()
    best_f = -np.inf
    best_it = 0
    best_conv = False
    for s in range(S):
        theta, f, it, conv = fit_newton(Z, y, starts[s], eps, gmax, max_iter, tol, trace)
        if f > best_f:
            best_theta = theta
            best_f = f
            best_it = it
            best_conv = conv
            best_trace[:] = trace
        if conv:
            break
    return best_theta, best_f, best_it, best_conv, start_vals, best_trace


@kernel
def make_starts(seg, y_mean, p, eps, rand_w, rand_scale, yw_ok):
    """Starting points: Yule-Walker, no-autoregression moment start, and a
    fixed pseudo-random point."""
    rows = np.empty((3, p + 1))
    a = np.full(p, eps)
    if yw_ok and p > 0:
        phi, _ = levinson(autocov(seg, p), p)
        for k in range(p):
            a[k] = max(phi[k], eps)
    s = np.sum(a)
    if s > 0.95:
        a = a * (0.95 / s)
    rows[0, :p] = a
    rows[0, p] = max(y_mean * (1.0 - np.sum(a)), eps)
    rows[1, :p] = 0.0
    rows[1, p] = max(y_mean, eps)
    a = rand_w[:p] / np.sum(rand_w[:p]) * rand_scale
    rows[2, :p] = a
    rows[2, p] = max(y_mean * (1.0 - np.sum(a)), eps)
    return rows


def _sandwich_np(Z, y, theta):
    N = y.shape[0]
    xi = Z @ theta
    w1 = 1.0 / xi
    w2 = (y / xi - 1.0) ** 2
    J = (Z.T @ (w1.reshape(-1, 1) * Z)) / N
    I = (Z.T @ (w2.reshape(-1, 1) * Z)) / N
    return J, I


@kernel_or(_sandwich_np)
def sandwich(Z, y, theta):
    """Information matrices ``(J, I)`` averaged over the retained terms."""
    N, P = Z.shape
    J = np.zeros((P, P))
    I = np.zeros((P, P))
    for t in range(N):
        xi = 0.0
        for k in range(P):
            xi += Z[t, k] * theta[k]
        w1 = 1.0 / xi
        w2 = (y[t] / xi - 1.0) ** 2
        for i in range(P):
            for j in range(i, P):
                zz = Z[t, i] * Z[t, j]
                J[i, j] += w1 * zz
                I[i, j] += w2 * zz
    for i in range(P):
        for j in range(i):
            J[i, j] = J[j, i]
            I[i, j] = I[j, i]
    return J / N, I / N


def _autocov_np(x, maxlag):
    n = x.shape[0]
    d = x - x.mean()
    out = np.empty(maxlag + 1)
    for k in range(maxlag + 1):
        out[k] = np.dot(d[: n - k], d[k:]) / n
    return out


@kernel_or(_autocov_np)
def autocov(x, maxlag):
    """Biased sample autocovariances at lags ``0..maxlag``."""
    n = x.shape[0]
    mu = 0.0
    for t in range(n):
        mu += x[t]
    mu /= n
    out = np.zeros(maxlag + 1)
    for k in range(maxlag + 1):
        acc = 0.0
        for t in range(n - k):
            acc += (x[t] - mu) * (x[t + k] - mu)
        out[k] = acc / n
    return out


@kernel
def levinson(r, order):
    """Solve the Yule-Walker Toeplitz system for autocovariances ``r[0..order]``.

    Returns ``(phi, ok)``; ``ok`` is False for a degenerate system, in which
    case ``phi`` is all zeros.
    """
    phi = np.zeros(order)
    if r[0] <= 0.0:
        return phi, False
    err = r[0]
    for k in range(order):
        acc = r[k + 1]
        for j in range(k):
            acc -= phi[j] * r[k - j]
        kappa = acc / err
        new = phi.copy()
        new[k] = kappa
        for j in range(k):
            new[j] = phi[j] - kappa * phi[k - 1 - j]
        phi = new
        err *= 1.0 - kappa * kappa
        if err <= 1e-12 * r[0]:
            return np.zeros(order), False
    return phi, True


# ---------------------------------------------------------------------------
# Chromosome scans
# ---------------------------------------------------------------------------


@kernel
def scan_random(n, u, orders, pi_b, mspan):
    genes = np.full(n, -1, dtype=np.int64)
    genes[0] = orders[0]
    t = mspan[orders[0]]
    while t < n:
        if u[t] < pi_b:
            q = orders[t]
            if t + mspan[q] <= n:
                genes[t] = q
                t += mspan[q]
                continue
        t += 1
    return genes


@kernel
def scan_accept(src, mspan):
    """Left-to-right rebuild of ``src`` honouring minimum spans.

    A candidate order at ``t`` is kept only outside the protected run of the
    previous change-point and only if its own segment fits before the end.
    """
    n = src.shape[0]
    child = np.full(n, -1, dtype=np.int64)
    t = 0
    while t < n:
        v = src[t]
        if v >= 0 and t + mspan[v] <= n:
            child[t] = v
            t += mspan[v]
        else:
            t += 1
    return child


@kernel
def scan_uniform(f, m, u, mspan):
    n = f.shape[0]
    child = np.full(n, -1, dtype=np.int64)
    t = 0
    while t < n:
        v = f[t] if u[t] < 0.5 else m[t]
        if v >= 0 and t + mspan[v] <= n:
            child[t] = v
            t += mspan[v]
        else:
            t += 1
    return child


@kernel
def scan_mutate(parent, u, fresh, pi_p, pi_n, first_pi_p, mspan):
    n = parent.shape[0]
    child = np.full(n, -1, dtype=np.int64)
    t = 0
    while t < n:
        if t == 0:
            v = parent[0] if u[0] < first_pi_p else fresh[0]
        elif u[t] < pi_p:
            v = parent[t]
        elif u[t] < pi_p + pi_n:
            v = -1
        else:
            v = fresh[t]
        if v >= 0 and t + mspan[v] <= n:
            child[t] = v
            t += mspan[v]
        else:
            t += 1
    return child


@kernel
def unforced_mask(genes, mspan):
    """True where a position lies outside every protected run."""
    n = genes.shape[0]
    mask = np.ones(n, dtype=np.bool_)
    t = 0
    while t < n:
        v = genes[t]
        if v >= 0:
            stop = min(t + mspan[v], n)
            for i in range(t + 1, stop):
                mask[i] = False
            t = stop
        else:
            t += 1
    return mask


@kernel
def is_valid(genes, mspan, max_order):
    n = genes.shape[0]
    if n == 0 or genes[0] < 0:
        return False
    t = 0
    while t < n:
        v = genes[t]
        if v < -1 or v > max_order:
            return False
        if v >= 0:
            stop = t + mspan[v]
            if stop > n:
                return False
            for i in range(t + 1, stop):
                if genes[i] != -1:
                    return False
            t = stop
        else:
            t += 1
    return True
