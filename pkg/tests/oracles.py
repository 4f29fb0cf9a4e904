"""Independent reference computations used to freeze expected values.

Nothing here imports the package.  The scalar leap-frog estimator is
recomputed in extended precision with hand-written closed forms and adaptive
Simpson quadrature.
"""

import mpmath as mp


def _adaptive_simpson(f, a, b, tol, fa=None, fm=None, fb=None, whole=None, depth=0):
    if fa is None:
        fa, fb = f(a), f(b)
        fm = f((a + b) / 2)
        whole = (b - a) / 6 * (fa + 4 * fm + fb)
    m = (a + b) / 2
    lm, rm = (a + m) / 2, (m + b) / 2
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6 * (fa + 4 * flm + fm)
    right = (b - m) / 6 * (fm + 4 * frm + fb)
    if depth > 40 or abs(left + right - whole) <= 15 * tol:
        return left + right + (left + right - whole) / 15
    return _adaptive_simpson(f, a, m, tol / 2, fa, flm, fm, left, depth + 1) + _adaptive_simpson(
        f, m, b, tol / 2, fm, frm, fb, right, depth + 1
    )


def scalar_leapfrog_eta1(lam=1, u0=1, v0=0, k="0.1", T=1, dps=30, tol="1e-16"):
    """eta_1 for ``u'' + lam u = 0`` integrated by leap-frog, in extended precision."""
    with mp.workdps(dps):
        lam, u0, v0, k, T = (mp.mpf(x) for x in (lam, u0, v0, k, T))
        N = int(mp.nint(T / k))
        U = {0: u0, 1: u0 + k * v0 - k**2 / 2 * lam * u0}
        for n in range(1, N + 1):
            U[n + 1] = 2 * U[n] - U[n - 1] - k**2 * lam * U[n]
        Vh = {n: (U[n + 1] - U[n]) / k for n in range(0, N + 1)}  # Vh[n] = V^{n+1/2}
        Vh[-1] = 2 * v0 - Vh[0]
        U[-1] = U[0] - k * Vh[-1]
        Uh = {n: (U[n] + U[n + 1]) / 2 for n in range(-1, N + 1)}  # U^{n+1/2}
        Vn = {n: (Vh[n - 1] + Vh[n]) / 2 for n in range(0, N + 1)}  # V^n
        rU = {n: lam / 4 * (U[n + 1] - 2 * U[n] + U[n - 1]) for n in range(0, N + 1)}
        rV = {n: -(Vh[n + 1] - 2 * Vh[n] + Vh[n - 1]) / 4 for n in range(0, N)}

        def tn(n):
            return n * k

        def U1(t, m):  # on [t^{m-1/2}, t^{m+1/2}]
            return Uh[m - 1] + (t - tn(m - mp.mpf(1) / 2)) / k * (Uh[m] - Uh[m - 1])

        def V1(t, m):  # on [t^m, t^{m+1}]
            return Vn[m] + (t - tn(m)) / k * (Vn[m + 1] - Vn[m])

        def Vhat(t, m):
            s = t - tn(m - mp.mpf(1) / 2)
            return Vh[m - 1] - lam * (s * Uh[m - 1] + s**2 / (2 * k) * (Uh[m] - Uh[m - 1])) + s * rU[m]

        def Uhat(t, m):
            s = t - tn(m)
            return U[m] + s * Vn[m] + s**2 / (2 * k) * (Vn[m + 1] - Vn[m]) + s * rV[m]

        total = mp.mpf(0)
        for j in range(2 * N):
            m_node, m_stag = j // 2, (j + 1) // 2

            def g(t, m_node=m_node, m_stag=m_stag):
                R1 = -lam * (Uhat(t, m_node) - U1(t, m_stag)) - rU[m_stag]
                R2 = Vhat(t, m_stag) - V1(t, m_node) - rV[m_node]
                return mp.sqrt(lam * R2**2 + R1**2)

            total += _adaptive_simpson(g, j * k / 2, (j + 1) * k / 2, mp.mpf(tol))
        eU = u0 - U[0]
        eV = v0 - Vhat(mp.mpf(0), 0)
        e0sq = lam * eU**2 + eV**2
        return mp.sqrt(2 * e0sq + 4 * total**2)


if __name__ == "__main__":
    print(mp.nstr(scalar_leapfrog_eta1(), 25))
