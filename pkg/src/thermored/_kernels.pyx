# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernels (same API as ``_kernels_py``).

Matrices are stored C-contiguous. LAPACK sees such an array as its
transpose, so ``dgetrf`` factors ``M^T`` and ``dgetrs`` is called with
``trans='T'`` to solve ``M x = b``.
"""
import numpy as np
from libc.math cimport M_PI, cos, fabs, isnan, pow, sqrt
from scipy.linalg.cython_lapack cimport dgetrf, dgetrs

BACKEND = "cython"

STATUS_OK = 0
STATUS_SWEEPS = 1
STATUS_INNER = 2
STATUS_SINGULAR = 3


cdef int _factor(double[:, ::1] m, int[::1] piv) noexcept nogil:
    cdef int n = <int>m.shape[0]
    cdef int info = 0
    if n == 0:
        return 0
    dgetrf(&n, &n, &m[0, 0], &n, &piv[0], &info)
    return info


cdef int _solve(double[:, ::1] lu, int[::1] piv, double[::1] b) noexcept nogil:
    cdef int n = <int>lu.shape[0]
    cdef int nrhs = 1
    cdef int info = 0
    cdef char trans = b'T'
    if n == 0:
        return 0
    dgetrs(&trans, &n, &nrhs, &lu[0, 0], &n, &piv[0], &b[0], &n, &info)
    return info


cdef inline void _gemv_add(double[:, ::1] a, double[::1] x, double[::1] y) noexcept nogil:
    # y += a @ x
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(a.shape[0]):
        acc = 0.0
        for j in range(a.shape[1]):
            acc = acc + a[i, j] * x[j]
        y[i] = y[i] + acc


cdef inline double _dot(double[::1] a, double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc = acc + a[i] * b[i]
    return acc


def _owned(a, dtype=float):
    # private C-ordered writable copy (model matrices may be read-only)
    return np.array(a, dtype=dtype, order="C", copy=True)


def _singular():
    return np.linalg.LinAlgError("singular iteration matrix")


cdef class LTIStepper:
    """Cached implicit Euler stepper for a constant (A, B, C, D)."""
    cdef double[:, ::1] _lu
    cdef int[::1] _piv
    cdef double[:, ::1] _bdt
    cdef double[:, ::1] _c
    cdef double[:, ::1] _d
    cdef readonly int n
    cdef readonly double dt
    cdef readonly object bdt, c, d

    def __init__(self, a, b, c, d, dt):
        a = np.asarray(a, dtype=float)
        self.n = a.shape[0]
        self.dt = float(dt)
        m = _owned(np.eye(self.n) - self.dt * a)
        self._lu = m
        self._piv = np.zeros(max(self.n, 1), dtype=np.intc)
        if _factor(self._lu, self._piv) != 0:
            raise _singular()
        self.bdt = _owned(self.dt * np.asarray(b, dtype=float))
        self.c = _owned(c, dtype=float)
        self.d = _owned(d, dtype=float)
        self._bdt = self.bdt
        self._c = self.c
        self._d = self.d

    cdef void _step(self, double[::1] x_prev, double[::1] u, double[::1] x,
                    double[::1] y) noexcept nogil:
        cdef Py_ssize_t i
        for i in range(self.n):
            x[i] = x_prev[i]
        _gemv_add(self._bdt, u, x)
        _solve(self._lu, self._piv, x)
        for i in range(y.shape[0]):
            y[i] = 0.0
        _gemv_add(self._c, x, y)
        _gemv_add(self._d, u, y)

    def step(self, x_prev, u):
        cdef double[::1] xp = _owned(x_prev, dtype=float)
        cdef double[::1] uu = _owned(u, dtype=float)
        x = np.empty(self.n)
        y = np.empty(self.c.shape[0])
        self._step(xp, uu, x, y)
        return x, y

    def run(self, inputs, x0):
        cdef double[:, ::1] U = _owned(inputs, dtype=float)
        cdef Py_ssize_t k = U.shape[0], j
        xs = np.empty((k, self.n))
        ys = np.empty((k, self.c.shape[0]))
        cdef double[:, ::1] X = xs
        cdef double[:, ::1] Y = ys
        cdef double[::1] xp = np.array(x0, dtype=float)
        with nogil:
            for j in range(k):
                self._step(xp, U[j], X[j], Y[j])
                xp = X[j]
        return xs, ys


cdef class _Zone:
    cdef double[:, ::1] _U
    cdef double[:, ::1] _Q
    cdef int[::1] _cols
    cdef int[::1] _srcs
    cdef double[::1] _u
    cdef double[::1] _used
    cdef double[::1] _x
    cdef double[::1] _xp
    cdef public object U, Q, cpl_cols, cpl_srcs, u, used, x, x_prev
    cdef public int iterations

    def bind(self, inputs, inflows, coupling_cols, coupling_srcs):
        self.U = _owned(inputs, dtype=float)
        self.Q = np.ascontiguousarray(inflows, dtype=float).reshape(self.U.shape[0], -1)
        self.cpl_cols = np.ascontiguousarray(coupling_cols, dtype=np.intc)
        self.cpl_srcs = np.ascontiguousarray(coupling_srcs, dtype=np.intc)
        self.u = np.zeros(self.U.shape[1])
        self.used = np.zeros(len(self.cpl_cols))
        self._U = self.U
        self._Q = self.Q
        self._cols = self.cpl_cols if len(self.cpl_cols) else np.zeros(1, dtype=np.intc)
        self._srcs = self.cpl_srcs if len(self.cpl_srcs) else np.zeros(1, dtype=np.intc)
        self._u = self.u if len(self.u) else np.zeros(1)
        self._used = self.used if len(self.used) else np.zeros(1)

    cdef void _init_state(self, x0):
        self.x_prev = np.array(x0, dtype=float)
        self.x = self.x_prev.copy()
        self._xp = self.x_prev if len(self.x_prev) else np.zeros(1)
        self._x = self.x if len(self.x) else np.zeros(1)

    cdef int c_set_inflows(self, double[::1] q) noexcept:
        return 0

    cdef double c_advance(self, double[::1] u) noexcept nogil:
        return 0.0

    cdef void c_commit(self) noexcept nogil:
        cdef Py_ssize_t i
        for i in range(self._x.shape[0]):
            self._xp[i] = self._x[i]

    def set_inflows(self, q):
        if self.c_set_inflows(_owned(q, dtype=float).reshape(-1)
                              if len(q) else np.zeros(1)) != 0:
            raise _singular()

    def advance(self, u):
        cdef double[::1] uu = _owned(u, dtype=float)
        return self.c_advance(uu)

    def commit(self):
        self.c_commit()


cdef class LTIZone(_Zone):
    """Zone with a constant model; ``c`` and ``d`` select the air output."""
    cdef double[:, ::1] _lu
    cdef int[::1] _piv
    cdef double[:, ::1] _bdt
    cdef double[::1] _c
    cdef double[::1] _d
    cdef readonly object stepper

    def __init__(self, a, b, c, d, dt, x0):
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        self._lu = _owned(np.eye(n) - float(dt) * a)
        self._piv = np.zeros(max(n, 1), dtype=np.intc)
        if _factor(self._lu, self._piv) != 0:
            raise _singular()
        self._bdt = _owned(float(dt) * np.asarray(b, dtype=float))
        self._c = _owned(np.ravel(c), dtype=float)
        self._d = _owned(np.ravel(d), dtype=float)
        self._init_state(x0)
        self.iterations = 0

    cdef double c_advance(self, double[::1] u) noexcept nogil:
        cdef Py_ssize_t i
        for i in range(self._x.shape[0]):
            self._x[i] = self._xp[i]
        _gemv_add(self._bdt, u, self._x)
        _solve(self._lu, self._piv, self._x)
        self.iterations = 1
        return _dot(self._c, self._x) + _dot(self._d, u)


cdef class TVZone(_Zone):
    """Full zone model whose air row varies with the inflow terms."""
    cdef double[:, ::1] _a0
    cdef double[:, ::1] _b0
    cdef double[:, ::1] _lu
    cdef double[:, ::1] _bdt
    cdef int[::1] _piv
    cdef int[::1] _fcols
    cdef double[::1] _qlast
    cdef int _nf
    cdef bint _has
    cdef readonly int air
    cdef readonly double coef, dt
    cdef public int factorizations

    def __init__(self, a0, b0, air, flow_cols, coef, dt, x0):
        a0 = _owned(a0, dtype=float)
        n = a0.shape[0]
        self._a0 = a0
        self._b0 = _owned(b0, dtype=float)
        self._lu = np.zeros((n, n))
        self._bdt = np.zeros_like(np.asarray(b0, dtype=float))
        self._piv = np.zeros(max(n, 1), dtype=np.intc)
        fc = _owned(flow_cols, dtype=np.intc)
        self._nf = len(fc)
        self._fcols = fc if len(fc) else np.zeros(1, dtype=np.intc)
        self._qlast = np.zeros(max(self._nf, 1))
        self._has = False
        self.air = int(air)
        self.coef = float(coef)
        self.dt = float(dt)
        self.factorizations = 0
        self._init_state(x0)
        self.iterations = 0
        self.set_inflows(np.zeros(self._nf))

    cdef int c_set_inflows(self, double[::1] q) noexcept:
        cdef Py_ssize_t i, j, n = self._a0.shape[0], m = self._b0.shape[1]
        cdef bint same = self._has
        cdef double qs = 0.0
        for j in range(self._nf):
            if q[j] != self._qlast[j]:
                same = False
        if same:
            return 0
        for j in range(self._nf):
            self._qlast[j] = q[j]
            qs = qs + q[j]
        for i in range(n):
            for j in range(n):
                self._lu[i, j] = -self.dt * self._a0[i, j]
            self._lu[i, i] = self._lu[i, i] + 1.0
            for j in range(m):
                self._bdt[i, j] = self.dt * self._b0[i, j]
        self._lu[self.air, self.air] = self._lu[self.air, self.air] + self.dt * self.coef * qs
        for j in range(self._nf):
            self._bdt[self.air, self._fcols[j]] = (self._bdt[self.air, self._fcols[j]]
                                                   + self.dt * self.coef * q[j])
        self._has = True
        self.factorizations += 1
        return _factor(self._lu, self._piv)

    cdef double c_advance(self, double[::1] u) noexcept nogil:
        cdef Py_ssize_t i
        for i in range(self._x.shape[0]):
            self._x[i] = self._xp[i]
        _gemv_add(self._bdt, u, self._x)
        _solve(self._lu, self._piv, self._x)
        self.iterations = 1
        return self._x[self.air]


cdef class SeparateZone(_Zone):
    """Reduced envelope plus full-order air node, coupled by fixed point."""
    cdef double[:, ::1] _lu
    cdef int[::1] _piv
    cdef double[:, ::1] _bdt_u
    cdef double[::1] _bdt_s
    cdef double[::1] _g
    cdef double[::1] _h_u
    cdef double[::1] _b2_0
    cdef double[::1] _b2
    cdef double[::1] _base
    cdef int[::1] _fcols
    cdef int _nf
    cdef readonly double h_s, a22_0, a22, coef, dt, eps
    cdef readonly int max_iterations
    cdef readonly bint feedback
    cdef public double x2, x2_prev, s, s_in, residual

    def __init__(self, ar, br, g, h, a22, b2, flow_cols, coef, dt, xr0, x2_0,
                 iteration_eps, max_iterations):
        ar = np.asarray(ar, dtype=float)
        br = np.asarray(br, dtype=float)
        h = np.asarray(h, dtype=float)
        nr = ar.shape[0]
        self.dt = float(dt)
        self._lu = _owned(np.eye(nr) - self.dt * ar)
        self._piv = np.zeros(max(nr, 1), dtype=np.intc)
        if _factor(self._lu, self._piv) != 0:
            raise _singular()
        self._bdt_u = _owned(self.dt * br[:, :-1])
        self._bdt_s = _owned(self.dt * br[:, -1])
        self._g = _owned(g, dtype=float)
        self._h_u = _owned(h[:-1]) if len(h) > 1 else np.zeros(1)
        self.h_s = float(h[-1])
        self.a22_0 = float(a22)
        self.a22 = self.a22_0
        self._b2_0 = _owned(b2, dtype=float)
        self._b2 = np.array(self._b2_0)
        self._base = np.zeros(nr)
        fc = _owned(flow_cols, dtype=np.intc)
        self._nf = len(fc)
        self._fcols = fc if len(fc) else np.zeros(1, dtype=np.intc)
        self.coef = float(coef)
        self.eps = float(iteration_eps)
        self.max_iterations = int(max_iterations)
        bs = np.asarray(self._bdt_s)
        self.feedback = bool((np.any(bs != 0.0) or self.h_s != 0.0)
                             and (np.any(np.asarray(self._g) != 0.0)
                                  or np.any(np.asarray(h[:-1]) != 0.0) or self.h_s != 0.0))
        self._init_state(xr0)
        self.x2_prev = float(x2_0)
        self.x2 = self.x2_prev
        self.s = self.x2_prev
        self.s_in = self.x2_prev
        self.residual = 0.0
        self.iterations = 0

    cdef int c_set_inflows(self, double[::1] q) noexcept:
        cdef Py_ssize_t j
        cdef double qs = 0.0
        for j in range(self._b2.shape[0]):
            self._b2[j] = self._b2_0[j]
        for j in range(self._nf):
            qs = qs + q[j]
            self._b2[self._fcols[j]] = self._b2[self._fcols[j]] + self.coef * q[j]
        self.a22 = self.a22_0 - self.coef * qs
        return 0

    cdef double c_advance(self, double[::1] u) noexcept nogil:
        cdef Py_ssize_t i, nr = self._x.shape[0]
        cdef int it
        cdef double hu, air_base, denom, s, a21x1, x2 = 0.0, res
        for i in range(nr):
            self._base[i] = self._xp[i]
        _gemv_add(self._bdt_u, u, self._base)
        hu = _dot(self._h_u, u) if self._h_u.shape[0] == u.shape[0] else 0.0
        air_base = self.x2_prev + self.dt * _dot(self._b2, u)
        denom = 1.0 - self.dt * self.a22
        s = self.s
        for it in range(1, self.max_iterations + 1):
            self.s_in = s
            for i in range(nr):
                self._x[i] = self._base[i] + self._bdt_s[i] * s
            _solve(self._lu, self._piv, self._x)
            a21x1 = _dot(self._g, self._x) + hu + self.h_s * s
            x2 = (air_base + self.dt * a21x1) / denom
            res = fabs(x2 - s)
            self.x2 = x2
            self.residual = res
            self.iterations = it
            if res < self.eps or not self.feedback:
                self.s = x2
                return x2
            s = x2
        self.s = x2
        self.iterations = -self.max_iterations
        return x2

    cdef void c_commit(self) noexcept nogil:
        cdef Py_ssize_t i
        for i in range(self._x.shape[0]):
            self._xp[i] = self._x[i]
        self.x2_prev = self.x2
        self.s = self.x2


cdef inline void _power_law(double k, double n, double dp, double dp_reg,
                            double* q, double* s) noexcept nogil:
    cdef double a = fabs(dp), alpha, beta
    if a >= dp_reg:
        q[0] = k * pow(a, n)
        s[0] = n * k * pow(a, n - 1.0)
    else:
        alpha = 0.5 * (3.0 - n) * k * pow(dp_reg, n - 1.0)
        beta = 0.5 * (n - 1.0) * k * pow(dp_reg, n - 3.0)
        q[0] = alpha * a + beta * a * a * a
        s[0] = alpha + 3.0 * beta * a * a
    if dp < 0.0:
        q[0] = -q[0]


def power_law(k, n, dp, dp_reg):
    """Vectorized flow and slope of the regularized power law."""
    k, n, dp = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(n, dtype=float),
                                   np.asarray(dp, dtype=float))
    cdef double[::1] kv = _owned(k.ravel()), nv = _owned(n.ravel()), dv = _owned(dp.ravel())
    q = np.empty(kv.shape[0])
    sl = np.empty(kv.shape[0])
    cdef double[::1] qv = q, sv = sl
    cdef Py_ssize_t i
    for i in range(kv.shape[0]):
        _power_law(kv[i], nv[i], dv[i], dp_reg, &qv[i], &sv[i])
    return q.reshape(dp.shape), sl.reshape(dp.shape)


cdef class NetworkSolver:
    """Damped Newton solver for the mass balances of a pressure network.

    Same contract as the pure-Python ``NetworkSolver``.
    """
    cdef int[::1] src, dst, active, pos
    cdef double[::1] base, expo, height, cp, azimuth
    cdef unsigned char[::1] free
    cdef double g, rho_t, dp_reg
    cdef double[::1] drive, rho_from, rho_to, sl, r, r_t, q_t, s_t, delta, trial, rho
    cdef double[:, ::1] J
    cdef int[::1] piv

    def __init__(self, src, dst, base, expo, height, cp, azimuth, active, free, double g,
                 double rho_t, double dp_reg):
        self.src = _owned(src, np.intc)
        self.dst = _owned(dst, np.intc)
        self.base = _owned(base)
        self.expo = _owned(expo)
        self.height = _owned(height)
        self.cp = _owned(cp)
        self.azimuth = _owned(azimuth)
        self.active = _owned(active, np.intc)
        self.free = _owned(np.asarray(free, dtype=bool), np.uint8)
        self.g, self.rho_t, self.dp_reg = g, rho_t, dp_reg
        cdef Py_ssize_t nl = self.src.shape[0], na = self.active.shape[0], i
        cdef int nz = 0
        for i in range(nl):
            nz = max(nz, self.src[i] + 1, self.dst[i] + 1)
        for i in range(na):
            nz = max(nz, self.active[i] + 1)
        self.pos = np.full(nz, -1, dtype=np.intc)
        for i in range(na):
            self.pos[self.active[i]] = <int>i
        self.drive = np.zeros(nl)
        self.rho_from = np.zeros(nl)
        self.rho_to = np.zeros(nl)
        self.sl = np.zeros(nl)
        self.q_t = np.zeros(nl)
        self.s_t = np.zeros(nl)
        self.r = np.zeros(na)
        self.r_t = np.zeros(na)
        self.delta = np.zeros(na)
        self.J = np.zeros((na, na))
        self.piv = np.zeros(max(na, 1), dtype=np.intc)

    cdef double _residual(self, double[::1] p, double[::1] q, double[::1] s,
                          double[::1] r) noexcept nogil:
        # fills q, s and r; returns the squared 2-norm of r
        cdef Py_ssize_t k, i
        cdef double pa, pb, dp, rho, acc = 0.0
        for i in range(r.shape[0]):
            r[i] = 0.0
        for k in range(self.src.shape[0]):
            if self.base[k] == 0.0:
                q[k] = 0.0
                s[k] = 0.0
                continue
            pa = p[self.src[k]] if self.src[k] >= 0 else 0.0
            pb = p[self.dst[k]] if self.dst[k] >= 0 else 0.0
            dp = pa - pb + self.drive[k]
            rho = self.rho_from[k] if dp >= 0.0 else self.rho_to[k]
            _power_law(self.base[k] * sqrt(2.0 * rho), self.expo[k], dp, self.dp_reg,
                       &q[k], &s[k])
            if self.src[k] >= 0 and self.pos[self.src[k]] >= 0:
                r[self.pos[self.src[k]]] -= q[k]
            if self.dst[k] >= 0 and self.pos[self.dst[k]] >= 0:
                r[self.pos[self.dst[k]]] += q[k]
        for i in range(r.shape[0]):
            if not self.free[i]:
                r[i] = 0.0
            acc = acc + r[i] * r[i]
        return acc

    def driving(self, t_air, double t_out, double wind_speed, double wind_dir):
        """Driving pressure and densities at the ``from``/``to`` ends."""
        self._driving(_owned(t_air), t_out, wind_speed, wind_dir)
        return np.asarray(self.drive).copy(), np.asarray(self.rho_from).copy(), \
            np.asarray(self.rho_to).copy()

    cdef void _driving(self, double[::1] t_air, double t_out, double wind_speed,
                       double wind_dir) noexcept:
        cdef Py_ssize_t k
        cdef double rho_out = self.rho_t / (t_out + 273.15), c, w
        for k in range(self.src.shape[0]):
            self.rho_from[k] = self.rho_t / (t_air[self.src[k]] + 273.15) \
                if self.src[k] >= 0 else rho_out
            self.rho_to[k] = self.rho_t / (t_air[self.dst[k]] + 273.15) \
                if self.dst[k] >= 0 else rho_out
            self.drive[k] = -self.g * self.height[k] * (self.rho_from[k] - self.rho_to[k])
            if wind_speed != 0.0 and self.cp[k] != 0.0:
                c = 1.0 if isnan(self.azimuth[k]) else cos((wind_dir - self.azimuth[k]) * M_PI / 180.0)
                w = 0.5 * self.cp[k] * c * rho_out * wind_speed * wind_speed
                self.drive[k] += w if self.src[k] < 0 else -w

    def solve(self, t_air, double t_out, double wind_speed, double wind_dir,
              double[::1] p, double[::1] q, int max_iterations, double tol):
        """Update zone pressures ``p`` and link flows ``q`` in place."""
        cdef double[::1] ta = np.ascontiguousarray(t_air, dtype=float)
        self._driving(ta, t_out, wind_speed, wind_dir)
        cdef Py_ssize_t nz = p.shape[0], nl = self.src.shape[0], na = self.active.shape[0]
        cdef Py_ssize_t i, j, k
        cdef double[::1] trial = np.empty(nz)
        cdef double f0, f_t, lam, norm, w
        cdef int it = 0, a, b
        cdef double[:, ::1] J = self.J
        f0 = self._residual(p, q, self.sl, self.r)
        norm = 0.0
        for i in range(na):
            norm = max(norm, fabs(self.r[i]))
        while norm > 0.1 * tol and it < max_iterations:
            it += 1
            for i in range(na):
                for j in range(na):
                    J[i, j] = 0.0
            for k in range(nl):
                if self.base[k] == 0.0:
                    continue
                a = self.pos[self.src[k]] if self.src[k] >= 0 else -1
                b = self.pos[self.dst[k]] if self.dst[k] >= 0 else -1
                w = self.sl[k]
                if a >= 0:
                    J[a, a] -= w
                if b >= 0:
                    J[b, b] -= w
                if a >= 0 and b >= 0:
                    J[a, b] += w
                    J[b, a] += w
            for i in range(na):
                if not self.free[i]:
                    for j in range(na):
                        J[i, j] = 0.0
                    J[i, i] = 1.0
                self.delta[i] = -self.r[i]
            if _factor(J, self.piv) != 0:
                return STATUS_SINGULAR, it, norm
            _solve(J, self.piv, self.delta)
            lam = 1.0
            while True:
                for i in range(nz):
                    trial[i] = p[i]
                for i in range(na):
                    trial[self.active[i]] += lam * self.delta[i]
                f_t = self._residual(trial, self.q_t, self.s_t, self.r_t)
                if f_t < (1.0 - 1e-4 * lam) * f0 or lam < 1e-6:
                    break
                lam *= 0.5
            for i in range(nz):
                p[i] = trial[i]
            for k in range(nl):
                q[k] = self.q_t[k]
                self.sl[k] = self.s_t[k]
            norm = 0.0
            for i in range(na):
                self.r[i] = self.r_t[i]
                norm = max(norm, fabs(self.r[i]))
            f0 = f_t
        return (STATUS_OK if norm <= tol else STATUS_INNER), it, norm


def run_building(list zones, double[::1] t_air, int k0, int k1, double tol, int max_sweeps,
                 double[:, ::1] out_t, int[::1] out_sweeps, int[:, ::1] out_iters,
                 bint commit=True):
    """Advance coupled zones from step ``k0`` to ``k1`` (exclusive).

    Same contract as the pure-Python ``run_building``.
    """
    cdef Py_ssize_t nz = len(zones), z, j, row
    cdef int k, sweeps, nc
    cdef bint converged, moved, stale, settled
    cdef double v, y
    cdef _Zone zone
    for k in range(k0, k1):
        row = k - k0
        for z in range(nz):
            zone = <_Zone>zones[z]
            if zone.c_set_inflows(zone._Q[k]) != 0:
                return STATUS_SINGULAR, k
            out_iters[row, z] = 0
        sweeps = 0
        converged = False
        while sweeps < max_sweeps:
            sweeps += 1
            moved = False
            for z in range(nz):
                zone = <_Zone>zones[z]
                nc = <int>len(zone.cpl_cols)
                for j in range(zone._U.shape[1]):
                    zone._u[j] = zone._U[k, j]
                stale = sweeps == 1
                for j in range(nc):
                    v = t_air[zone._srcs[j]]
                    zone._u[zone._cols[j]] = v
                    if fabs(v - zone._used[j]) >= tol:
                        stale = True
                if not stale:
                    continue
                for j in range(nc):
                    zone._used[j] = zone._u[zone._cols[j]]
                y = zone.c_advance(zone._u)
                if zone.iterations < 0:
                    out_sweeps[row] = sweeps
                    return STATUS_INNER, k
                if zone.iterations > out_iters[row, z]:
                    out_iters[row, z] = zone.iterations
                t_air[z] = y
                moved = True
            if not moved:
                converged = True
                break
        out_sweeps[row] = sweeps - 1 if converged else sweeps
        if not converged:
            settled = True
            for z in range(nz):
                zone = <_Zone>zones[z]
                nc = <int>len(zone.cpl_cols)
                for j in range(nc):
                    if fabs(t_air[zone._srcs[j]] - zone._used[j]) >= tol:
                        settled = False
            if not settled:
                return STATUS_SWEEPS, k
        for z in range(nz):
            out_t[row, z] = t_air[z]
        if commit:
            for z in range(nz):
                (<_Zone>zones[z]).c_commit()
    return STATUS_OK, k1
