"""Pure-Python (numpy/scipy) implementation of the stepping kernels.

This is the reference implementation and the fallback used when the
compiled ``_kernels`` extension is not available. The compiled module
exposes exactly the same classes and functions.

All zone kernels advance with implicit Euler::

    (I - dt*A) x_k = x_{k-1} + dt*B u_k

and report a single scalar output (the zone air temperature).
"""
import numpy as np
from scipy.linalg import lu_factor, lu_solve

BACKEND = "python"

STATUS_OK = 0
STATUS_SWEEPS = 1
STATUS_INNER = 2
STATUS_SINGULAR = 3


def _factor(m):
    lu, piv = lu_factor(m, check_finite=False)
    if not np.all(np.isfinite(lu)) or np.any(np.diag(lu) == 0.0):
        raise np.linalg.LinAlgError("singular iteration matrix")
    return lu, piv


class LTIStepper:
    """Cached implicit Euler stepper for a constant (A, B, C, D)."""

    def __init__(self, a, b, c, d, dt):
        a = np.ascontiguousarray(a, dtype=float)
        n = a.shape[0]
        self.n = n
        self.dt = float(dt)
        self._lu = _factor(np.eye(n) - self.dt * a)
        self.bdt = np.ascontiguousarray(self.dt * np.asarray(b, dtype=float))
        self.c = np.ascontiguousarray(c, dtype=float)
        self.d = np.ascontiguousarray(d, dtype=float)

    def step(self, x_prev, u):
        x = lu_solve(self._lu, x_prev + self.bdt @ u, check_finite=False)
        return x, self.c @ x + self.d @ u

    def run(self, inputs, x0):
        inputs = np.asarray(inputs, dtype=float)
        k = inputs.shape[0]
        xs = np.empty((k, self.n))
        ys = np.empty((k, self.c.shape[0]))
        x = np.asarray(x0, dtype=float)
        for j in range(k):
            x, y = self.step(x, inputs[j])
            xs[j] = x
            ys[j] = y
        return xs, ys


class _Zone:
    # series and coupling bookkeeping shared by all zone kernels
    def bind(self, inputs, inflows, coupling_cols, coupling_srcs):
        self.U = np.ascontiguousarray(inputs, dtype=float)
        self.Q = np.ascontiguousarray(inflows, dtype=float).reshape(self.U.shape[0], -1)
        self.cpl_cols = np.asarray(coupling_cols, dtype=np.intc)
        self.cpl_srcs = np.asarray(coupling_srcs, dtype=np.intc)
        self.u = np.zeros(self.U.shape[1])
        self.used = np.zeros(len(self.cpl_cols))

    def set_inflows(self, q):
        pass

    def commit(self):
        self.x_prev[:] = self.x


class LTIZone(_Zone):
    """Zone with a constant model; ``c`` and ``d`` select the air output."""

    def __init__(self, a, b, c, d, dt, x0):
        self.stepper = LTIStepper(a, b, np.atleast_2d(c), np.atleast_2d(d), dt)
        self.x_prev = np.array(x0, dtype=float)
        self.x = self.x_prev.copy()
        self.iterations = 0

    def advance(self, u):
        x, y = self.stepper.step(self.x_prev, u)
        self.x = x
        self.iterations = 1
        return float(y[0])


class TVZone(_Zone):
    """Full zone model whose air row varies with the inflow terms.

    Inflow term ``j`` adds ``-coef*q_j`` to ``A[air, air]`` and ``+coef*q_j``
    to ``B[air, cols[j]]``. The iteration matrix is refactored only when the
    inflows change.
    """

    def __init__(self, a0, b0, air, flow_cols, coef, dt, x0):
        self.a0 = np.array(a0, dtype=float)
        self.b0 = np.array(b0, dtype=float)
        self.air = int(air)
        self.flow_cols = np.asarray(flow_cols, dtype=np.intc)
        self.coef = float(coef)
        self.dt = float(dt)
        self.x_prev = np.array(x0, dtype=float)
        self.x = self.x_prev.copy()
        self.iterations = 0
        self.factorizations = 0
        self._q = None
        self.set_inflows(np.zeros(len(self.flow_cols)))

    def set_inflows(self, q):
        q = np.asarray(q, dtype=float)
        if self._q is not None and np.array_equal(q, self._q):
            return
        self._q = q.copy()
        a = self.a0.copy()
        b = self.b0.copy()
        a[self.air, self.air] -= self.coef * q.sum()
        for col, qj in zip(self.flow_cols, q):
            b[self.air, col] += self.coef * qj
        n = a.shape[0]
        self._lu = _factor(np.eye(n) - self.dt * a)
        self.bdt = self.dt * b
        self.factorizations += 1

    def advance(self, u):
        self.x = lu_solve(self._lu, self.x_prev + self.bdt @ u, check_finite=False)
        self.iterations = 1
        return float(self.x[self.air])


class SeparateZone(_Zone):
    """Reduced envelope plus full-order air node, coupled by fixed point.

    The envelope kernel receives the extended input ``(u, s)`` where ``s`` is
    the current air-temperature estimate. Only the projection of the
    reconstructed envelope temperatures onto the air row is needed, so the
    caller passes ``g = a21 @ Cr`` and ``h = a21 @ Dr`` (length m+1).
    """

    def __init__(self, ar, br, g, h, a22, b2, flow_cols, coef, dt, xr0, x2_0,
                 iteration_eps, max_iterations):
        ar = np.asarray(ar, dtype=float)
        br = np.asarray(br, dtype=float)
        self.dt = float(dt)
        nr = ar.shape[0]
        self._lu = _factor(np.eye(nr) - self.dt * ar)
        self.bdt_u = self.dt * br[:, :-1]
        self.bdt_s = self.dt * br[:, -1]
        self.g = np.asarray(g, dtype=float)
        self.h_u = np.asarray(h, dtype=float)[:-1]
        self.h_s = float(np.asarray(h, dtype=float)[-1])
        self.a22_0 = float(a22)
        self.b2_0 = np.asarray(b2, dtype=float)
        self.flow_cols = np.asarray(flow_cols, dtype=np.intc)
        self.coef = float(coef)
        self.eps = float(iteration_eps)
        self.max_iterations = int(max_iterations)
        self.feedback = bool((np.any(self.bdt_s != 0.0) or self.h_s != 0.0)
                             and (np.any(self.g != 0.0) or np.any(self.h_u != 0.0)
                                  or self.h_s != 0.0))
        self.x_prev = np.array(xr0, dtype=float)
        self.x = self.x_prev.copy()
        self.x2_prev = float(x2_0)
        self.x2 = self.x2_prev
        self.s = self.x2_prev
        self.s_in = self.x2_prev
        self.iterations = 0
        self.residual = 0.0
        self.set_inflows(np.zeros(len(self.flow_cols)))

    def set_inflows(self, q):
        q = np.asarray(q, dtype=float)
        self.a22 = self.a22_0 - self.coef * q.sum()
        b2 = self.b2_0.copy()
        for col, qj in zip(self.flow_cols, q):
            b2[col] += self.coef * qj
        self.b2 = b2

    def advance(self, u):
        base = self.x_prev + self.bdt_u @ u
        hu = self.h_u @ u
        air_base = self.x2_prev + self.dt * (self.b2 @ u)
        denom = 1.0 - self.dt * self.a22
        s = self.s
        for it in range(1, self.max_iterations + 1):
            self.s_in = s
            x = lu_solve(self._lu, base + self.bdt_s * s, check_finite=False)
            a21x1 = self.g @ x + hu + self.h_s * s
            x2 = (air_base + self.dt * a21x1) / denom
            res = abs(x2 - s)
            self.x = x
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

    def commit(self):
        self.x_prev[:] = self.x
        self.x2_prev = self.x2
        self.s = self.x2


def power_law(k, n, dp, dp_reg):
    """Flow ``k*sign(dp)*|dp|**n`` and its slope, odd cubic below ``dp_reg``.

    The cubic matches value and slope at ``|dp| = dp_reg``.
    """
    dp = np.asarray(dp, dtype=float)
    a = np.abs(dp)
    big = a >= dp_reg
    safe = np.where(big, a, dp_reg)
    q_big = k * safe ** n
    s_big = n * k * safe ** (n - 1.0)
    alpha = 0.5 * (3.0 - n) * k * dp_reg ** (n - 1.0)
    beta = 0.5 * (n - 1.0) * k * dp_reg ** (n - 3.0)
    q_small = alpha * a + beta * a ** 3
    s_small = alpha + 3.0 * beta * a * a
    q = np.sign(dp) * np.where(big, q_big, q_small)
    return q, np.where(big, s_big, s_small)


class NetworkSolver:
    """Damped Newton solver for the mass balances of a pressure network.

    ``src``/``dst`` index the zones at both ends of each link (-1 is the
    exterior, at pressure 0); ``base`` is ``Cd*A`` (0 for a closed link).
    Only the ``active`` zones are unknowns; those with ``free`` false keep
    their pressure. Driving pressure per link is the stack term
    ``-g*h*(rho_from - rho_to)`` plus ``0.5*cp*cos(dir - azimuth)*rho_out*v^2``
    on the exterior side (no cosine where ``azimuth`` is nan), with air
    density ``rho_t / (T + 273.15)``.
    """

    def __init__(self, src, dst, base, expo, height, cp, azimuth, active, free, g, rho_t,
                 dp_reg):
        self.src = np.asarray(src, dtype=np.intc)
        self.dst = np.asarray(dst, dtype=np.intc)
        self.base = np.asarray(base, dtype=float)
        self.expo = np.asarray(expo, dtype=float)
        self.height = np.asarray(height, dtype=float)
        self.cp = np.asarray(cp, dtype=float)
        self.azimuth = np.asarray(azimuth, dtype=float)
        self.wind_sign = np.where(self.src < 0, 1.0, -1.0)
        self.active = np.asarray(active, dtype=np.intc)
        self.free = np.asarray(free, dtype=bool)
        self.g, self.rho_t, self.dp_reg = g, rho_t, dp_reg
        nl = self.src.shape[0]
        pos = {int(z): i for i, z in enumerate(self.active)}
        inc = np.zeros((self.active.size, nl))
        for k in range(nl):
            if self.base[k] != 0.0:
                if self.src[k] in pos:
                    inc[pos[self.src[k]], k] -= 1.0
                if self.dst[k] in pos:
                    inc[pos[self.dst[k]], k] += 1.0
        self.inc = inc

    def driving(self, t_air, t_out, wind_speed, wind_dir):
        """Driving pressure and densities at the ``from``/``to`` ends."""
        rho = np.append(self.rho_t / (np.asarray(t_air, dtype=float) + 273.15),
                        self.rho_t / (t_out + 273.15))
        rho_from, rho_to = rho[self.src], rho[self.dst]
        dp = -self.g * self.height * (rho_from - rho_to)
        if wind_speed:
            cos = np.cos(np.radians(wind_dir - self.azimuth))
            cp = self.cp * np.where(np.isnan(cos), 1.0, cos)
            dp += self.wind_sign * 0.5 * cp * rho[-1] * wind_speed ** 2
        return dp, rho_from, rho_to

    def solve(self, t_air, t_out, wind_speed, wind_dir, p, q, max_iterations, tol):
        """Update zone pressures ``p`` and link flows ``q`` in place.

        Stops when the largest mass residual is at most ``0.1*tol``; each
        step is halved until the squared 2-norm of the residual decreases.
        Returns ``(status, iterations, residual)``, status 0 when the
        residual is at most ``tol``.
        """
        drive, rho_from, rho_to = self.driving(t_air, t_out, wind_speed, wind_dir)
        nz = p.shape[0]
        act, inc, free = self.active, self.inc, self.free
        ext = np.zeros(nz + 1)

        def residual(p):
            ext[:nz] = p
            dp = ext[self.src] - ext[self.dst] + drive
            rho = np.where(dp >= 0.0, rho_from, rho_to)
            qq, ss = power_law(self.base * np.sqrt(2.0 * rho), self.expo, dp, self.dp_reg)
            r = inc @ qq
            r[~free] = 0.0
            return qq, ss, r

        qq, ss, r = residual(p)
        norm = np.max(np.abs(r)) if r.size else 0.0
        it = 0
        while norm > 0.1 * tol and it < max_iterations:
            it += 1
            # d r_z / d p_j = -sum_k inc[z,k] s_k inc[j,k]
            J = -(inc * ss) @ inc.T
            J[~free] = 0.0
            J[~free, ~free] = 1.0
            try:
                delta = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                return STATUS_SINGULAR, it, float(norm)
            f0 = r @ r
            lam = 1.0
            while True:
                trial = p.copy()
                trial[act] += lam * delta
                q_t, s_t, r_t = residual(trial)
                if r_t @ r_t < (1.0 - 1e-4 * lam) * f0 or lam < 1e-6:
                    break
                lam *= 0.5
            p[:] = trial
            qq, ss, r = q_t, s_t, r_t
            norm = np.max(np.abs(r))
        q[:] = qq
        return (STATUS_OK if norm <= tol else STATUS_INNER), it, float(norm)


def run_building(zones, t_air, k0, k1, tol, max_sweeps, out_t, out_sweeps, out_iters,
                 commit=True):
    """Advance coupled zones from step ``k0`` to ``k1`` (exclusive).

    Zones are visited sequentially; coupling inputs take the latest air
    temperatures available. A zone is re-advanced in later sweeps only when
    one of its coupling inputs moved by ``tol`` or more since it was last
    used. Returns ``(status, step)``; ``status`` is 0 on success.
    """
    nz = len(zones)
    for k in range(k0, k1):
        row = k - k0
        for z in range(nz):
            zone = zones[z]
            zone.set_inflows(zone.Q[k])
            out_iters[row, z] = 0
        sweeps = 0
        converged = False
        while sweeps < max_sweeps:
            sweeps += 1
            moved = False
            for z in range(nz):
                zone = zones[z]
                u = zone.u
                u[:] = zone.U[k]
                stale = sweeps == 1
                for j in range(len(zone.cpl_cols)):
                    v = t_air[zone.cpl_srcs[j]]
                    u[zone.cpl_cols[j]] = v
                    if abs(v - zone.used[j]) >= tol:
                        stale = True
                if not stale:
                    continue
                zone.used[:] = u[zone.cpl_cols]
                y = zone.advance(u)
                if zone.iterations < 0:
                    out_sweeps[row] = sweeps
                    return STATUS_INNER, k
                out_iters[row, z] = max(out_iters[row, z], zone.iterations)
                t_air[z] = y
                moved = True
            if not moved:
                converged = True
                break
        out_sweeps[row] = sweeps - 1 if converged else sweeps
        if not converged:
            # the last sweep may still have moved; check inputs once more
            settled = True
            for z in range(nz):
                zone = zones[z]
                for j in range(len(zone.cpl_cols)):
                    if abs(t_air[zone.cpl_srcs[j]] - zone.used[j]) >= tol:
                        settled = False
            if not settled:
                return STATUS_SWEEPS, k
        out_t[row, :] = t_air
        if commit:
            for zone in zones:
                zone.commit()
    return STATUS_OK, k1
