"""Time integration of the kinetic dynamics and of its diffusion limit.

The kinetic step is a Strang composition: half collision step, full
transport step, half collision step.  Collision halves are exact
exponentials (time relaxation) or Crank-Nicolson solves (Fokker-Planck,
scattering); the transport step is classical RK4, which on an antisymmetric
matrix is norm-nonincreasing for dt * |T| <= 2*sqrt(2).  Every substep is
therefore a contraction of the weighted norm, so the plain entropy is
monotone unconditionally and the total mass functional is annihilated by
construction; the modified entropy is monitored at every step.

The rescaled dynamics (collisions at 1/eps^2, transport at 1/eps) reuse the
same stepper, which is what the diffusion-limit check drives toward the
macroscopic drift-diffusion solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .equilibria import EnergyProfile, GibbsState, Potential, build_gibbs_state, suggest_grid
from .errors import FitError, IntegrationDivergedError, StructureViolationError
from .operators import Field, OperatorSet, assemble_operator_set, random_field

__all__ = [
    "Scenario",
    "TimeSeries",
    "DensitySeries",
    "integrate",
    "fit_decay_rate",
    "drift_diffusion_solve",
    "drift_diffusion_generator",
    "diffusion_limit_check",
    "equilibrium_perturbation",
    "run_scenario",
]


# ---------------------------------------------------------------------------
# scenario description
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """Declarative description of one kinetic run."""

    collision: str = "bgk"
    potential_kind: str = "power_law"
    beta: float = 1.0
    curvature: float = 1.0
    potential_path: str | None = None
    profile_kind: str = "maxwellian"
    m: float = 0.0
    d: int = 1
    n_x: int = 96
    n_v: int = 96
    t_end: float = 10.0
    dt: float | None = None
    eps: float | None = None          # entropy parameter; None = certificate value
    initial: str = "random_zero_mass"
    initial_path: str | None = None
    seed: int = 0
    tail_ratio: float = 1e-30
    sample_stride: int | None = None
    store_densities: bool = False
    strict: bool = False
    kernel: object = None

    def make_potential(self) -> Potential:
        if self.potential_kind == "power_law":
            return Potential.power_law(self.beta)
        if self.potential_kind == "quadratic":
            return Potential.quadratic(self.curvature)
        if self.potential_kind == "tabulated":
            if self.potential_path is None:
                raise ValueError("tabulated potential needs a file path")
            return Potential.from_table(self.potential_path)
        raise ValueError(f"unknown potential kind {self.potential_kind!r}")

    def make_profile(self) -> EnergyProfile:
        if self.profile_kind == "maxwellian":
            return EnergyProfile.maxwellian()
        return EnergyProfile.polytropic(self.m, self.d)

    def initial_path_for(self, what: str) -> str:
        if self.initial_path is None:
            raise ValueError(f"scenario needs a file path for the {what}")
        return self.initial_path


# ---------------------------------------------------------------------------
# time series
# ---------------------------------------------------------------------------

@dataclass
class TimeSeries:
    """Sampled diagnostics along one trajectory."""

    t: np.ndarray
    mass: np.ndarray
    norm: np.ndarray
    entropy: np.ndarray
    dissipation: np.ndarray
    norm_pi: np.ndarray
    norm_perp: np.ndarray
    densities: np.ndarray | None = None
    entropy_monotone: bool = True
    max_entropy_increase: float = 0.0
    final: Field | None = None

    def columns(self):
        return np.column_stack([self.t, self.mass, self.norm, self.entropy,
                                self.dissipation, self.norm_pi, self.norm_perp])


# ---------------------------------------------------------------------------
# collision half-step caches
# ---------------------------------------------------------------------------

class _CollisionHalf:
    """Precomputed half-step propagator for one (operator, dt) pair."""

    def __init__(self, ops: OperatorSet, dt: float, scale: float):
        self.ops = ops
        coll = ops.collision
        self.kind = coll.kind
        if self.kind == "bgk":
            self.decay = float(np.exp(-0.5 * dt * scale))
        else:
            a = 0.25 * dt * scale
            self.a = a
            self.l_mat = coll.v_mat
            if self.kind == "fokker_planck":
                n_v = ops.grid.n_v
                ab = np.zeros((2, n_v))
                ab[1] = 1.0 - a * np.diag(self.l_mat)
                ab[0, 1:] = -a * np.diag(self.l_mat, 1)
                self.ab = ab
            else:
                mat = np.eye(ops.grid.n_v) - a * self.l_mat
                self.cf = sla.cho_factor(mat, check_finite=False)

    def apply(self, h: np.ndarray) -> np.ndarray:
        if self.kind == "bgk":
            pih = self.ops.project(h)
            return pih + self.decay * (h - pih)
        rhs = h + self.a * (h @ self.l_mat.T)
        if self.kind == "fokker_planck":
            return sla.solveh_banded(self.ab, rhs.T, check_finite=False).T
        return sla.cho_solve(self.cf, rhs.T, check_finite=False).T


# ---------------------------------------------------------------------------
# integrate
# ---------------------------------------------------------------------------

def transport_step_bound(ops: OperatorSet, transport_scale: float = 1.0) -> float:
    """Largest dt for which the RK4 transport step cannot amplify the norm."""
    return 2.5 / (ops.transport.norm_bound * transport_scale)


def integrate(ops: OperatorSet, f0: Field, t_end: float, dt: float | None = None,
              eps: float = 0.0, sample_stride: int | None = None,
              store_densities: bool = False, collision_scale: float = 1.0,
              transport_scale: float = 1.0, stability_frac: float = 0.25,
              enforce_stability: bool = True,
              entropy_tol: float = 1e-9) -> TimeSeries:
    """Advance d_t f = (L - T) f and log conservation/entropy diagnostics.

    ``dt = None`` picks ``stability_frac`` times the documented transport
    step bound and rounds so the horizon is an integer number of steps.
    The modified entropy at the supplied eps is checked at every step; an
    increase beyond ``entropy_tol`` (relative) raises
    ``StructureViolationError``, tiny rounding-level increases are recorded
    in ``max_entropy_increase``.
    """
    grid, state = ops.grid, ops.state
    bound = transport_step_bound(ops, transport_scale)
    if dt is None:
        dt = stability_frac * bound
        n_steps = max(1, int(np.ceil(t_end / dt)))
        dt = t_end / n_steps
    else:
        n_steps = int(round(t_end / dt))
        if abs(n_steps * dt - t_end) > 1e-12 * t_end or n_steps < 1:
            raise ValueError("t_end must be an integer multiple of dt")
        if enforce_stability and dt > bound:
            raise ValueError(
                f"dt = {dt:.3e} violates the transport stability bound {bound:.3e}")
    if sample_stride is None:
        sample_stride = max(1, n_steps // 400)

    tmat = (ops.transport.matrix * (-transport_scale)).tocsr()
    half = _CollisionHalf(ops, dt, collision_scale)
    # restart path: reuse the exact internal state when present so composing
    # runs reproduces a single run bit for bit
    cached = getattr(f0, "h_cache", None)
    h = cached.copy() if cached is not None else ops.to_h(f0).copy()
    sqrt_f = state.sqrt_F
    cell = grid.cell

    def entropy_of(hh):
        val = 0.5 * cell * float(np.vdot(hh, hh))
        if eps > 0.0:
            val += eps * cell * float(np.vdot(ops.apply_A(hh), hh))
        return val

    samples = {k: [] for k in ("t", "mass", "norm", "entropy", "dissipation",
                               "norm_pi", "norm_perp")}
    densities = [] if store_densities else None

    def record(tval, hh):
        mass = cell * float(np.vdot(sqrt_f, hh))
        norm2 = cell * float(np.vdot(hh, hh))
        if not np.isfinite(norm2):
            raise IntegrationDivergedError(tval, last_state=ops.to_field(h_prev))
        pih = ops.project(hh)
        npi2 = cell * float(np.vdot(pih, pih))
        diss, _ = ops.dissipation_h(hh, eps)
        samples["t"].append(tval)
        samples["mass"].append(mass)
        samples["norm"].append(np.sqrt(norm2))
        samples["entropy"].append(entropy_of(hh))
        samples["dissipation"].append(diss)
        samples["norm_pi"].append(np.sqrt(max(npi2, 0.0)))
        samples["norm_perp"].append(np.sqrt(max(norm2 - npi2, 0.0)))
        if densities is not None:
            densities.append(np.sum(sqrt_f * hh, axis=1) * grid.dv)

    h_prev = h
    record(0.0, h)
    h_entropy = entropy_of(h)
    monotone, worst_up = True, 0.0

    for n in range(n_steps):
        h_prev = h
        h = half.apply(h)
        flat = h.ravel()
        k1 = tmat @ flat
        k2 = tmat @ (flat + 0.5 * dt * k1)
        k3 = tmat @ (flat + 0.5 * dt * k2)
        k4 = tmat @ (flat + dt * k3)
        flat = flat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        h = half.apply(flat.reshape(h.shape))

        new_entropy = entropy_of(h)
        if not np.isfinite(new_entropy):
            raise IntegrationDivergedError((n + 1) * dt, last_state=ops.to_field(h_prev))
        rise = new_entropy - h_entropy
        if rise > 0.0:
            rel = rise / max(h_entropy, 1e-300)
            worst_up = max(worst_up, rel)
            if rel > 1e-12:
                monotone = False
            if rel > entropy_tol:
                raise StructureViolationError(
                    f"modified entropy rose by {rel:.2e} (relative) at step {n + 1}; "
                    "this signals a discretization or parameter bug")
        h_entropy = new_entropy
        if (n + 1) % sample_stride == 0 or n == n_steps - 1:
            record((n + 1) * dt, h)

    final = ops.to_field(h)
    final.h_cache = h
    return TimeSeries(
        t=np.array(samples["t"]), mass=np.array(samples["mass"]),
        norm=np.array(samples["norm"]), entropy=np.array(samples["entropy"]),
        dissipation=np.array(samples["dissipation"]),
        norm_pi=np.array(samples["norm_pi"]), norm_perp=np.array(samples["norm_perp"]),
        densities=np.array(densities) if densities is not None else None,
        entropy_monotone=monotone, max_entropy_increase=worst_up,
        final=final)


# ---------------------------------------------------------------------------
# decay-rate fitting
# ---------------------------------------------------------------------------

def _linear_fit(t: np.ndarray, logy: np.ndarray):
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((logy - np.mean(logy)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return -slope, r2


def _envelope_fit(t: np.ndarray, y: np.ndarray):
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    idx = np.where(inner)[0] + 1
    if idx.size < 5:
        return None
    return _linear_fit(t[idx], np.log(y[idx]))


def fit_decay_rate(t, values, window: tuple | None = None):
    """Least-squares exponential rate of a positive sampled signal.

    Fits ``log values`` over the window (default: the second half of the
    run); when the log residuals oscillate the sequence of local maxima is
    fitted instead (the envelope of a rotating decay).  Windows are widened
    automatically while the fit quality is poor.  Returns
    ``(rate, r_squared)``; raises ``FitError`` for short windows or signals
    at the rounding floor.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.size != values.size or t.size < 4:
        raise FitError("need matching t/value arrays with several samples")
    floor = np.max(np.abs(values)) * 1e-13
    windows = ([window] if window is not None
               else [(0.5 * t[-1], t[-1]), (t[-1] / 3.0, t[-1]), (2.0 * t[-1] / 3.0, t[-1])])
    best = None
    for lo, hi in windows:
        sel = (t >= lo) & (t <= hi) & (values > floor) & (values > 0)
        if np.count_nonzero(sel) < 20:
            continue
        tw, yw = t[sel], values[sel]
        rate, r2 = _linear_fit(tw, np.log(yw))
        cand = (r2, rate)
        env = _envelope_fit(tw, yw)
        if env is not None and (r2 < 0.999 or env[1] > r2):
            if env[1] > r2:
                cand = (env[1], env[0])
        if best is None or cand[0] > best[0]:
            best = cand
        if best[0] >= 0.999 and window is None:
            break
    if best is None:
        raise FitError("no usable window: too few samples above the rounding floor")
    r2, rate = best
    return rate, r2


# ---------------------------------------------------------------------------
# drift-diffusion limit equations
# ---------------------------------------------------------------------------

@dataclass
class DensitySeries:
    t: np.ndarray
    rho: np.ndarray           # (n_samples, n_x)
    mass: np.ndarray


def drift_diffusion_generator(state: GibbsState,
                              rho_sigma: np.ndarray | None = None) -> np.ndarray:
    """Dense generator M of the macroscopic density equation
    ``d_t rho = d_x(rho_F sigma d_x(rho / rho_F)) = -M rho``.

    Default coefficient is the raw second moment (the time-relaxation
    value); flux form with geometric-mean face weights, so mass columns sum
    to zero exactly.
    """
    if rho_sigma is None:
        rho_sigma = state.s2
    dx = state.grid.dx
    n = state.grid.n_x
    a_half = np.sqrt(rho_sigma[:-1] * rho_sigma[1:])
    stiff = np.zeros((n, n))
    idx = np.arange(n - 1)
    stiff[idx, idx + 1] = -a_half / dx ** 2
    stiff[idx + 1, idx] = -a_half / dx ** 2
    diag = np.zeros(n)
    diag[:-1] += a_half / dx ** 2
    diag[1:] += a_half / dx ** 2
    stiff[np.arange(n), np.arange(n)] = diag
    return stiff / state.rho[None, :]


def drift_diffusion_solve(state: GibbsState, rho0: np.ndarray, t_end: float,
                          dt: float | None = None,
                          rho_sigma: np.ndarray | None = None,
                          sample_stride: int | None = None) -> DensitySeries:
    """Crank-Nicolson integration of the macroscopic density equation.

    Mass is conserved exactly by the flux form; for zero-mass data the
    density relaxes to zero at the macroscopic gap rate.
    """
    gen = drift_diffusion_generator(state, rho_sigma)
    if dt is None:
        lam_max = float(np.max(np.abs(np.diag(gen)))) * 2.0
        dt = min(0.05, 1.0 / lam_max) if lam_max > 0 else 0.05
        n_steps = max(1, int(np.ceil(t_end / dt)))
        dt = t_end / n_steps
    else:
        n_steps = int(round(t_end / dt))
        if abs(n_steps * dt - t_end) > 1e-12 * t_end:
            raise ValueError("t_end must be an integer multiple of dt")
    if sample_stride is None:
        sample_stride = max(1, n_steps // 400)
    n = state.grid.n_x
    lu = sla.lu_factor(np.eye(n) + 0.5 * dt * gen, check_finite=False)
    right = np.eye(n) - 0.5 * dt * gen
    rho = np.asarray(rho0, dtype=float).copy()
    ts, rhos, mass = [0.0], [rho.copy()], [np.sum(rho) * state.grid.dx]
    for k in range(n_steps):
        rho = sla.lu_solve(lu, right @ rho, check_finite=False)
        if not np.all(np.isfinite(rho)):
            raise IntegrationDivergedError((k + 1) * dt)
        if (k + 1) % sample_stride == 0 or k == n_steps - 1:
            ts.append((k + 1) * dt)
            rhos.append(rho.copy())
            mass.append(np.sum(rho) * state.grid.dx)
    return DensitySeries(t=np.array(ts), rho=np.array(rhos), mass=np.array(mass))


def equilibrium_perturbation(state: GibbsState, u0=None) -> Field:
    """Local-equilibrium fluctuation ``f = u0(x) F`` with zero total mass.

    The default bump sits off center so that generic (odd and even) spatial
    modes are excited.
    """
    x = state.grid.x
    if u0 is None:
        prof = np.exp(-(3.0 * (x - 0.2 * state.grid.x_max) / state.grid.x_max) ** 2)
    elif callable(u0):
        prof = np.asarray(u0(x), dtype=float)
    else:
        prof = np.asarray(u0, dtype=float)
    prof = prof - np.sum(prof * state.rho) / np.sum(state.rho)
    return Field(state.grid, prof[:, None] * state.F)


def _limit_density_series(ops: OperatorSet, rho0: np.ndarray, t_end: float,
                          n_compare: int) -> np.ndarray:
    """Macroscopic limit densities on the kinetic system's own stiffness.

    For time-relaxation collisions the collision inverse is minus the
    identity transverse to the equilibria, so the exact limit generator of
    the discrete dynamics is the macroscopic stiffness B itself (in the
    density-ratio variable).  Crank-Nicolson at a fine step; samples at the
    comparison times.
    """
    state = ops.state
    u = rho0 / state.rho
    sub = 100
    dt = t_end / (n_compare * sub)
    lu = sla.lu_factor(np.eye(state.grid.n_x) + 0.5 * dt * ops.B, check_finite=False)
    right = np.eye(state.grid.n_x) - 0.5 * dt * ops.B
    out = [state.rho * u]
    for _ in range(n_compare):
        for _ in range(sub):
            u = sla.lu_solve(lu, right @ u, check_finite=False)
        out.append(state.rho * u)
    return np.array(out)


def diffusion_limit_check(ops: OperatorSet, eps_list, t_end: float = 1.0,
                          u0=None, n_compare: int = 40,
                          micro_amplitude: float = 0.5):
    """Rescaled kinetic runs against the macroscopic limit equation.

    For each scaling eps the kinetic equation is integrated with collisions
    at 1/eps^2 and transport at 1/eps; the table reports the sup-in-time
    weighted density discrepancy against the limit solution and the ratios
    between consecutive eps values.  The initial datum carries a
    density-free microscopic component (``micro_amplitude`` relative), so a
    generic first-order initial layer is present; a fully prepared datum
    (amplitude 0) converges faster.
    """
    state = ops.state
    grid = state.grid
    eps_list = sorted(eps_list, reverse=True)
    f_macro = equilibrium_perturbation(state, u0)
    h = ops.to_h(f_macro)
    if micro_amplitude != 0.0:
        # odd velocity profile: carries no density, excites the layer
        micro = (grid.v[None, :] * state.sqrt_F) * np.exp(
            -(2.0 * grid.x[:, None] / grid.x_max) ** 2)
        micro *= micro_amplitude * ops.norm_h(h) / ops.norm_h(micro)
        h = h + micro
    f0 = ops.to_field(h)
    rho0 = f0.rho

    limit_rho = _limit_density_series(ops, rho0, t_end, n_compare)
    inv_rho = 1.0 / state.rho
    dx = grid.dx
    errors = []
    for eps in eps_list:
        bound = transport_step_bound(ops, 1.0 / eps)
        n_steps = int(np.ceil(t_end / (0.3 * bound)))
        n_steps = int(np.ceil(n_steps / n_compare)) * n_compare
        series = integrate(ops, f0, t_end, dt=t_end / n_steps, eps=0.0,
                           sample_stride=n_steps // n_compare,
                           store_densities=True,
                           collision_scale=1.0 / eps ** 2,
                           transport_scale=1.0 / eps)
        worst = 0.0
        for k, rho_k in enumerate(series.densities):
            diff = rho_k - limit_rho[k]
            worst = max(worst, float(np.sqrt(np.sum(diff ** 2 * inv_rho) * dx)))
        errors.append(worst)
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    return {"eps": list(eps_list), "error": errors, "ratio": ratios}


# ---------------------------------------------------------------------------
# scenario driver
# ---------------------------------------------------------------------------

def build_state(scenario: Scenario) -> GibbsState:
    potential = scenario.make_potential()
    profile = scenario.make_profile()
    grid = suggest_grid(profile, potential, scenario.n_x, scenario.n_v,
                        tail_ratio=scenario.tail_ratio)
    return build_gibbs_state(profile, potential, grid)


def initial_field(scenario: Scenario, state: GibbsState) -> Field:
    if scenario.initial == "random_zero_mass":
        return random_field(state, np.random.default_rng(scenario.seed))
    if scenario.initial == "equilibrium_perturbation":
        f = equilibrium_perturbation(state)
        h = f.values / state.sqrt_F
        scale = np.sqrt(state.grid.integrate(h * h))
        return Field(state.grid, f.values / scale)
    if scenario.initial == "tabulated":
        values = np.loadtxt(scenario.initial_path_for("initial datum"))
        f = Field(state.grid, values)
        # project out the mass component: fluctuations integrate to zero
        sF = state.sqrt_F
        h = f.values / sF
        h -= state.grid.integrate(h * sF) / state.grid.integrate(sF * sF) * sF
        return Field(state.grid, h * sF)
    raise ValueError(f"unknown initial datum kind {scenario.initial!r}")


def run_scenario(scenario: Scenario, eps: float | None = None,
                 certificate=None):
    """Assemble, integrate and diagnose one scenario.

    Returns ``(state, ops, series)``.  When ``eps`` is None the
    certificate's optimal entropy parameter is used (computing the
    certificate if not supplied).
    """
    from .spectral import certify

    state = build_state(scenario)
    ops = assemble_operator_set(state, scenario.collision, kernel=scenario.kernel)
    if eps is None:
        eps = scenario.eps
    if eps is None:
        certificate = certificate or certify(ops, seed=scenario.seed)
        eps = certificate.eps_star
    f0 = initial_field(scenario, state)
    series = integrate(ops, f0, scenario.t_end, dt=scenario.dt, eps=eps,
                       sample_stride=scenario.sample_stride,
                       store_densities=scenario.store_densities)
    return state, ops, series
