"""Two-velocity relaxation model on the torus, reduced to Fourier modes.

Each integer wavenumber k gives a real 2x2 system for the macroscopic and
microscopic components (u_k, v_k): rotation by the skew matrix T_k against
relaxation of the microscopic component only.  The model is the smallest
instance of the hypocoercivity machinery: the plain energy is not coercive
(its dissipation vanishes whenever v_k does), but a modified entropy with
an eps cross term decays at a uniform rate.  Everything is available in
closed form, which makes the module the sharpest test bed for the
certificate logic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModeState",
    "mode_matrices",
    "mode_spectrum",
    "mode_entropy",
    "coercivity_kappa",
    "admissible_eps_bound",
    "evolve_modes",
    "ModeSeries",
]


@dataclass
class ModeState:
    """Fourier mode k with components U = (u_k, v_k) at time t."""

    k: int
    U: np.ndarray
    t: float = 0.0


def mode_matrices(k: int):
    """Skew transport matrix T_k and the relaxation matrix L."""
    t_k = np.array([[0.0, -float(k)], [float(k), 0.0]])
    l = np.array([[0.0, 0.0], [0.0, -1.0]])
    return t_k, l


def mode_spectrum(k: int):
    """Eigenvalue pair of L - T_k: {0, -1} at k = 0, else a conjugate pair
    with real part -1/2."""
    if k == 0:
        return np.array([0.0 + 0.0j, -1.0 + 0.0j])
    disc = 4.0 * k * k - 1.0
    root = 1j * np.sqrt(disc)
    return np.array([(-1.0 + root) / 2.0, (-1.0 - root) / 2.0])


def mode_entropy(k: int, U, eps: float) -> float:
    """Modified entropy H_k = |U|^2/2 + eps * k/(1+k^2) * u v.

    Bracketed between (1 -+ eps)/2 |U|^2 for any eps in (0, 1).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("entropy parameter must lie in (0, 1)")
    if k == 0:
        raise ValueError("mode entropy is defined for k != 0")
    u, v = float(U[0]), float(U[1])
    return 0.5 * (u * u + v * v) + eps * k / (1.0 + k * k) * u * v


def admissible_eps_bound(lam: float) -> float:
    """Upper end of the admissible eps interval for a given splitting lam."""
    return 8.0 * lam * lam / (8.0 * lam * lam + 1.0)


def coercivity_kappa(eps: float, lam: float) -> float:
    """Coercivity constant min{eps (1-lam^2)/2, 1 - eps - eps/(8 lam^2)}.

    ``lam`` in (0, 1) splits the cross term; eps must stay below
    ``8 lam^2 / (8 lam^2 + 1)`` for positivity.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("splitting parameter must lie in (0, 1)")
    bound = admissible_eps_bound(lam)
    if not 0.0 < eps < bound:
        raise ValueError(
            f"eps must lie in (0, {bound:.6g}) = (0, 8*lam^2/(8*lam^2+1))")
    return min(0.5 * eps * (1.0 - lam * lam),
               1.0 - eps - eps / (8.0 * lam * lam))


@dataclass
class ModeSeries:
    """Sampled trajectory of one mode: |U|, H_k and the state itself."""

    k: int
    t: np.ndarray
    U: np.ndarray          # (n_samples, 2)
    amplitude: np.ndarray  # |U|
    entropy: np.ndarray | None


def _rhs_stack(ks: np.ndarray, u: np.ndarray) -> np.ndarray:
    # u has shape (n_modes, 2); all modes advance in lockstep
    return np.column_stack([ks * u[:, 1], -ks * u[:, 0] - u[:, 1]])


def evolve_modes(k_max: int, eps: float, t_end: float, dt: float = 1e-3,
                 initial=None, sample_stride: int | None = None,
                 include_zero: bool = False) -> dict[int, ModeSeries]:
    """Integrate modes k = 1..k_max (optionally k = 0) with classical RK4.

    ``initial`` maps k to a length-2 array (default (1, 1)).  The system is
    non-stiff; dt = 1e-3 keeps the RK4 error far below the rate-fit
    tolerances for |k| <= 64.  Raises on detected growth of |U_k|.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("need positive dt and t_end")
    if dt * max(k_max, 1) > 1.0:
        raise ValueError("dt too large for the fastest requested mode")
    n_steps = int(round(t_end / dt))
    if sample_stride is None:
        sample_stride = max(1, n_steps // 4000)
    ks = np.arange(0 if include_zero else 1, k_max + 1, dtype=float)
    if initial is None:
        u = np.ones((ks.size, 2))
    else:
        u = np.array([initial(int(k)) for k in ks], dtype=float)
    ts, us = [0.0], [u.copy()]
    for n in range(n_steps):
        k1 = _rhs_stack(ks, u)
        k2 = _rhs_stack(ks, u + 0.5 * dt * k1)
        k3 = _rhs_stack(ks, u + 0.5 * dt * k2)
        k4 = _rhs_stack(ks, u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (n + 1) % sample_stride == 0 or n == n_steps - 1:
            ts.append((n + 1) * dt)
            us.append(u.copy())
    t_arr = np.array(ts)
    stack = np.array(us)                        # (n_samples, n_modes, 2)
    out: dict[int, ModeSeries] = {}
    for j, kf in enumerate(ks):
        k = int(kf)
        u_k = stack[:, j, :]
        amp = np.linalg.norm(u_k, axis=1)
        if k != 0 and np.max(amp) > amp[0] * (1.0 + 1e-8):
            raise RuntimeError(f"mode {k} grew during integration")
        ent = None
        if k != 0 and 0.0 < eps < 1.0:
            ent = 0.5 * np.sum(u_k ** 2, axis=1) \
                + eps * k / (1.0 + k * k) * u_k[:, 0] * u_k[:, 1]
        out[k] = ModeSeries(k=k, t=t_arr, U=u_k, amplitude=amp, entropy=ent)
    return out
