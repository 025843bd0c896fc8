"""Spectral constants, certificates, diffusion coefficients."""

import numpy as np
import pytest

from kinlab.equilibria import (EnergyProfile, Potential, build_gibbs_state,
                               build_weights, check_conditions, suggest_grid)
from kinlab.errors import CertificateError
from kinlab.operators import assemble_operator_set, random_field
from kinlab.spectral import (
    RateCertificate,
    auxiliary_norms,
    certify,
    certify_from_constants,
    diffusion_coefficient,
    elliptic_regularity_probe,
    gradient_weight_bound_probe,
    hardy_poincare_constant,
    kappa_of,
    macroscopic_gap,
    microscopic_gap,
    schrodinger_gap,
    transport_macroscopic_gap,
)


# ---------------------------------------------------------------------------
# microscopic gaps
# ---------------------------------------------------------------------------

def test_bgk_gap_is_one(ops_bgk):
    assert microscopic_gap(ops_bgk) == pytest.approx(1.0, abs=1e-10)


def test_fokker_planck_gap_is_one(ops_fp):
    # the aligned face coefficients make v an exact eigenvector;
    # Ornstein-Uhlenbeck oracle: smallest nonzero eigenvalue is 1
    assert microscopic_gap(ops_fp) == pytest.approx(1.0, abs=1e-10)


def test_fokker_planck_gap_refinement():
    pot = Potential.power_law(1.0)
    prof = EnergyProfile.maxwellian()
    gaps = []
    for n_v in (64, 128, 256):
        grid = suggest_grid(prof, pot, 16, n_v)
        state = build_gibbs_state(prof, pot, grid)
        ops = assemble_operator_set(state, "fokker_planck")
        gaps.append(microscopic_gap(ops))
    errs = [abs(g - 1.0) for g in gaps]
    assert errs[-1] <= errs[0] + 1e-12
    assert errs[-1] <= 1e-10


def test_fokker_planck_second_eigenvalue_converges():
    # the next Ornstein-Uhlenbeck eigenvalue is 2; discrete error O(dv^2)
    import scipy.linalg as sla
    pot = Potential.power_law(1.0)
    prof = EnergyProfile.maxwellian()
    errs = []
    for n_v in (128, 256):
        grid = suggest_grid(prof, pot, 16, n_v)
        state = build_gibbs_state(prof, pot, grid)
        ops = assemble_operator_set(state, "fokker_planck")
        evals = np.sort(sla.eigvalsh(-ops.collision.v_mat))
        errs.append(abs(evals[2] - 2.0))
    assert errs[1] < errs[0]
    assert errs[1] <= 0.05


# ---------------------------------------------------------------------------
# macroscopic gaps
# ---------------------------------------------------------------------------

def test_macroscopic_gap_ou_limit():
    # V = x^2/2: the density diffusion is the Ornstein-Uhlenbeck process in
    # x, gap 1 (Hermite oracle); convergence under refinement
    pot = Potential.quadratic(1.0)
    prof = EnergyProfile.maxwellian()
    errs = []
    for n_x in (128, 256):
        grid = suggest_grid(prof, pot, n_x, 64)
        state = build_gibbs_state(prof, pot, grid)
        errs.append(abs(macroscopic_gap(state) - 1.0))
    assert errs[1] < errs[0]
    assert errs[1] <= 5e-3


def test_macroscopic_gap_homogeneity(maxwell_state):
    lam = macroscopic_gap(maxwell_state)
    doubled = build_gibbs_state(maxwell_state.profile, maxwell_state.potential,
                                maxwell_state.grid)
    doubled.m2 = 2.0 * doubled.m2
    assert macroscopic_gap(doubled) == pytest.approx(2.0 * lam, rel=1e-12)


def test_macroscopic_vs_schrodinger(maxwell_state):
    lam_fd = macroscopic_gap(maxwell_state)
    lam_s = schrodinger_gap(maxwell_state.potential, maxwell_state.grid.x)
    assert abs(lam_fd - lam_s) <= 1e-6 * lam_s


def test_schrodinger_oscillator_gaps():
    prof = EnergyProfile.maxwellian()
    # V = x^2/2: gap 1 (harmonic oscillator shifted to zero ground energy)
    # V = x^2:   gap 2 (frequency-2 oscillator, potential x^2 - 1)
    for curv, expected in ((1.0, 1.0), (2.0, 2.0)):
        pot = Potential.quadratic(curv)
        errs = []
        for n_x in (256, 512):
            grid = suggest_grid(prof, pot, n_x, 16)
            errs.append(abs(schrodinger_gap(pot, grid.x) - expected))
        assert errs[1] < errs[0]
        assert errs[1] <= 5e-3 * expected


def test_schrodinger_gap_vanishes_without_confinement():
    # log-growth potential: criterion fails, gap collapses as the domain grows
    pot = Potential.from_callable(
        lambda x: np.log1p(x * x),
        lambda x: 2.0 * x / (1.0 + x * x),
        lambda x: (2.0 - 2.0 * x * x) / (1.0 + x * x) ** 2)
    gaps = [schrodinger_gap(pot, np.linspace(-X, X, 600)) for X in (20.0, 40.0, 80.0)]
    assert gaps[1] < 0.5 * gaps[0] and gaps[2] < 0.5 * gaps[1]


def test_transport_gap_close_to_fd_gap(maxwell_state, ops_bgk):
    lam_t = transport_macroscopic_gap(ops_bgk)
    lam_fd = macroscopic_gap(maxwell_state)
    assert lam_t == pytest.approx(lam_fd, rel=0.02)


# ---------------------------------------------------------------------------
# Hardy-Poincare
# ---------------------------------------------------------------------------

def test_hardy_poincare_positive_and_stable():
    c1 = hardy_poincare_constant(1.0, 3, n_r=800)
    c2 = hardy_poincare_constant(1.0, 3, n_r=1600)
    assert c1 > 0 and c2 > 0
    assert abs(c1 - c2) <= 5e-3 * c2


def test_hardy_poincare_sweep_to_critical():
    alphas = np.linspace(1.0, -0.45, 10)
    vals = [hardy_poincare_constant(a, 3) for a in alphas]
    assert all(v > 0 for v in vals)
    assert all(vals[i] > vals[i + 1] for i in range(len(vals) - 1))
    assert vals[-1] <= 0.1 * vals[0]


def test_hardy_poincare_scale_invariance():
    c_ref = hardy_poincare_constant(1.0, 3)
    c_scaled = hardy_poincare_constant(
        1.0, 3, grad_weight=lambda r: 5.0 * (1.0 + r * r),
        mass_weight=lambda r: 5.0 * np.ones_like(r))
    assert c_scaled == pytest.approx(c_ref, rel=1e-10)


def test_hardy_poincare_critical_exponent_raises():
    with pytest.raises(ValueError, match="degenerate"):
        hardy_poincare_constant(-0.5, 3)
    with pytest.raises(ValueError, match="d >= 3"):
        hardy_poincare_constant(1.0, 2)


def test_hardy_poincare_constrained_branch():
    val = hardy_poincare_constant(-1.0, 3)
    assert val > 0


# ---------------------------------------------------------------------------
# auxiliary norms
# ---------------------------------------------------------------------------

def test_auxiliary_norm_bounds(ops_bgk, ops_fp):
    n1, n2, cm = auxiliary_norms(ops_bgk)
    assert n2 <= 0.5 * (1.0 + 1e-8)            # |A (1-Pi)| <= 1/2
    assert cm == pytest.approx(n1 + n2)
    _, n2_fp, _ = auxiliary_norms(ops_fp)
    assert n2_fp <= 0.5 * (1.0 + 1e-8)         # A L = -A: |AL| = |A| <= 1/2


def test_auxiliary_norms_against_dense_svd(maxwell_state_small):
    ops = assemble_operator_set(maxwell_state_small, "bgk")
    n1, n2, _ = auxiliary_norms(ops)
    n = maxwell_state_small.grid.n_x * maxwell_state_small.grid.n_v
    shape = maxwell_state_small.F.shape
    cols_1 = np.zeros((n, n))
    cols_2 = np.zeros((n, n))
    eye = np.eye(n)
    for k in range(n):
        e = eye[k].reshape(shape)
        cols_1[:, k] = ops.apply_A(ops.apply_T(e - ops.project(e))).ravel()
        cols_2[:, k] = ops.apply_A(ops.apply_L(e)).ravel()
    sv_1 = np.linalg.svd(cols_1, compute_uv=False)[0]
    sv_2 = np.linalg.svd(cols_2, compute_uv=False)[0]
    assert n1 == pytest.approx(sv_1, rel=0.01)
    assert n2 == pytest.approx(sv_2, rel=0.01)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def test_kappa_bracket_upper_bound():
    # at eps = 1/2 with unit gaps and no auxiliary norm, the unrelaxed
    # two-term bound min{lambda_m, eps lam_M/(1+lam_M)} = 1/4 caps kappa
    best = max(kappa_of(0.5, d, 1.0, 1.0, 0.0) for d in np.linspace(1e-4, 1.0, 4000))
    assert best <= 0.25 + 1e-12


def test_certificate_invariants():
    cert = certify_from_constants(1.0, 1.0, 0.0)
    assert 0.0 < cert.eps_star < 1.0
    assert cert.kappa > 0
    assert cert.decay_rate == pytest.approx(cert.kappa / (1.0 + cert.eps_star))
    assert cert.prefactor == pytest.approx(
        np.sqrt((1.0 + cert.eps_star) / (1.0 - cert.eps_star)))
    unrelaxed = min(cert.lambda_m, cert.eps_star * cert.lambda_M / (1.0 + cert.lambda_M))
    assert cert.kappa <= unrelaxed * (1.0 + 1e-12)


def test_certificate_monotone_in_cm():
    kappas = [certify_from_constants(1.0, 1.0, cm).kappa for cm in (0.0, 1.0, 10.0, 100.0)]
    assert all(kappas[i] > kappas[i + 1] for i in range(len(kappas) - 1))
    assert kappas[-1] <= 0.01 * kappas[0]


def test_certificate_kappa_below_lambda_m():
    for lam_m in (0.3, 1.0, 2.0):
        cert = certify_from_constants(lam_m, 50.0, 0.5)
        assert cert.kappa <= lam_m


def test_certificate_rejects_bad_inputs():
    with pytest.raises(CertificateError):
        certify_from_constants(0.0, 1.0, 1.0)
    with pytest.raises(CertificateError):
        RateCertificate(lambda_m=1.0, lambda_M=1.0, C_M=0.0, eps_star=1.2,
                        delta_star=0.1, kappa=0.1, decay_rate=0.1 / 2.2,
                        prefactor=1.0)


def test_certificate_validity_on_random_fields(ops_bgk, rng):
    cert = certify(ops_bgk)
    for _ in range(500):
        h = ops_bgk.to_h(random_field(ops_bgk.state, rng))
        d, _ = ops_bgk.dissipation_h(h, cert.eps_star)
        assert d >= cert.kappa * ops_bgk.inner_h(h, h) - 1e-8


# ---------------------------------------------------------------------------
# diffusion coefficients
# ---------------------------------------------------------------------------

def test_bgk_diffusion_coefficient_identity(ops_bgk, maxwell_state):
    sigma, gamma = diffusion_coefficient(ops_bgk)
    rho_sigma = sigma * maxwell_state.rho
    assert np.max(np.abs(rho_sigma - maxwell_state.m2)) <= 1e-10 * np.max(maxwell_state.m2)
    # Maxwellian with the quadratic-growth potential: sigma = gamma = 1;
    # the log-derivative differencing is exact for this potential
    assert np.max(np.abs(sigma - 1.0)) <= 1e-9
    assert np.max(np.abs(gamma - 1.0)) <= 1e-9


def test_fokker_planck_diffusion_coefficient(ops_fp):
    # v M is an exact eigenvector of the collision solve: sigma = 1
    sigma, _ = diffusion_coefficient(ops_fp)
    assert np.max(np.abs(sigma - 1.0)) <= 1e-9


# ---------------------------------------------------------------------------
# elliptic regularity probes (report-only)
# ---------------------------------------------------------------------------

def test_gradient_weight_bound_probe(maxwell_state):
    w = build_weights(maxwell_state, maxwell_state.potential)
    rep = check_conditions(maxwell_state.potential, maxwell_state.profile,
                           maxwell_state, w)
    c1, c2 = rep["W1"].witness["c1"], rep["W1"].witness["c2"]
    kappa, worst, ok = gradient_weight_bound_probe(maxwell_state, w, c1, c2)
    assert kappa > 0 and ok


def test_elliptic_regularity_probe_stable():
    pot = Potential.power_law(1.0)
    prof = EnergyProfile.maxwellian()
    consts = []
    for n_x in (96, 192):
        grid = suggest_grid(prof, pot, n_x, 16)
        state = build_gibbs_state(prof, pot, grid)
        w = build_weights(state, pot)
        consts.append(elliptic_regularity_probe(state, w))
    assert 0.5 <= consts[0] / consts[1] <= 2.0


def test_auxiliary_defining_equation_at_scale():
    # residual of (1 + (T Pi)*(T Pi)) A f = (T Pi)* f at production size,
    # steep potential: validates the factorized macroscopic reduction far
    # from the coarse dense-oracle regime
    pot = Potential.power_law(1.5)
    prof = EnergyProfile.maxwellian()
    grid = suggest_grid(prof, pot, 128, 128)
    state = build_gibbs_state(prof, pot, grid)
    ops = assemble_operator_set(state, "fokker_planck")
    rng = np.random.default_rng(12)
    for _ in range(5):
        h = ops.to_h(random_field(state, rng))
        g = ops.apply_A(h)
        lhs = g - ops.project(ops.apply_T(ops.apply_T(ops.project(g))))
        rhs = -ops.project(ops.apply_T(h))
        assert ops.norm_h(lhs - rhs) <= 1e-11 * max(ops.norm_h(rhs), 1e-30)


def test_certificate_validity_scattering(maxwell_state, rng):
    def kernel(vo, vi):
        mw = np.exp(-0.5 * vo * vo) / np.sqrt(2 * np.pi)
        return 0.4 * mw * (1.3 + np.tanh(vi))

    ops = assemble_operator_set(maxwell_state, "scattering", kernel=kernel)
    cert = certify(ops)
    assert cert.decay_rate > 0
    for _ in range(200):
        h = ops.to_h(random_field(maxwell_state, rng))
        d, _ = ops.dissipation_h(h, cert.eps_star)
        assert d >= cert.kappa * ops.inner_h(h, h) - 1e-8
