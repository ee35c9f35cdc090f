import numpy as np
import pytest

from fraq import (
    EvolutionConfig,
    GramianSpec,
    Nonlinearity,
    NumericalFailure,
    SpectralField,
    TorusGrid,
    apply_control_operator,
    apply_gramian,
    build_bump_profile,
    estimate_observability_constant,
    gramian_spectrum,
    inner,
    parse_region,
    random_field,
    solve_hum,
    sobolev_norm,
)

PI = np.pi


def make_grid(n=32):
    return TorusGrid(1, n)


def phi_one(g):
    return build_bump_profile(g, parse_region("all", g.d), "cutoff")


def phi_bump(g):
    return build_bump_profile(g, parse_region(f"interval:0,{PI}", g.d), "cutoff")


def zero(g):
    return SpectralField(g, np.zeros(g.shape, dtype=complex))


def spec_one(g, T=1.0, s=1.0, n_quad=64):
    return GramianSpec(t_horizon=T, s=s, sigma=2.0, phi=phi_one(g), n_quad=n_quad)


def spec_bump(g, T=1.0, s=1.0, n_quad=64):
    return GramianSpec(t_horizon=T, s=s, sigma=2.0, phi=phi_bump(g), n_quad=n_quad)


def test_control_operator_examples():
    g = make_grid()
    c = np.zeros(g.shape, dtype=complex)
    c[1] = 1.0
    out = apply_control_operator(SpectralField(g, c), phi_one(g), s=1.0)
    assert abs(out.coeffs[1] - 0.5) < 1e-13  # (1+1)^(-1)
    phi0 = build_bump_profile(g, parse_region("all", 1), "cutoff")
    phi0.values = np.zeros(g.shape)
    assert apply_control_operator(SpectralField(g, c), phi0, 1.0).l2_norm() == 0.0


def test_control_operator_self_adjoint():
    g = make_grid()
    rng = np.random.default_rng(0)
    phi = phi_bump(g)
    for _ in range(5):
        u = random_field(g, rng, decay=1.0)
        v = random_field(g, rng, decay=1.0)
        lhs = inner(apply_control_operator(u, phi, 1.0), v)
        rhs = inner(u, apply_control_operator(v, phi, 1.0))
        assert abs(lhs - rhs) <= 1e-12


def test_gramian_closed_form_phi_one():
    g = make_grid()
    spec = spec_one(g, T=1.3)
    rng = np.random.default_rng(1)
    v = random_field(g, rng, decay=1.0)
    out = apply_gramian(v, spec)
    closed = 1.3 * (1.0 + g.k_squared) ** (-1.0) * v.coeffs
    assert np.max(np.abs(out.coeffs - closed)) <= 1e-12 * np.max(np.abs(closed))


def test_gramian_scales_linearly_in_small_T():
    g = make_grid()
    rng = np.random.default_rng(2)
    v = random_field(g, rng, decay=1.0)
    a = apply_gramian(v, spec_bump(g, T=1e-3)).l2_norm()
    b = apply_gramian(v, spec_bump(g, T=2e-3)).l2_norm()
    assert abs(b / a - 2.0) < 1e-2


def test_gramian_hermitian_psd():
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = random_field(g, rng, decay=1.0)
        y = random_field(g, rng, decay=1.0)
        gx, gy = apply_gramian(x, spec), apply_gramian(y, spec)
        scale = max(1.0, gx.l2_norm() * y.l2_norm())
        assert abs(inner(gx, y) - inner(x, gy)) <= 1e-12 * scale
        assert inner(gx, x).real >= -1e-12


def test_solve_hum_zero_data():
    g = make_grid()
    res = solve_hum(zero(g), zero(g), spec_bump(g), continuous_check=False)
    assert res.cg_iterations == 0
    assert res.endpoint_residual_l2 == 0.0
    assert np.all(res.control_phys == 0.0)


def test_solve_hum_phi_one_closed_form():
    g = make_grid()
    spec = spec_one(g, T=1.0, s=1.0)
    rng = np.random.default_rng(4)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    res = solve_hum(u0, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    closed = (-1j * u0.coeffs) * (1.0 + g.k_squared) ** 1.0 / spec.t_horizon
    assert np.max(np.abs(res.controller_seed.coeffs - closed)) <= 1e-10 * np.max(np.abs(closed))


def test_solve_hum_bump_discrete_residual():
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(5)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    res = solve_hum(u0, zero(g), spec, cg_tol=1e-10)
    assert res.endpoint_residual_rel <= 1e-8
    assert res.support_violation() == 0.0
    assert res.continuous_residual_l2 is not None


def test_solve_hum_steering_reduction():
    # steering to a nonzero target via the exact linear backward reduction
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(6)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    vt = random_field(g, rng, decay=3.0, s_norm=1.0, norm=0.5)
    res = solve_hum(u0, vt, spec, cg_tol=1e-10, continuous_check=False)
    assert res.endpoint_residual_rel <= 1e-8
    assert (res.achieved_final - vt).l2_norm() <= 1e-8 * max(1.0, vt.l2_norm())


def test_discrete_duality_identity():
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(7)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    res = solve_hum(u0, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    lam = g.k_squared ** 1.0 + spec.p0_shift
    dtau = spec.t_horizon / spec.n_quad
    for seed in range(3):
        v0 = random_field(g, np.random.default_rng(seed), decay=2.0)
        rhs = 0.0 + 0.0j
        for m, tau in enumerate(res.t_nodes):
            v_tau = np.exp(1j * tau * lam) * v0.coeffs
            rhs += dtau * np.sum(res.control_spectral[m] * np.conj(v_tau))
        lhs = np.sum((-1j * u0.coeffs) * np.conj(v0.coeffs))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_steering_map_linearity():
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(8)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    r1 = solve_hum(u0, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    r2 = solve_hum(u0 * 2.5, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    diff = np.max(np.abs(r2.control_spectral - 2.5 * r1.control_spectral))
    assert diff <= 1e-8 * max(1.0, np.max(np.abs(r2.control_spectral)))


def test_control_support_exact_zero():
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(9)
    u0 = random_field(g, rng, decay=2.0, s_norm=1.0, norm=1.0)
    res = solve_hum(u0, zero(g), spec, cg_tol=1e-10, continuous_check=False)
    outside = ~(np.asarray(spec.phi.values) != 0.0)
    assert np.all(res.control_phys[:, outside] == 0.0)


def test_observability_phi_one_equals_T():
    g = make_grid()
    for T in (0.5, 1.0):
        est = estimate_observability_constant(spec_one(g, T=T))
        assert est.method == "dense" and est.converged
        assert abs(est.value - T) <= 1e-10


def test_observability_monotone_in_T():
    # at fixed node density the longer-horizon gramian adds PSD terms
    g = make_grid()
    e1 = estimate_observability_constant(spec_bump(g, T=1.0, n_quad=32))
    e2 = estimate_observability_constant(spec_bump(g, T=2.0, n_quad=64))
    assert e2.value >= e1.value - 1e-12


def test_observability_bump_positive():
    g = make_grid()
    est = estimate_observability_constant(spec_bump(g))
    assert est.value > 0.0


def test_gramian_spectrum_flat_for_phi_one():
    g = make_grid()
    spectrum = gramian_spectrum(spec_one(g, T=0.7))
    assert np.max(np.abs(spectrum - 0.7)) <= 1e-10


def test_observability_lanczos_path(monkeypatch):
    # force the iterative branch on a small grid and compare to the dense value
    import fraq.control_linear as mod

    g = make_grid()
    dense = estimate_observability_constant(spec_one(g, T=0.8))
    monkeypatch.setattr(mod, "DENSE_MODE_CAP", 16)
    lanczos = estimate_observability_constant(spec_one(g, T=0.8))
    assert lanczos.method == "lanczos"
    assert abs(lanczos.value - dense.value) <= 1e-6 * max(1.0, dense.value)


def test_singular_gramian_raises():
    g = make_grid()
    phi = phi_bump(g)
    spec = GramianSpec(t_horizon=1e-12, s=1.0, sigma=2.0, phi=phi, n_quad=4)
    rng = np.random.default_rng(10)
    u0 = random_field(g, rng, decay=0.5)
    with pytest.raises(NumericalFailure):
        solve_hum(u0, zero(g), spec, cg_tol=1e-10, continuous_check=False)


def test_preconditioned_cg_agrees():
    g = make_grid()
    spec = spec_bump(g)
    rng = np.random.default_rng(11)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    r1 = solve_hum(u0, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    r2 = solve_hum(u0, zero(g), spec, cg_tol=1e-12, precondition=True, continuous_check=False)
    rel = (r1.controller_seed - r2.controller_seed).l2_norm() / r1.controller_seed.l2_norm()
    assert rel <= 1e-6
