import numpy as np
import pytest

from fraq import (
    ControlError,
    ControlSchedule,
    EvolutionConfig,
    GramianSpec,
    Nonlinearity,
    Segment,
    SpectralField,
    TorusGrid,
    backward_nonlinear_solve,
    build_bump_profile,
    integrate_undamped,
    parse_region,
    random_field,
    sobolev_norm,
    solve_global_control,
    solve_hum,
    solve_local_control,
    stabilize_to_ball,
    verify_control,
)

PI = np.pi
P_CUBIC = Nonlinearity((0.0, 1.0, 1.0))


def setup(n=32, omega_hi=PI):
    g = TorusGrid(1, n)
    omega = parse_region(f"interval:0,{omega_hi}", 1)
    a = build_bump_profile(g, omega, "damping")
    phi = build_bump_profile(g, omega, "cutoff")
    spec = GramianSpec(t_horizon=1.0, s=1.0, sigma=2.0, phi=phi, n_quad=64, p0_shift=P_CUBIC.p0)
    return g, a, phi, spec


def zero(g):
    return SpectralField(g, np.zeros(g.shape, dtype=complex))


def test_backward_solve_inverts_forward_exactly():
    g, _, _, spec = setup()
    rng = np.random.default_rng(0)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=2e-2)
    cfg = EvolutionConfig(sigma=2.0, dt=1.0 / 64, t_final=1.0, p0_shift=P_CUBIC.p0, t_out=1.0)
    fwd = integrate_undamped(u0, cfg, P_CUBIC).final
    back = backward_nonlinear_solve(fwd, cfg, P_CUBIC)
    assert (back - u0).l2_norm() <= 1e-12


def test_local_control_zero_data():
    g, _, _, spec = setup()
    res, hist = solve_local_control(zero(g), zero(g), spec, P_CUBIC)
    assert hist[-1].iteration == 0
    assert hist[-1].residual == 0.0
    assert np.all(res.control_phys == 0.0)


def test_local_control_linear_matches_hum_in_one_iteration():
    g, _, _, spec = setup()
    P_lin = Nonlinearity((0.0, 1.0))  # P' constant: Q == 0
    rng = np.random.default_rng(1)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1e-2)
    res, hist = solve_local_control(u0, zero(g), spec, P_lin, fp_tol=1e-8, cg_tol=1e-12)
    assert hist[-1].iteration == 1
    hum = solve_hum(u0, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    assert (res.controller_seed - hum.controller_seed).l2_norm() <= 1e-8
    assert np.max(np.abs(res.control_spectral - hum.control_spectral)) <= 1e-8
    assert (res.achieved_final - hum.achieved_final).l2_norm() <= 1e-8


def test_local_control_contraction():
    g, _, _, spec = setup()
    rng = np.random.default_rng(2)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1e-2)
    res, hist = solve_local_control(u0, zero(g), spec, P_CUBIC, fp_tol=1e-6)
    assert hist[-1].iteration <= 20
    assert hist[-1].residual <= 1e-6
    residuals = [h.residual for h in hist]
    assert all(b < a for a, b in zip(residuals, residuals[1:]))  # monotone decrease


def test_local_control_smallness_guard():
    g, _, _, spec = setup()
    rng = np.random.default_rng(3)
    big = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1.0)
    with pytest.raises(ControlError):
        solve_local_control(big, zero(g), spec, P_CUBIC)


def test_local_control_max_iter_guard():
    g, _, _, spec = setup()
    rng = np.random.default_rng(30)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1e-2)
    with pytest.raises(ControlError, match="max_iter"):
        solve_local_control(u0, zero(g), spec, P_CUBIC, fp_tol=1e-14, max_iter=0)


def test_stabilize_reports_timeout_without_reaching():
    g, a, _, _ = setup()
    rng = np.random.default_rng(31)
    u0 = random_field(g, rng, decay=4.0, s_norm=1.0, norm=1.0)
    cfg = EvolutionConfig(sigma=2.0, dt=2e-3, t_final=0.1, p0_shift=P_CUBIC.p0, t_out=0.1)
    out = stabilize_to_ball(u0, a, 1e-6, cfg, P_CUBIC)
    assert not out.reached
    assert out.achieved_hs > 1e-6


def test_control_magnitude_scales_with_data():
    g, _, _, spec = setup()
    rng = np.random.default_rng(4)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=2e-2)
    res1, _ = solve_local_control(u0, zero(g), spec, P_CUBIC, fp_tol=1e-9)
    res2, _ = solve_local_control(u0 * 0.1, zero(g), spec, P_CUBIC, fp_tol=1e-10)

    def magnitude(res):
        return max(sobolev_norm(res.control_field(m), spec.s) for m in range(len(res.t_nodes)))

    assert magnitude(res1) >= 5.0 * magnitude(res2)


def test_stabilize_zero_state():
    g, a, _, _ = setup()
    cfg = EvolutionConfig(sigma=2.0, dt=1e-3, t_final=1.0, p0_shift=P_CUBIC.p0)
    out = stabilize_to_ball(zero(g), a, 1e-3, cfg, P_CUBIC)
    assert out.t_reached == 0.0 and out.reached


def test_stabilize_records_exactly_resimulable_forcing():
    g, a, _, _ = setup(omega_hi=5.0)
    rng = np.random.default_rng(5)
    u0 = random_field(g, rng, decay=4.0, s_norm=1.0, norm=0.5)
    cfg = EvolutionConfig(sigma=2.0, dt=4e-3, t_final=60.0, p0_shift=P_CUBIC.p0, t_out=1.0)
    out = stabilize_to_ball(u0, a, 0.1, cfg, P_CUBIC)
    assert out.reached
    assert out.forcing.support_violation() == 0.0
    # forcing vanishes where a does
    assert np.all(out.forcing.values_phys[:, a.values == 0.0] == 0.0)
    rcfg = EvolutionConfig(sigma=2.0, dt=out.forcing.dt, t_final=out.t_reached, p0_shift=P_CUBIC.p0, t_out=out.t_reached)
    resim = integrate_undamped(u0, rcfg, P_CUBIC, forcing=out.forcing)
    assert (resim.final - out.small_state).l2_norm() <= 1e-8


def test_stabilize_time_reversal_roundtrip():
    g, a, _, _ = setup(omega_hi=5.0)
    rng = np.random.default_rng(6)
    v0 = random_field(g, rng, decay=4.0, s_norm=1.0, norm=0.5)
    cfg = EvolutionConfig(sigma=2.0, dt=4e-3, t_final=60.0, p0_shift=P_CUBIC.p0, t_out=1.0)
    out = stabilize_to_ball(v0.conj_reflect(), a, 0.1, cfg, P_CUBIC)
    assert out.reached
    rev = out.forcing.conj_reversed()
    rcfg = EvolutionConfig(sigma=2.0, dt=out.forcing.dt, t_final=out.t_reached, p0_shift=P_CUBIC.p0, t_out=out.t_reached)
    landed = integrate_undamped(out.small_state.conj_reflect(), rcfg, P_CUBIC, forcing=rev).final
    assert (landed - v0).l2_norm() <= 1e-8


def test_global_control_zero_data():
    g, a, _, spec = setup()
    plan, ver = solve_global_control(zero(g), zero(g), spec, P_CUBIC, a)
    assert plan.total_time == 0.0
    assert ver.residual_l2 == 0.0 and ver.support_violation == 0.0


def test_global_control_small_round_trip():
    # wider damping region for a faster module-level run
    g, a, phi, _ = setup(omega_hi=5.0)
    spec = GramianSpec(t_horizon=1.0, s=1.0, sigma=2.0, phi=phi, n_quad=64, p0_shift=P_CUBIC.p0)
    rng = np.random.default_rng(7)
    u0 = random_field(g, rng, decay=4.0, s_norm=1.0, norm=0.5)
    v0 = random_field(g, rng, decay=4.0, s_norm=1.0, norm=0.5)
    scfg = EvolutionConfig(sigma=2.0, dt=4e-3, t_final=100.0, p0_shift=P_CUBIC.p0, t_out=1.0)
    plan, ver = solve_global_control(
        u0, v0, spec, P_CUBIC, a, eps_small=0.1, fp_tol=1e-9, cg_tol=1e-11, stabilize_cfg=scfg
    )
    assert ver.residual_l2 <= 1e-3
    assert ver.support_violation == 0.0
    assert plan.junction_norms["phase_a_end_hs"] <= 0.1 + 1e-12
    assert plan.junction_norms["phase_b_end_hs"] <= 0.1 + 1e-12


def test_verify_control_zero_control_consistency():
    g, _, _, _ = setup()
    rng = np.random.default_rng(8)
    vt = random_field(g, rng, decay=4.0, s_norm=1.0, norm=0.3)
    cfg = EvolutionConfig(sigma=2.0, dt=1e-3, t_final=1.0, p0_shift=P_CUBIC.p0, t_out=1.0)
    u0 = backward_nonlinear_solve(vt, cfg, P_CUBIC)
    schedule = ControlSchedule(
        g,
        [Segment(0.0, 1e-3, np.zeros((1000,) + g.shape, dtype=complex), np.ones(g.shape, dtype=bool))],
    )
    rep = verify_control(u0, schedule, vt, cfg, P_CUBIC)
    assert rep.residual_l2 <= 1e-8
    assert rep.support_violation == 0.0


def test_verify_control_linear_hum_schedule():
    g, a, phi, spec = setup()
    P_lin = Nonlinearity((0.0, 1.0))
    rng = np.random.default_rng(9)
    u0 = random_field(g, rng, decay=3.0, s_norm=1.0, norm=1e-2)
    res = solve_hum(u0, zero(g), spec, cg_tol=1e-12, continuous_check=False)
    schedule = ControlSchedule(
        g,
        [Segment(0.0, spec.t_horizon / spec.n_quad, res.control_phys, np.asarray(phi.values) != 0.0)],
    )
    cfg = EvolutionConfig(sigma=2.0, dt=spec.t_horizon / spec.n_quad, t_final=1.0, p0_shift=P_CUBIC.p0, t_out=1.0)
    rep = verify_control(u0, schedule, zero(g), cfg, P_lin)
    assert rep.residual_l2 <= 1e-8
    assert rep.support_violation == 0.0
