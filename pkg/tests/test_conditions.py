import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elsafe.basis import PositiveBasis, build_circle_basis
from elsafe.conditions import (FAIL, PASS, SKIP, check_parameter_conditions, lipschitz_certificate,
                               phi_margin, smallest_singular_value, synthesize_shaping)
from elsafe.errors import DegenerateBasis, SynthesisFailed
from elsafe.params import preset


def _inv3(y, slope, knee, kv):
    # hand inverse of the three-segment gain
    y = np.asarray(y, float)
    return np.where(y < 0, y / slope, np.where(y <= kv, y * knee / kv, knee + (y - kv) / slope))


def _c_star_oracle(d_s, d_b, d_a):
    d_s, d_b, d_a = F(str(d_s)), F(str(d_b)), F(str(d_a))
    w = 2 * d_s + d_b
    return (w * w - 4 * d_s * d_s + 2 * d_a * d_a) / (2 * w * w)


def _phi_bound_oracle(s, pp, p, slope=0.9, knee=0.0091, kv=0.3136):
    c0, d_r = p.c0, p.d_r
    D = p.gap
    alpha_neg = -slope * pp
    out = -np.inf
    for K in (c0 * (p.v_bar - d_r), (d_r - c0 * alpha_neg) / D):
        arg = (-K * (s - c0) - K * D + d_r) / c0
        out = max(out, float(_inv3(arg, slope, knee, kv)) + pp)
    return out


def test_c_star_matches_exact_arithmetic():
    p, _ = preset("arm_sim")
    assert p.c_star == pytest.approx(float(_c_star_oracle(0.1745, 0.0182, 0.1561)), rel=1e-14)


def test_arm_sim_outcome(sim_preset):
    p, fns, basis = sim_preset
    rep = check_parameter_conditions(p, fns, basis)
    # every condition holds except the relaxation lower bound just below c0
    assert rep.failed() == ["phi_lower_bound"]
    assert rep["phi_lower_bound"].slack == pytest.approx(-2.00867e-5, rel=1e-4)
    assert rep.derived["d_f_upper"] == pytest.approx(0.009807643419, rel=1e-9)


def test_arm_sim_phi_failure_confirmed_by_oracle():
    p, fns = preset("arm_sim")
    s = 0.996431
    worst = min(fns.phi(s) - _phi_bound_oracle(s, pp, p) for pp in np.linspace(0, p.d_h, 101))
    assert worst < 0
    assert worst == pytest.approx(-2.00867e-5, rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 0.9965, exclude_max=True), st.floats(0, 0.00002))
def test_phi_margin_minimum_is_exact(s, pp):
    p, fns = preset("arm_sim")
    grid_s, margin = phi_margin(fns, p)
    inner = grid_s < p.c0
    reported = margin[inner].min()
    assert fns.phi(s) - _phi_bound_oracle(s, pp, p) >= reported - 1e-12


def test_arm_hardware_outcome():
    p, fns = preset("arm_hardware")
    rep = check_parameter_conditions(p, fns, build_circle_basis(p.c0))
    assert sorted(rep.failed()) == ["alpha_knee", "neighborhood_radius", "phi_lower_bound"]


def test_speed_margin_mutation_fails_alone(sim_preset):
    p, fns, basis = sim_preset
    rep = check_parameter_conditions(p.with_(d_r=0.2), fns, basis)
    assert rep.failed() == ["speed_margin"]
    assert rep["speed_margin"].slack == pytest.approx(0.3142 - 0.4)
    assert rep["cosine_margin"].status == SKIP and rep["phi_lower_bound"].status == SKIP


def test_radius_vs_da_failure(sim_preset):
    p, fns, basis = sim_preset
    rep = check_parameter_conditions(p.with_(d_a=0.25), fns, basis)
    assert rep["radius_vs_da"].status == FAIL
    assert rep["radius_vs_da"].slack == pytest.approx(math.sqrt(2) * 0.1745 - 0.25)


def test_basis_mismatch(sim_preset):
    p, fns, _ = sim_preset
    rep = check_parameter_conditions(p, fns, build_circle_basis(0.9))
    assert rep["basis_match"].status == FAIL


def test_damping_gain():
    p, fns = preset("arm_sim")
    L, mu = 2.0e4, (0.0168, 0.84)
    need = 2 * 2 * L * mu[1] ** 3 * (0.5236 * 0.3142 + 0.3142) / (mu[0] ** 2 * 0.0105)
    rep = check_parameter_conditions(p, fns, mu_bounds=mu, L=L, k_D=800, v_c_d=0.5236 * 0.3142)
    assert rep["damping_gain"].status == FAIL
    assert rep.derived["k_D_required"] == pytest.approx(need, rel=1e-12)
    rep = check_parameter_conditions(p, fns, mu_bounds=mu, L=L, k_D=2 * need, v_c_d=0.5236 * 0.3142)
    assert rep["damping_gain"].status == PASS
    assert "damping_gain" not in check_parameter_conditions(p, fns)


def test_report_text_lists_every_condition(sim_preset):
    p, fns, basis = sim_preset
    txt = check_parameter_conditions(p, fns, basis).to_text()
    assert "FAIL phi_lower_bound" in txt and txt.endswith("overall: FAIL")


def test_certificate_constants(sim_preset):
    p, fns, basis = sim_preset
    cert = lipschitz_certificate(p, fns, basis)
    assert cert.L_phi == 0.3362
    assert cert.L_r == pytest.approx(1 + 2 * 0.3362 / 0.17448, rel=1e-12)
    # the rounded reference value 4.8536 is approximate; the formula gives 4.85374
    assert cert.L_r == pytest.approx(4.8536, abs=5e-4)
    # 76 evenly spaced unit vectors: A^T A = (m/2) I
    assert cert.c_lambda == pytest.approx(math.sqrt(38), rel=1e-6)
    rho = 0.5 + (1 + 4 * math.sqrt(2)) / cert.c_lambda
    assert cert.rho == pytest.approx(rho)
    assert cert.L == pytest.approx(rho * 76 * 0.9965 * (0.3136 / 0.0091) * cert.L_r, rel=1e-12)


def test_orthonormal_c_lambda():
    assert smallest_singular_value(np.eye(2)) == pytest.approx(1.0, abs=1e-12)


def test_degenerate_basis(sim_preset):
    p, fns, _ = sim_preset
    flat = PositiveBasis(np.array([[1.0, 0.0], [-1.0, 0.0]]), 0.5)
    with pytest.raises(DegenerateBasis):
        lipschitz_certificate(p, fns, flat)


@pytest.mark.parametrize("name", ["arm_sim", "arm_hardware"])
def test_synthesis_passes_checker(name):
    p, _ = preset(name)
    fns = synthesize_shaping(p)
    rep = check_parameter_conditions(p, fns, build_circle_basis(p.c0))
    assert rep.passed, rep.to_text()
    again = synthesize_shaping(p)
    np.testing.assert_array_equal(again.phi.ys, fns.phi.ys)
    np.testing.assert_array_equal(again.alpha_c.ys, fns.alpha_c.ys)


def test_synthesis_rejects_speed_margin():
    p, _ = preset("arm_sim")
    with pytest.raises(SynthesisFailed) as exc:
        synthesize_shaping(p.with_(d_r=0.2))
    assert exc.value.condition == "speed_margin"


def test_synthesis_rejects_radius():
    p, _ = preset("arm_sim")
    with pytest.raises(SynthesisFailed) as exc:
        synthesize_shaping(p.with_(d_a=0.25))
    assert exc.value.condition == "radius_vs_da"
