import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rvefatigue.paris import ParisConstants
from rvefatigue.xfem.crack import CrackPolyline
from rvefatigue.xfem.enrichment import branch_functions, enrich
from rvefatigue.xfem.fatigue import (
    FatigueHistory,
    StopCriteria,
    fatigue_step,
    hoop_stress,
    initial_crack,
    kink_angle,
    run_fatigue,
)
from rvefatigue.xfem.io import read_life_curve, write_crack_path, write_life_curve, write_vtk
from rvefatigue.xfem.mesh import StructuredMesh, gauss_legendre_2d, shape_functions
from rvefatigue.xfem.model import TABLE1, TABLE1_EDGE, MacroModel, sent_correction
from rvefatigue.xfem.sif import compute_sifs, handbook_sent, williams_fields
from rvefatigue.xfem.solver import assemble, assemble_solve

# 2 atan(-sqrt(2)/2), the pure mode II kink angle
PURE_SHEAR_DEG = -70.52877936550931


def hoop_derivative(theta, k1, k2):
    # d(sigma_theta)/d(theta) is proportional to K_I sin(theta) + K_II (3 cos(theta) - 1)
    return k1 * math.sin(theta) + k2 * (3 * math.cos(theta) - 1)


def test_kink_angle_pure_mode_one():
    assert kink_angle(10.0, 0.0) == 0.0


def test_kink_angle_pure_mode_two():
    assert math.degrees(kink_angle(0.0, 1.0)) == pytest.approx(PURE_SHEAR_DEG, abs=1e-9)
    assert math.degrees(kink_angle(0.0, -1.0)) == pytest.approx(-PURE_SHEAR_DEG, abs=1e-9)


def test_kink_angle_undefined_without_load():
    with pytest.raises(ValueError):
        kink_angle(0.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(k1=st.floats(0.0, 100.0), k2=st.floats(-100.0, 100.0))
def test_kink_angle_is_hoop_stress_maximum(k1, k2):
    if abs(k1) + abs(k2) < 1e-6:
        return
    th = kink_angle(k1, k2)
    assert abs(th) < math.radians(70.53) + 1e-9
    assert abs(hoop_derivative(th, k1, k2)) <= 1e-6 * (abs(k1) + abs(k2))
    # a maximum, not a minimum
    eps = 1e-3
    peak = hoop_stress(th, k1, k2)
    assert peak >= hoop_stress(th + eps, k1, k2) - 1e-9 * (abs(k1) + abs(k2))
    assert peak >= hoop_stress(th - eps, k1, k2) - 1e-9 * (abs(k1) + abs(k2))


def test_sent_correction_small_crack_limit():
    assert sent_correction(0.0) == pytest.approx(1.12)


def test_model_validation():
    with pytest.raises(ValueError):
        MacroModel(a0=70.0)
    with pytest.raises(ValueError):
        MacroModel(shear_gpa=50.0)
    with pytest.raises(ValueError):
        MacroModel(mode="axisymmetric")


def test_model_dict_round_trip():
    assert MacroModel.from_dict(TABLE1.to_dict()) == TABLE1
    with pytest.raises(ValueError):
        MacroModel.from_dict({"bogus": 1})


@settings(max_examples=50, deadline=None)
@given(xi=st.floats(-1, 1), eta=st.floats(-1, 1))
def test_shape_functions_partition_of_unity(xi, eta):
    N = shape_functions(np.array([xi]), np.array([eta]))
    assert N.sum() == pytest.approx(1.0)
    assert np.all(N >= -1e-15)


def test_gauss_rule_integrates_cubic_exactly():
    pts, w = gauss_legendre_2d(2)
    assert np.sum(w * pts[:, 0] ** 2 * pts[:, 1] ** 2) == pytest.approx(4.0 / 9.0)
    assert w.sum() == pytest.approx(4.0)


def test_williams_mode_one_ahead_of_tip():
    s, _ = williams_fields(np.array([0.5]), np.array([0.0]), 1, 80e3, 2.0)
    assert s[0, 1] == pytest.approx(1.0 / math.sqrt(2 * math.pi * 0.5))
    assert s[0, 2] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("mode", [1, 2])
def test_williams_faces_are_traction_free(mode):
    s, _ = williams_fields(np.array([0.3, 0.3]), np.array([math.pi, -math.pi]), mode, 80e3, 2.0)
    np.testing.assert_allclose(s[:, 1:], 0.0, atol=1e-12)


def test_branch_functions_jump_across_faces():
    F, _ = branch_functions(np.array([-1.0, -1.0]), np.array([1e-12, -1e-12]), (0.0, 0.0, 0.0))
    # only sqrt(r) sin(theta / 2) is discontinuous on the crack faces
    assert F[0, 0] == pytest.approx(1.0) and F[1, 0] == pytest.approx(-1.0)
    np.testing.assert_allclose(F[0, 1:], F[1, 1:], atol=1e-5)


def test_crack_polyline_geometry():
    c = CrackPolyline(np.array([[0.0, 0.0], [3.0, 0.0]]))
    c.extend("end", 1.0, math.pi / 2)
    assert c.length == pytest.approx(4.0)
    np.testing.assert_allclose(c.tip("end"), [3.0, 1.0])
    assert c.side(np.array([[1.0, 0.5]]))[0] == 1.0
    assert c.side(np.array([[1.0, -0.5]]))[0] == -1.0
    assert not c.is_self_intersecting()


def test_crack_polyline_rejects_degenerate():
    with pytest.raises(ValueError):
        CrackPolyline(np.array([[0.0, 0.0], [0.0, 0.0]]))


def test_stiffness_is_symmetric():
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 6.0)
    K = assemble(enrich(mesh, initial_crack(m)), m)
    assert abs(K - K.T).max() <= 1e-9 * abs(K).max()


def test_zero_load_gives_zero_field():
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 6.0)
    sol = assemble_solve(enrich(mesh, initial_crack(m)), m, load=0.0)
    assert not sol.d.any()


def test_crack_on_mesh_line_still_solves():
    # the crack lies on y = 60, a grid line of the 4 mm mesh
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 4.0)
    sol = assemble_solve(enrich(mesh, initial_crack(m)), m)
    k1, _ = compute_sifs(sol)
    assert k1 == pytest.approx(handbook_sent(m), rel=0.03)


def test_crack_faces_open():
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 2.0)
    sol = assemble_solve(enrich(mesh, initial_crack(m)), m)
    y = m.mid_y
    u = sol.displacement(np.array([[5.0, y + 1e-3], [5.0, y - 1e-3]]))
    assert u[0, 1] - u[1, 1] > 0


def test_sent_sif_coarse_accuracy_and_symmetry():
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 2.0)
    sol = assemble_solve(enrich(mesh, initial_crack(m)), m)
    k1, k2 = compute_sifs(sol)
    assert k1 == pytest.approx(handbook_sent(m), rel=0.01)
    assert abs(k2) < 1e-3 * k1


def test_sif_scales_linearly_with_load():
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 3.0)
    emesh = enrich(mesh, initial_crack(m))
    k_a, _ = compute_sifs(assemble_solve(emesh, m, load=10.0))
    k_b, _ = compute_sifs(assemble_solve(emesh, m, load=30.0))
    assert k_b == pytest.approx(3 * k_a, rel=1e-10)


def test_fatigue_step_applies_paris_increment():
    m = TABLE1_EDGE
    mesh = StructuredMesh.with_element_size(m.length, m.height, 3.0)
    crack = initial_crack(m)
    emesh = enrich(mesh, crack)
    const = ParisConstants(1e-11, 3.0, "mpa_sqrt_mm")
    hist, new = fatigue_step(FatigueHistory(), emesh, m, const, 1.5)
    rec = hist.records[-1]
    assert rec.dN == pytest.approx(1.5 / (const.C * rec.dK**const.m))
    assert new.length == pytest.approx(crack.length + 1.5)
    assert rec.dK == pytest.approx((1 - m.load_ratio) * rec.K_I)


def test_short_fatigue_run(tmp_path):
    m = TABLE1_EDGE
    const = ParisConstants(1.4299e-11, 2.9041, "mpa_sqrt_mm")
    hist, snaps, crack = run_fatigue(m, const, da=3.0, element_size=3.0, snapshots=(1000.0,))
    N, a = hist.N, hist.a
    assert hist.fractured and hist.cause == "boundary"
    assert np.all(np.diff(N) > 0) and np.all(np.diff(a) > 0)
    # growth rate rises with crack length
    assert np.all(np.diff(np.diff(a) / np.diff(N)) > 0)
    assert [s.cycle for s in snaps] == [1000.0]
    # symmetric plate and load keep the crack straight to well within an element
    assert np.ptp(crack.vertices[:, 1]) < 0.1 * 3.0

    write_life_curve(hist, tmp_path / "life.csv")
    back = read_life_curve(tmp_path / "life.csv")
    np.testing.assert_array_equal(back["N"], N)
    write_crack_path(crack.vertices, tmp_path / "path.csv")
    assert (tmp_path / "path.csv").read_text().startswith("x_mm,y_mm\n")
    write_vtk(snaps[0].solution, tmp_path / "f.vtk")
    text = (tmp_path / "f.vtk").read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert "VECTORS displacement double" in text and "SCALARS von_mises double 1" in text


def test_run_fatigue_cycle_budget():
    const = ParisConstants(1.4299e-11, 2.9041, "mpa_sqrt_mm")
    hist, _, _ = run_fatigue(TABLE1_EDGE, const, da=3.0, element_size=3.0,
                             stop=StopCriteria(max_cycles=1.0), snapshots=())
    assert not hist.fractured and hist.cause == "max_cycles"
    assert len(hist.records) == 2
