"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from conftest import VERDICTS
from scipy import ndimage

from rvefatigue.md.dynamics import compute_forces, maxwell_velocities, potential_energy, run_verlet, total_energy
from rvefatigue.md.potential import C_SUB, FE, PairPotential
from rvefatigue.md.stress import virial_stress
from rvefatigue.md.system import AtomSystem, bcc_sites, build_rve
from rvefatigue.paris import ParisConstants, fit_paris
from rvefatigue.pipeline import PipelineError, RunManifest, load_pipeline_config, run_pipeline
from rvefatigue.pipeline.config import DEFECTED
from rvefatigue.vision import binarize_median, skeletonize, zhang_suen
from rvefatigue.xfem import TABLE1, TABLE1_EDGE, compute_sifs, handbook_sent, kink_angle, run_fatigue
from rvefatigue.xfem.enrichment import enrich
from rvefatigue.xfem.fatigue import initial_crack
from rvefatigue.xfem.mesh import StructuredMesh
from rvefatigue.xfem.solver import assemble_solve


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


# ---- 1: Paris round trip ---------------------------------------------------


def test_criterion_1_paris_round_trip():
    t = time.perf_counter()
    m, C = 2.75, 1.43e-11
    dk = np.geomspace(5.0, 60.0, 15)
    const = fit_paris(dk, C * dk**m, "mpa_sqrt_m")
    dt = time.perf_counter() - t
    err_m, err_c = abs(const.m / m - 1), abs(const.C / C - 1)
    ok = err_m <= 1e-6 and err_c <= 1e-6 and dt < 1.0
    verdict(1, ok, f"m rel err {err_m:.1e}, C rel err {err_c:.1e}, {dt:.3f} s")


# ---- 2: kink angle ---------------------------------------------------------


def hoop_derivative(theta, k1, k2):
    # d/dtheta of cos(t/2) * (K_I cos^2(t/2) - 1.5 K_II sin t), written out by hand
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    g = k1 * c * c - 1.5 * k2 * math.sin(theta)
    dg = -k1 * c * s - 1.5 * k2 * math.cos(theta)
    return -0.5 * s * g + c * dg


def test_criterion_2_kink_angle():
    pure_one = kink_angle(1.0, 0.0)
    pure_two = math.degrees(kink_angle(0.0, 1.0))
    # K_I = 0: the hoop stress peaks where cos(theta) = 1/3
    oracle = -math.degrees(math.acos(1.0 / 3.0))
    rng = np.random.default_rng(2)
    worst = 0.0
    for k1, k2 in zip(rng.uniform(0.0, 10.0, 50), rng.uniform(-10.0, 10.0, 50)):
        th = kink_angle(k1, k2)
        worst = max(worst, abs(hoop_derivative(th, k1, k2)) / math.hypot(k1, k2))
    ok = pure_one == 0.0 and abs(pure_two - (-70.53)) <= 0.01 and abs(pure_two - oracle) < 1e-9 and worst <= 1e-6
    verdict(2, ok, f"theta(K_II=0) = {pure_one}, theta(K_I=0) = {pure_two:.4f} deg, max |dsigma/dtheta| {worst:.1e}")


# ---- 3: SENT stress intensity ----------------------------------------------


def test_criterion_3_sent_sif():
    m = TABLE1_EDGE
    ref = handbook_sent(m)
    errors, times = [], []
    for h in (3.0, 2.0, 1.0):
        t = time.perf_counter()
        mesh = StructuredMesh.with_element_size(m.length, m.height, h)
        k1, _ = compute_sifs(assemble_solve(enrich(mesh, initial_crack(m)), m))
        times.append(time.perf_counter() - t)
        errors.append(abs(k1 / ref - 1))
    ok = errors[-1] <= 0.03 and errors[0] > errors[1] > errors[2] and max(times) < 30.0
    detail = ", ".join(f"{e:.2%}" for e in errors)
    verdict(3, ok, f"K_I errors at h = 3, 2, 1 mm: {detail}; slowest solve {max(times):.1f} s")


# ---- 4: life prediction ----------------------------------------------------


def test_criterion_4_life():
    t = time.perf_counter()
    const = ParisConstants(C=1.4299e-11, m=2.9041, units="mpa_sqrt_mm")
    hist, _, _ = run_fatigue(TABLE1, const, da=1.0, element_size=1.0, snapshots=())
    dt = time.perf_counter() - t
    N, a = hist.N, hist.a
    life = N[-1]
    slope = np.diff(a) / np.diff(N)
    increasing = bool(np.all(np.diff(a) > 0) and np.all(np.diff(N) > 0))
    concave_up = bool(np.all(np.diff(slope) > 0))
    ok = hist.fractured and abs(life / 65_000 - 1) <= 0.20 and increasing and concave_up and dt < 300
    verdict(4, ok, f"life {life:.0f} cycles ({life / 65_000 - 1:+.1%}), increasing {increasing}, "
                   f"concave-up {concave_up}, {dt:.1f} s")


# ---- 5: MD properties ------------------------------------------------------

POT = PairPotential()


def morse_du(r, pot=POT):
    """Shifted-force Fe-Fe dU/dr evaluated from the Morse formula directly."""
    def raw(x):
        e = math.exp(-pot.alpha * (x - pot.r0))
        return -2 * pot.alpha * pot.depth * (e * e - e)
    return raw(r) - raw(pot.r_cut)


def test_criterion_5_md_properties():
    t = time.perf_counter()
    # energy drift of a thermalised periodic crystal
    s = build_rve((4 * 2.85, 4 * 2.85, 3 * 2.85), crack=None, fixed_planes=0, periodic=(True, True, True))
    maxwell_velocities(s, 10.0, 5)
    e0 = total_energy(s, POT)
    run_verlet(s, POT, 0.001, np.zeros(10_000))
    drift = abs(total_energy(s, POT) - e0) / abs(e0)

    # forces against central differences of the energy
    worst_fd, worst_sum = 0.0, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        pos = bcc_sites((2 * 2.85,) * 3, 2.85)[:14] + 3.0 + rng.uniform(-0.15, 0.15, (14, 3))
        c = AtomSystem(pos, None, rng.choice([FE, FE, FE, C_SUB], size=14), [20.0] * 3, (False,) * 3)
        f = compute_forces(c, POT).copy()
        fd = np.zeros_like(f)
        for i in range(c.n_atoms):
            for k in range(3):
                c.positions[i, k] += 1e-5
                c.invalidate()
                ep = potential_energy(c, POT)
                c.positions[i, k] -= 2e-5
                c.invalidate()
                em = potential_energy(c, POT)
                c.positions[i, k] += 1e-5
                fd[i, k] = -(ep - em) / 2e-5
        c.invalidate()
        worst_fd = max(worst_fd, np.linalg.norm(f - fd) / np.linalg.norm(f))
        worst_sum = max(worst_sum, np.abs(f.sum(axis=0)).max() / np.abs(f).max())

    # two-atom virial against the per-atom formula evaluated by hand
    d, V = 2.4, 11.0
    pair = AtomSystem(np.array([[10.0, 10.0, 10.0], [10.0 + d, 10.0, 10.0]]), None, [FE, FE], [30.0] * 3, (False,) * 3)
    sxx = virial_stress(pair, POT, volume=V).components[:, 0]
    hand = 0.5 * d * morse_du(d) / V
    virial_err = np.abs(sxx - hand).max() / abs(hand)
    dt = time.perf_counter() - t

    ok = drift < 1e-4 and worst_fd <= 1e-6 and worst_sum <= 1e-10 and virial_err <= 1e-10 and dt < 120
    verdict(5, ok, f"drift {drift:.1e}, force vs FD {worst_fd:.1e}, sum f {worst_sum:.1e}, "
                   f"virial {virial_err:.1e}, {dt:.1f} s")


# ---- 6 and 8: desk-scale runs ----------------------------------------------


@pytest.fixture(scope="module")
def ci_runs(tmp_path_factory):
    """The ci pipeline run twice from scratch, plus the defected micro variant."""
    root = tmp_path_factory.mktemp("ci")
    base = load_pipeline_config(preset="ci")
    out = {}
    for name in ("first", "second"):
        cfg = base.replace(outdir=root / name)
        t = time.perf_counter()
        try:
            run_pipeline(cfg, use_cache=False)
            err = None
        except PipelineError as exc:
            err = str(exc)
        out[name] = (cfg, RunManifest.load(cfg.outdir / "manifest.json"), err, time.perf_counter() - t)
    cfg = base.replace(outdir=root / "defected", **{f"rve.{k}": v for k, v in DEFECTED.items()})
    t = time.perf_counter()
    try:
        run_pipeline(cfg, use_cache=False, macro=False)
        err = None
    except PipelineError as exc:
        err = str(exc)
    out["defected"] = (cfg, None, err, time.perf_counter() - t)
    return out


def micro_seconds(manifest):
    return sum(s.seconds for s in manifest.stages if s.name != "xfem_core")


def test_criterion_6_micro_constants(ci_runs):
    cfg, manifest, err, _ = ci_runs["first"]
    dcfg, _, derr, dtime = ci_runs["defected"]
    assert cfg.md.rve.crack_kind == "blunt" and cfg.md.rve.c_fraction == 0 == cfg.md.rve.vacancy_fraction
    pure = ParisConstants.load(cfg.outdir / "paris_fit" / "paris.json") if manifest.stage("paris_fit").status == "ran" else None
    defected = ParisConstants.load(dcfg.outdir / "paris_fit" / "paris.json") if derr is None else None
    elapsed = micro_seconds(manifest) + dtime
    if pure is None:
        verdict(6, False, f"pure blunt fit failed: {err}")
    pure_ok = pure.n_points >= 5 and 1.0 <= pure.m <= 4.0 and pure.C > 0
    differs = defected is not None and (defected.m, defected.C) != (pure.m, pure.C)
    dtext = f"m = {defected.m:.3f}, C = {defected.C:.3e}" if defected else f"failed: {derr}"
    ok = pure_ok and differs and elapsed < 600
    verdict(6, ok, f"pure: {pure.n_points} points, m = {pure.m:.3f}, C = {pure.C:.3e}; defected: {dtext}; "
                   f"{elapsed:.0f} s")


def test_criterion_7_vision():
    t = time.perf_counter()
    img = np.zeros((25, 120), dtype=bool)
    img[10:15, 10:110] = True
    strip = skeletonize(img).length
    lshape = np.zeros((50, 70), dtype=bool)
    lshape[5, 5:65] = True
    lshape[5:45, 64] = True
    ell = skeletonize(lshape).length
    once = zhang_suen(img)
    idempotent = bool(np.array_equal(zhang_suen(once), once))

    rng = np.random.default_rng(7)
    clean = np.zeros((100, 120), dtype=np.uint8)
    clean[40:60, 10:110] = 255
    noisy = clean.copy()
    salt = rng.random(clean.shape) < 0.01
    noisy[salt] = 255
    cleaned = binarize_median(noisy, threshold=128, window=3)
    away = ~ndimage.binary_dilation(clean > 0, iterations=1)
    noise_left = int(np.count_nonzero(cleaned & away))
    band_kept = bool(cleaned[41:59, 11:109].all())
    dt = time.perf_counter() - t
    ok = (abs(strip - 100) <= 2 and abs(ell - 99) <= 3 and idempotent and noise_left == 0
          and band_kept and int(np.count_nonzero(salt & away)) > 50 and dt < 5)
    verdict(7, ok, f"strip {strip:.2f} px, L {ell:.2f} px, idempotent {idempotent}, "
                   f"salt pixels left {noise_left}, band kept {band_kept}, {dt:.2f} s")


def test_criterion_8_determinism(ci_runs):
    cfg_a, man_a, err_a, _ = ci_runs["first"]
    cfg_b, man_b, err_b, _ = ci_runs["second"]
    life_a = cfg_a.outdir / "xfem_core" / "life_curve.csv"
    life_b = cfg_b.outdir / "xfem_core" / "life_curve.csv"
    if not (life_a.exists() and life_b.exists()):
        verdict(8, False, f"no life curve; run stopped at {man_a.failed_stage}: {err_a}")
    same_life = life_a.read_bytes() == life_b.read_bytes()
    same_digests = man_a.digests() == man_b.digests()
    verdict(8, same_life and same_digests, f"life curve identical {same_life}, manifest digests identical {same_digests}")
