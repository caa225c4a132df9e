import json
import math

import numpy as np
import pytest

from rvefatigue.md.config import ConfigError
from rvefatigue.md.io import read_cycle_records, read_xyz
from rvefatigue.paris import CycleSample, ParisConstants, write_samples
from rvefatigue.pipeline import (
    PipelineConfig,
    PipelineError,
    RunManifest,
    compare_models,
    file_digest,
    format_table,
    load_pipeline_config,
    model_variants,
    preset_dict,
    run_pipeline,
)
from rvefatigue.pipeline.config import merge
from rvefatigue.vision.raster import read_image
from rvefatigue.xfem.io import read_life_curve

MODEL_A = {"m": 2.9041, "C": 1.4299e-11, "units": "mpa_sqrt_mm"}
COARSE = {"da": 3.0, "element_size": 3.0, "snapshots": [20_000.0]}
TINY_RVE = {"box": [34.2, 28.5, 8.55], "crack_length": 12.0}
TINY_LOADING = {"peak_start": 0.03, "peak_increment": 0.004, "cycles": 2, "strain_rate": 1e10}


def supplied_config(tmp_path, **sections):
    data = merge(preset_dict("ci"), {"fit": {"constants": MODEL_A}, "macro": COARSE, "output": {"dir": str(tmp_path)}})
    return PipelineConfig.from_dict(merge(data, sections))


def tiny_md_config(outdir, **sections):
    data = merge(
        preset_dict("ci"),
        {"rve": TINY_RVE, "loading": TINY_LOADING, "extraction": {"average_steps": 20},
         "macro": COARSE, "output": {"dir": str(outdir)}},
    )
    return PipelineConfig.from_dict(merge(data, sections))


def paris_samples(m=2.0, C=0.05, n=12):
    """Cycle samples whose forward differences obey da/dN = C dK^m exactly."""
    out, a = [], 20.0
    smax, smin = 3.0, 1.5
    for k in range(n):
        out.append(CycleSample(float(k + 1), a, smax, smin))
        dk = (smax - smin) * math.sqrt(math.pi * a)
        a_next = a + C * dk**m
        # dK of an interval is the mean of its end points; iterate to consistency
        for _ in range(50):
            dk_mid = 0.5 * (dk + (smax - smin) * math.sqrt(math.pi * a_next))
            a_next = a + C * dk_mid**m
        a = a_next
    return out


# ---- configuration ---------------------------------------------------------


def test_presets_load_and_round_trip():
    for name in ("ci", "paper"):
        cfg = load_pipeline_config(preset=name)
        back = PipelineConfig.from_dict(cfg.to_dict())
        assert back == cfg
    ci = load_pipeline_config(preset="ci")
    assert ci.md.rve.crack_kind == "blunt" and ci.md.rve.c_fraction == 0
    paper = load_pipeline_config(preset="paper")
    assert paper.md.rve.box == (200.0, 200.0, 10.0)


def test_unknown_section_and_key_rejected():
    data = preset_dict("ci")
    with pytest.raises(ConfigError, match="unknown sections"):
        PipelineConfig.from_dict({**data, "bogus": {}})
    bad = merge(data, {"extraction": {"colour": "red"}})
    with pytest.raises(ConfigError, match="extraction"):
        PipelineConfig.from_dict(bad)
    bad = merge(data, {"macro": {"a0": 80.0}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(bad)


def test_missing_sections_reported():
    data = preset_dict("ci")
    del data["macro"]
    with pytest.raises(ConfigError, match=r"\[macro\]"):
        PipelineConfig.from_dict(data)
    data = preset_dict("ci")
    del data["rve"]
    with pytest.raises(ConfigError, match="rve"):
        PipelineConfig.from_dict(data)


def test_supplied_constants_need_no_micro_sections(tmp_path):
    cfg = PipelineConfig.from_dict({"fit": {"constants": MODEL_A}, "macro": {}, "output": {"dir": str(tmp_path)}})
    assert cfg.fit.supplies_constants


def test_bad_supplied_constants_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"fit": {"constants": {"m": -1.0, "C": 1e-11}}, "macro": {}, "output": {}})
    with pytest.raises(ConfigError, match="at most one"):
        PipelineConfig.from_dict({"fit": {"constants": MODEL_A, "paris_file": "p.json"}, "macro": {}, "output": {}})


def test_file_layers_over_preset_and_resolves_paths(tmp_path):
    (tmp_path / "run.toml").write_text(
        'preset = "ci"\n[rve]\nseed = 7\n[fit]\nparis_file = "paris.json"\n[output]\ndir = "out"\n'
    )
    cfg = load_pipeline_config(tmp_path / "run.toml")
    assert cfg.seed == 7
    assert cfg.md.rve.box == (60.0, 60.0, 8.55)
    assert cfg.outdir == tmp_path / "out"
    assert cfg.fit.paris_file == str(tmp_path / "paris.json")


def test_unknown_preset_and_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="preset"):
        load_pipeline_config(preset="huge")
    with pytest.raises(ConfigError):
        load_pipeline_config(tmp_path / "missing.toml")
    (tmp_path / "broken.toml").write_text("[rve\n")
    with pytest.raises(ConfigError):
        load_pipeline_config(tmp_path / "broken.toml")


def test_replace_with_dotted_keys(tmp_path):
    cfg = load_pipeline_config(preset="ci")
    new = cfg.replace(**{"rve.seed": 4, "rve.crack_kind": "sharp", "outdir": tmp_path})
    assert (new.seed, new.md.rve.crack_kind, new.outdir) == (4, "sharp", tmp_path)
    assert cfg.seed == 1


# ---- supplied constants and caching ----------------------------------------


def test_supplied_constants_run_macro_only(tmp_path):
    cfg = supplied_config(tmp_path)
    m = run_pipeline(cfg)
    assert [(s.name, s.status) for s in m.stages] == [
        ("md_rve", "skipped"), ("crack_vision", "skipped"), ("paris_fit", "supplied"), ("xfem_core", "ran"),
    ]
    life = read_life_curve(tmp_path / "xfem_core" / "life_curve.csv")
    assert np.all(np.diff(life["N"]) > 0) and np.all(np.diff(life["a_mm"]) > 0)
    summary = json.loads((tmp_path / "xfem_core" / "summary.json").read_text())
    assert summary["fractured"] and summary["cause"] == "boundary"
    # the constants pass through unchanged
    const = ParisConstants.load(tmp_path / "paris_fit" / "paris.json")
    assert (const.m, const.C, const.units) == (2.9041, 1.4299e-11, "mpa_sqrt_mm")


def test_seed_recorded_in_every_artifact(tmp_path):
    cfg = supplied_config(tmp_path, rve={"seed": 11})
    m = run_pipeline(cfg)
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 11
    assert ParisConstants.load(tmp_path / "paris_fit" / "paris.json").extra["seed"] == 11
    xf = tmp_path / "xfem_core"
    for name in ("life_curve.csv", "crack_path.csv"):
        assert (xf / name).read_text().startswith("# seed=11\n")
    assert json.loads((xf / "summary.json").read_text())["seed"] == 11
    vtks = sorted(xf.glob("field_*.vtk"))
    assert vtks and all("seed 11" in v.read_text().splitlines()[1] for v in vtks)
    assert m.seed == 11


def test_manifest_lists_stages_in_order_with_digests(tmp_path):
    m = run_pipeline(supplied_config(tmp_path))
    saved = RunManifest.load(tmp_path / "manifest.json")
    assert [s.name for s in saved.stages] == ["md_rve", "crack_vision", "paris_fit", "xfem_core"]
    xf = saved.stage("xfem_core")
    assert xf.inputs == {"paris_fit/paris.json": file_digest(tmp_path / "paris_fit" / "paris.json")}
    assert xf.outputs["xfem_core/life_curve.csv"] == file_digest(tmp_path / "xfem_core" / "life_curve.csv")
    assert saved.digests() == m.digests()
    assert saved.version == m.version and saved.ok


def test_unchanged_stages_are_reused(tmp_path):
    cfg = supplied_config(tmp_path)
    first = run_pipeline(cfg)
    again = run_pipeline(cfg)
    assert [s.status for s in again.stages] == ["skipped", "skipped", "cached", "cached"]
    assert again.digests() == first.digests()
    # changing a macro knob reruns only the macro stage
    changed = run_pipeline(cfg.replace(**{"macro.da": 2.5}))
    assert [s.status for s in changed.stages][2:] == ["cached", "ran"]


def test_tampered_output_triggers_rerun(tmp_path):
    cfg = supplied_config(tmp_path)
    first = run_pipeline(cfg)
    life = tmp_path / "xfem_core" / "life_curve.csv"
    life.write_text("corrupted\n")
    again = run_pipeline(cfg)
    assert again.stage("xfem_core").status == "ran"
    assert file_digest(life) == first.stage("xfem_core").outputs["xfem_core/life_curve.csv"]


def test_no_cache_reruns_everything(tmp_path):
    cfg = supplied_config(tmp_path)
    run_pipeline(cfg)
    m = run_pipeline(cfg, use_cache=False)
    assert m.stage("xfem_core").status == "ran"


def test_paris_file_and_inline_constants_agree(tmp_path):
    a = tmp_path / "a"
    run_pipeline(supplied_config(a))
    b = tmp_path / "b"
    data = merge(preset_dict("ci"), {"fit": {"paris_file": str(a / "paris_fit" / "paris.json")},
                                    "macro": COARSE, "output": {"dir": str(b)}})
    run_pipeline(PipelineConfig.from_dict(data))
    assert (a / "xfem_core" / "life_curve.csv").read_bytes() == (b / "xfem_core" / "life_curve.csv").read_bytes()


def test_missing_paris_file_fails_at_fit_stage(tmp_path):
    data = merge(preset_dict("ci"), {"fit": {"paris_file": str(tmp_path / "none.json")}, "output": {"dir": str(tmp_path)}})
    with pytest.raises(PipelineError) as info:
        run_pipeline(PipelineConfig.from_dict(data))
    assert info.value.stage == "paris_fit"
    assert RunManifest.load(tmp_path / "manifest.json").failed_stage == "paris_fit"


def test_samples_file_is_fitted(tmp_path):
    samples = tmp_path / "samples.csv"
    write_samples(samples, paris_samples(m=2.0, C=0.05))
    data = merge(preset_dict("ci"), {"fit": {"samples_file": str(samples), "trim": 0.0}, "macro": COARSE,
                                    "output": {"dir": str(tmp_path / "run")}})
    m = run_pipeline(PipelineConfig.from_dict(data))
    assert m.stage("paris_fit").status == "ran"
    const = ParisConstants.load(tmp_path / "run" / "paris_fit" / "paris.json")
    assert const.m == pytest.approx(2.0, rel=1e-6)
    assert const.C == pytest.approx(0.05, rel=1e-5)
    assert const.units == "gpa_sqrt_angstrom"
    assert m.stage("xfem_core").status == "ran"


def test_decelerating_growth_is_not_a_paris_law(tmp_path):
    # growth slows while dK rises: an arresting crack, negative slope
    lengths = [20.0, 24.0, 26.0, 27.0, 27.5, 27.7]
    samples = [CycleSample(float(k + 1), a, 3.0, 1.5) for k, a in enumerate(lengths)]
    cfg = samples_config(tmp_path, "arrest", samples)
    with pytest.raises(PipelineError, match="no Paris law in 5 growth points") as info:
        run_pipeline(cfg)
    assert info.value.stage == "paris_fit"
    assert "m must be positive" in str(info.value)


def test_stale_samples_detected_by_digest(tmp_path):
    samples = tmp_path / "samples.csv"
    write_samples(samples, paris_samples(m=2.0, C=0.05))
    data = merge(preset_dict("ci"), {"fit": {"samples_file": str(samples)}, "output": {"dir": str(tmp_path / "run")}})
    cfg = PipelineConfig.from_dict(data)
    run_pipeline(cfg, macro=False)
    write_samples(samples, paris_samples(m=2.5, C=0.01))
    m = run_pipeline(cfg, macro=False)
    assert m.stage("paris_fit").status == "ran"
    assert ParisConstants.load(tmp_path / "run" / "paris_fit" / "paris.json").m == pytest.approx(2.5, rel=1e-3)


# ---- runs through the MD stage ---------------------------------------------


def test_zero_amplitude_halts_at_fit(tmp_path):
    cfg = tiny_md_config(tmp_path, loading={"peak_start": 0.0, "peak_increment": 0.0, "cycles": 3})
    with pytest.raises(PipelineError, match="no growth points") as info:
        run_pipeline(cfg)
    assert info.value.stage == "paris_fit"
    m = RunManifest.load(tmp_path / "manifest.json")
    assert [(s.name, s.status) for s in m.stages] == [
        ("md_rve", "ran"), ("crack_vision", "ran"), ("paris_fit", "failed"),
    ]
    assert "no growth points" in m.stage("paris_fit").error
    assert not (tmp_path / "xfem_core").exists()


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    out = []
    for name in ("one", "two"):
        cfg = tiny_md_config(root / name)
        try:
            run_pipeline(cfg, macro=False)
        except PipelineError:
            pass  # too small to grow a crack reliably; the micro stages still ran
        out.append(RunManifest.load(root / name / "manifest.json"))
    return root, out


def test_micro_stages_are_deterministic(tiny_runs):
    _, (one, two) = tiny_runs
    for stage in ("md_rve", "crack_vision"):
        assert one.stage(stage).status == "ran"
        assert one.digests()[stage] == two.digests()[stage]


def test_md_stage_artifacts(tiny_runs):
    root, _ = tiny_runs
    md = root / "one" / "md_rve"
    assert (md / "cycles.csv").read_text().startswith("# seed=1\n")
    recs = read_cycle_records(md / "cycles.csv")
    assert [r.cycle for r in recs] == [1, 2]
    frames = sorted((md / "frames").glob("frame_*.png"))
    snaps = sorted((md / "snapshots").glob("snapshot_*.xyz"))
    assert len(frames) == len(snaps) == 2
    system, vm = read_xyz(snaps[-1])
    assert system.strain == pytest.approx(recs[-1].min_strain) and np.all(vm >= 0)
    assert 'seed=1' in snaps[-1].read_text().splitlines()[1]
    raster = read_image(frames[0])
    assert raster.scale == 1.0 and raster.origin[1] < 0


def test_vision_stage_matches_md_measurement(tiny_runs):
    root, _ = tiny_runs
    recs = read_cycle_records(root / "one" / "md_rve" / "cycles.csv")
    rows = (root / "one" / "crack_vision" / "cracks.csv").read_text().splitlines()
    assert rows[0] == "# seed=1" and rows[1] == "frame,crack_len_A,tip_x_A,tip_y_A"
    for rec, row in zip(recs, rows[2:]):
        frame, length, x, y = row.split(",")
        assert frame == f"frame_{rec.cycle:04d}"
        assert float(length) == rec.crack_len_raw_A
        assert (float(x), float(y)) == (rec.tip_x_A, rec.tip_y_A)


def test_rerun_reuses_micro_stages(tiny_runs):
    root, _ = tiny_runs
    cfg = tiny_md_config(root / "one")
    try:
        m = run_pipeline(cfg, macro=False)
    except PipelineError:
        m = RunManifest.load(root / "one" / "manifest.json")
    assert m.stage("md_rve").status == "cached" and m.stage("crack_vision").status == "cached"


def test_md_stage_holds_one_snapshot(tmp_path, monkeypatch):
    import rvefatigue.pipeline.run as run_mod

    live = []
    original = run_mod.write_raster_png

    def spy(raster, path, **kw):
        live.append(raster)
        original(raster, path, **kw)

    monkeypatch.setattr(run_mod, "write_raster_png", spy)
    cfg = tiny_md_config(tmp_path, loading={"peak_start": 0.0, "peak_increment": 0.0, "cycles": 3})
    with pytest.raises(PipelineError):
        run_pipeline(cfg)
    recs = read_cycle_records(tmp_path / "md_rve" / "cycles.csv")
    assert len(live) == len(recs) == 3
    # records returned by the MD loop carry no rasters once written
    assert all(r.raster is None for r in recs)


# ---- model comparison ------------------------------------------------------


def samples_config(tmp_path, name, samples):
    path = tmp_path / f"{name}.csv"
    write_samples(path, samples)
    data = merge(preset_dict("ci"), {"fit": {"samples_file": str(path), "trim": 0.0},
                                    "output": {"dir": str(tmp_path / name)}})
    return PipelineConfig.from_dict(data)


def test_compare_table_with_failing_row(tmp_path):
    flat = [CycleSample(float(k), 20.0, 3.0, 1.5) for k in range(1, 6)]
    configs = [
        ("A", samples_config(tmp_path, "a", paris_samples(2.0, 0.05))),
        ("B", samples_config(tmp_path, "b", flat)),
        ("C", samples_config(tmp_path, "c", paris_samples(1.5, 0.02))),
        ("D", samples_config(tmp_path, "d", paris_samples(2.0, 0.05))),
    ]
    rows = compare_models(configs, tmp_path)
    assert [r.model for r in rows] == ["A", "B", "C", "D"]
    assert [r.ok for r in rows] == [True, False, True, True]
    assert "no growth points" in rows[1].error
    assert all(r.constants.m > 0 and r.constants.C > 0 for r in rows if r.ok)
    # duplicate inputs give identical constants
    assert (rows[0].constants.m, rows[0].constants.C) == (rows[3].constants.m, rows[3].constants.C)
    assert rows[2].constants.m == pytest.approx(1.5, rel=1e-6)
    table = (tmp_path / "compare" / "constants.csv").read_text().splitlines()
    assert table[0] == "model,material,crack_type,m,C,r2,n_points,status,error"
    assert len(table) == 5 and ",failed," in table[2]
    text = format_table(rows)
    assert "failed" in text and text.count("\n") == 4


def test_model_variants_cover_materials_and_cracks(tmp_path):
    base = load_pipeline_config(preset="ci").replace(outdir=tmp_path)
    variants = model_variants(base)
    assert [n for n, _ in variants] == ["A", "B", "C", "D"]
    kinds = [(c.md.rve.crack_kind, c.md.rve.c_fraction, c.md.rve.vacancy_fraction) for _, c in variants]
    assert kinds == [("blunt", 0.0, 0.0), ("sharp", 0.0, 0.0), ("blunt", 0.002, 0.005), ("sharp", 0.002, 0.005)]
    assert len({c.outdir for _, c in variants}) == 4
    assert all(c.seed == base.seed for _, c in variants)
