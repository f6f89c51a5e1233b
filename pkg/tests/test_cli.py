import json
import shutil

from loopsynth.cli import main
from loopsynth.interp import check_equiv
from loopsynth.ir import loops
from loopsynth.parse import load_program


def test_roll_mac(tmp_path, fixtures_dir, capsys):
    assert main(["roll", str(fixtures_dir / "mac.slc"), "-o", str(tmp_path), "--dump-ddg",
                 "--dump-templates", "--dump-egraph"]) == 0
    out = capsys.readouterr().out
    assert "statements: 8 -> 1" in out and "equivalent" in out
    rolled = load_program(tmp_path / "rolled.slc")
    (lp,) = loops(rolled.body)
    assert lp.trip_count() == 8
    rep = json.loads((tmp_path / "roll_report.json").read_text())
    assert rep["verdict"]["equivalent"] and rep["seed"] == 0
    assert (tmp_path / "ddg.dot").read_text().startswith("digraph")
    for name in ("templates.json", "egraph.json"):
        json.loads((tmp_path / name).read_text())


def test_roll_min_seq_len(tmp_path, fixtures_dir):
    assert main(["roll", str(fixtures_dir / "mac.slc"), "-o", str(tmp_path), "--min-seq-len", "100"]) == 0
    assert not list(loops(load_program(tmp_path / "rolled.slc").body))


def test_check_codes(tmp_path, fixtures_dir, capsys):
    mac = fixtures_dir / "mac.slc"
    assert main(["check", str(mac), str(mac)]) == 0
    mutated = tmp_path / "m.slc"
    mutated.write_text(mac.read_text().replace("a[3] * b[3]", "a[3] * b[2]"))
    capsys.readouterr()
    assert main(["check", str(mac), str(mutated)]) == 1
    verdict = json.loads(capsys.readouterr().out)
    assert "counterexample" in verdict
    assert main(["check", str(mac), str(fixtures_dir / "fiat_add4.slc")]) == 2


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["roll", str(tmp_path / "missing.slc")]) == 2


def test_explore_outputs(tmp_path, fixtures_dir):
    src = tmp_path / "in.slc"
    src.write_text("void k(const u64 a[8], const u64 c[1], u64 t[8]) {\n"
                   "    L: for (int v = 0; v < 8; v++) { t[v] = a[v] * c[0]; }\n}\n")
    assert main(["explore", str(src), "-o", str(tmp_path / "o"), "--max-unroll", "4", "--refine", "2"]) == 0
    o = tmp_path / "o"
    ds = json.loads((o / "design_space.json").read_text())
    assert ds["seed"] == 0 and len(ds["points"]) >= 13
    assert set(ds["points"][0]) >= {"id", "transforms", "pragmas", "program_digest"}
    lines = (o / "pareto.csv").read_text().splitlines()
    assert lines[0] == "# seed=0"
    assert lines[1] == "design_id,latency_cycles,dsp,lut,ff,bram,r_percent,npi"
    svg = (o / "pareto.svg").read_text()
    assert 'width="800" height="600"' in svg
    assert (o / "best.c").read_text().count("void k(") == 1
    assert ds["hypervolume"] == sorted(ds["hypervolume"])


def test_explore_loop_free(tmp_path):
    src = tmp_path / "flat.slc"
    src.write_text("void f(const u64 a[1], u64 o[1]) { o[0] = a[0] + 1; }\n")
    assert main(["explore", str(src), "-o", str(tmp_path)]) == 0
    ds = json.loads((tmp_path / "design_space.json").read_text())
    assert len(ds["points"]) == 1
    assert len((tmp_path / "pareto.csv").read_text().splitlines()) == 3


def test_combine(tmp_path, fixtures_dir, capsys):
    fronts = [str(fixtures_dir / "fronts" / n) for n in ("kernel_a.csv", "kernel_b.csv")]
    assert main(["combine", *fronts, "-o", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "combined.json").read_text())
    assert res["selected"]["qor"]["latency_cycles"] == 67 and res["selected"]["qor"]["dsp"] == 602
    assert main(["combine", *fronts, "-o", str(tmp_path), "--dsp-budget", "100"]) == 3
    res = json.loads((tmp_path / "combined.json").read_text())
    assert res["infeasible"]["witness"]["qor"]["dsp"] == 602


def test_combine_two_single_points(tmp_path):
    for name, row in (("x.csv", "x0,10,5,0,0,0"), ("y.csv", "y0,20,7,0,0,0")):
        (tmp_path / name).write_text("design_id,latency_cycles,dsp,lut,ff,bram\n" + row + "\n")
    assert main(["combine", str(tmp_path / "x.csv"), str(tmp_path / "y.csv"), "-o", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "combined.json").read_text())
    assert len(res["front"]) == 1
    assert res["front"][0]["qor"]["dsp"] == 12 and res["front"][0]["qor"]["latency_cycles"] == 20


def test_report(fixtures_dir, capsys):
    assert main(["report", str(fixtures_dir / "mac.slc")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["kernel"] == "mac" and rep["side_channel"] == []


def test_roll_then_explore_equivalent(tmp_path, fixtures_dir):
    shutil.copy(fixtures_dir / "fiat_select6.slc", tmp_path / "s.slc")
    assert main(["roll", str(tmp_path / "s.slc"), "-o", str(tmp_path)]) == 0
    assert check_equiv(load_program(tmp_path / "s.slc"), load_program(tmp_path / "rolled.slc")).equivalent
    assert main(["explore", str(tmp_path / "rolled.slc"), "-o", str(tmp_path)]) == 0
