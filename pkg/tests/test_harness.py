import csv
import io
import json

import pytest

from cardylab import __version__, cli, fixtures
from cardylab.harness import (
    EXIT_CODES,
    FILE_NAMES,
    ExperimentConfig,
    HarnessError,
    SweepReport,
    classify,
    emit,
    plateau_verdict,
    read_report,
    render_csv,
    render_plotdata,
    run,
    trend_verdict,
)


@pytest.fixture
def square_file(tmp_path):
    p = tmp_path / "square.json"
    fixtures.unit_square().dump(p)
    return p


@pytest.fixture
def slit_file(tmp_path):
    p = tmp_path / "slit.json"
    fixtures.slit_square().dump(p)
    return p


def cli_run(capsys, *args):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def small_sweep(square_file, out, **kw):
    return ExperimentConfig(str(square_file), (1 / 8, 1 / 16), 400, 5, "cardy_sweep", str(out), **kw)


# ---------------------------------------------------------------- config validation and error codes
@pytest.mark.parametrize(
    "kw,code",
    [
        ({"samples": 99}, "CONFIG_INVALID"),
        ({"scales": (1 / 16, 1 / 8)}, "CONFIG_INVALID"),
        ({"scales": (1 / 8, 1 / 8)}, "CONFIG_INVALID"),
        ({"seed": -1}, "CONFIG_INVALID"),
        ({"kind": "nope"}, "CONFIG_INVALID"),
        ({"kind": "approx_audit", "formats": ("plotdata",)}, "FORMAT_UNSUPPORTED"),
    ],
)
def test_invalid_configs_have_codes(square_file, tmp_path, kw, code):
    base = dict(domain=str(square_file), scales=(1 / 8,), samples=100, seed=0, kind="cardy_sweep", out=str(tmp_path))
    base.update(kw)
    with pytest.raises(HarnessError) as ei:
        ExperimentConfig(**base)
    assert ei.value.code == code


def test_malformed_domain_exits_with_domain_parse(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"outer": [[0, 0], [1, 0]], "marks": {}}')
    code, _, err = cli_run(capsys, "sweep", "--domain", bad, "--scales", "1/8", "--samples", 100, "--out", tmp_path / "o")
    assert code == EXIT_CODES["DOMAIN_PARSE"] == 3
    assert json.loads(err)["error"]["code"] == "DOMAIN_PARSE"


def test_unreadable_domain_is_a_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = cli_run(capsys, "audit", "--domain", bad, "--scales", "1/8", "--out", tmp_path / "o")
    assert code == 3


def test_too_few_samples_exits_two(square_file, tmp_path, capsys):
    code, _, err = cli_run(capsys, "sweep", "--domain", square_file, "--scales", "1/8", "--samples", 50, "--out", tmp_path)
    assert code == 2 and json.loads(err)["error"]["code"] == "CONFIG_INVALID"


def test_bad_flag_keeps_the_json_contract(square_file, tmp_path, capsys):
    code, _, err = cli_run(capsys, "sweep", "--domain", square_file, "--scales", "1/8", "--bogus", "--out", tmp_path)
    assert code == 2 and "error" in json.loads(err)


def test_plotdata_on_an_audit_exits_eight(square_file, tmp_path, capsys):
    code, _, err = cli_run(
        capsys, "audit", "--domain", square_file, "--scales", "1/8", "--out", tmp_path, "--format", "plotdata"
    )
    assert code == 8 and json.loads(err)["error"]["code"] == "FORMAT_UNSUPPORTED"


def test_unknown_exceptions_are_internal():
    assert classify(RuntimeError("x")).code == "INTERNAL"
    assert classify(OSError("x")).code == "IO"


def test_sweep_without_a_probe_is_a_config_error(tmp_path, capsys):
    p = tmp_path / "noprobe.json"
    fixtures.rectangle(1.0, probe=False).dump(p)
    code, _, err = cli_run(capsys, "sweep", "--domain", p, "--scales", "1/8", "--samples", 100, "--out", tmp_path / "o")
    assert (code, json.loads(err)["error"]["code"]) == (2, "CONFIG_INVALID")


def test_probe_off_arc_a_makes_an_invalid_domain(square_file, tmp_path, capsys):
    code, _, err = cli_run(
        capsys, "sweep", "--domain", square_file, "--scales", "1/8", "--samples", 100, "--out", tmp_path / "o", "--probe", "0.5,0"
    )
    assert (code, json.loads(err)["error"]["code"]) == (3, "DOMAIN_PARSE")


# ---------------------------------------------------------------- outputs
def test_sweep_writes_all_formats_with_provenance(square_file, tmp_path):
    cfg = small_sweep(square_file, tmp_path / "o")
    rep = run(cfg)
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert names == sorted(list(FILE_NAMES.values()) + ["timings.json"])
    for name in FILE_NAMES.values():
        text = (tmp_path / "o" / name).read_text()
        assert rep.config_hash in text and __version__ in text and "5" in text
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["seed"] == 5 and doc["config_hash"] == rep.config_hash
    assert rep.oracle["value"] == pytest.approx(0.5, abs=1e-6)
    assert len(rep.rows) == 2 and all(r["audit_passed"] for r in rep.rows) if "audit_passed" in rep.columns else True


def test_json_round_trip_is_exact(square_file, tmp_path):
    rep = run(small_sweep(square_file, tmp_path / "o"))
    back = read_report(tmp_path / "o" / "report.json")
    assert back == rep
    assert back.to_json() == (tmp_path / "o" / "report.json").read_text()


def test_empty_sweep_is_headers_only(tmp_path):
    rep = SweepReport("cardy_sweep", __version__, 1, "h" * 64, {}, {}, ["epsilon", "estimate"], [])
    lines = render_csv(rep).splitlines()
    assert len(lines) == 2 and lines[0].startswith("# cardylab") and lines[1] == "epsilon,estimate"
    path = emit(rep, "csv", tmp_path)
    assert path.read_text() == render_csv(rep)


def test_plotdata_column_order(square_file, tmp_path):
    rep = run(small_sweep(square_file, tmp_path / "o"), write=False)
    rows = [l for l in render_plotdata(rep).splitlines() if not l.startswith("#")]
    assert rows[0].split("\t")[:4] == ["log_eps", "abs_err", "ci_lo", "ci_hi"]
    assert len(rows) == 3
    for r in rows[1:]:
        log_eps, err, lo, hi = (float(x) for x in r.split("\t")[:4])
        assert lo <= err <= hi


def test_csv_has_one_row_per_scale_and_probe(slit_file, tmp_path):
    cfg = ExperimentConfig(
        str(slit_file), (1 / 8, 1 / 16), 200, 1, "boundary_decay", str(tmp_path / "o"),
        options={"probes": [[0.9, 0.25], [0.7, 0.25]]},
    )
    rep = run(cfg)
    text = (tmp_path / "o" / "report.csv").read_text().splitlines()
    body = list(csv.reader(io.StringIO("\n".join(text[1:]))))
    assert len(body) == 1 + 2 * 2
    assert len(rep.rows) == 4


def test_numbers_carry_twelve_significant_digits(square_file, tmp_path):
    rep = run(small_sweep(square_file, tmp_path / "o"), write=False)
    for v in (rep.oracle["value"], rep.rows[0]["abs_err"]):
        assert len(repr(v).replace("0.", "").lstrip("0").replace(".", "").split("e")[0]) <= 12


def test_outputs_do_not_depend_on_threads_or_directory(square_file, tmp_path, monkeypatch):
    texts = []
    for threads, d in (("1", "a"), ("8", "b"), ("3", "c")):
        monkeypatch.setenv("CARDYLAB_THREADS", threads)
        run(small_sweep(square_file, tmp_path / d))
        texts.append({n: (tmp_path / d / n).read_bytes() for n in FILE_NAMES.values()})
    assert texts[0] == texts[1] == texts[2]


def test_changing_the_seed_changes_the_hash(square_file, tmp_path):
    a = run(small_sweep(square_file, tmp_path / "a"), write=False)
    b = run(ExperimentConfig(str(square_file), (1 / 8, 1 / 16), 400, 6, "cardy_sweep", str(tmp_path / "b")), write=False)
    assert a.config_hash != b.config_hash


# ---------------------------------------------------------------- verdicts
def test_trend_verdict_allows_noise_but_not_growth():
    assert trend_verdict([0.05, 0.02, 0.021], [0.005, 0.005, 0.005])["weakly_decreasing"]
    assert not trend_verdict([0.05, 0.02, 0.06], [0.005, 0.005, 0.005])["weakly_decreasing"]


def test_plateau_verdict():
    rows = [{"value": 0.28, "half_width": 0.01, "ci_lo": 0.27}, {"value": 0.29, "half_width": 0.01, "ci_lo": 0.28}]
    v = plateau_verdict(rows)
    assert v["mutually_consistent"] and v["min_ci_lo"] == pytest.approx(0.27) and v["min_value"] == 0.28
    rows[1]["value"] = 0.6
    assert not plateau_verdict(rows)["mutually_consistent"]


# ---------------------------------------------------------------- every subcommand end to end
def test_square_sweep_error_falls(square_file, tmp_path, capsys):
    code, out, _ = cli_run(
        capsys, "sweep", "--domain", square_file, "--scales", "1/16,1/32,1/64", "--samples", 10000, "--seed", 2, "--out", tmp_path
    )
    assert code == 0
    summary = json.loads(out)["summary"]
    assert summary["weakly_decreasing"] and summary["audits_passed"]


def test_audit_on_a_convex_polygon_passes(tmp_path, capsys):
    p = tmp_path / "pent.json"
    fixtures.pentagon().dump(p)
    code, out, _ = cli_run(capsys, "audit", "--domain", p, "--scales", "1/8,1/16,1/32", "--out", tmp_path / "o")
    assert code == 0
    rep = read_report(tmp_path / "o" / "report.json")
    assert rep.summary["all_passed"]


def test_rings_subcommand(square_file, tmp_path, capsys):
    code, out, _ = cli_run(
        capsys, "rings", "--domain", square_file, "--scales", "1/64", "--samples", 300, "--out", tmp_path,
        "--center", "0.5,0.0", "--half-size", 0.48, "--levels", 4, "--span", 2, "--assist", "C",
    )
    assert code == 0
    assert "min_ci_lo" in json.loads(out)["summary"]


def test_explore_subcommand(square_file, tmp_path, capsys):
    code, out, _ = cli_run(capsys, "explore", "--domain", square_file, "--scales", "1/16", "--samples", 100, "--out", tmp_path)
    assert code == 0
    summary = json.loads(out)["summary"]
    assert summary["sides_failed"] == 0 and summary["sides_evaluated"] > 0


def test_equicont_subcommand(square_file, tmp_path, capsys):
    code, out, _ = cli_run(
        capsys, "equicont", "--domain", square_file, "--scales", "1/16", "--samples", 200, "--out", tmp_path,
        "--slit", "[[0.5,0],[0.5,0.25],[0.5,0.5]]", "--count", 2,
    )
    assert code == 0
    assert "envelopes" in json.loads(out)["summary"]
