"""Config, report, and command-line behavior: exit codes, schema, determinism."""

from __future__ import annotations

import json
import random
from fractions import Fraction as F
from pathlib import Path

import jsonschema
import pytest

from nowhere_lq import (
    Depths,
    QInterval,
    canonical_json,
    certify_divergence,
    certify_membership,
    lemma_chain,
    stage,
    tn_bounds,
    validate_document,
)
from nowhere_lq.cli import main
from nowhere_lq.config import ENV_CONFIG, RunConfig, load_config, parse_config_text
from nowhere_lq.exact import DomainError
from nowhere_lq.report import LB_CSV_COLUMNS, render_lb_figure, write_lb_csv

SMALL = ("--J", "4", "--L", "4", "--D", "4", "--m", "6", "--Jg", "4")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_parse_config_text_typed_values():
    got = parse_config_text(
        "# comment\n"
        "precision = 64\n"
        "p = 3/2\n"
        "figures = no\n"
        "compact = true\n"
        "J = 4  # trailing comment\n"
        "output_dir = /tmp/somewhere\n"
        "\n"
    )
    assert got["precision"] == 64
    assert got["p"] == F(3, 2)
    assert got["figures"] is False
    assert got["compact"] is True
    assert got["J"] == 4
    assert got["output_dir"] == Path("/tmp/somewhere")


@pytest.mark.parametrize(
    "line",
    ["zzz = 1", "precision = fast", "p = 1/0", "compact = maybe", "just-a-line", "J = 2.5"],
)
def test_parse_config_text_rejects(line):
    with pytest.raises(DomainError):
        parse_config_text(line)


def test_run_config_replaced_routes_depths():
    cfg = RunConfig().replaced(J=4, m=9, precision=128)
    assert cfg.depths.J == 4 and cfg.depths.m == 9 and cfg.depths.L == 16
    assert cfg.precision == 128
    with pytest.raises(DomainError):
        RunConfig(precision=8)
    with pytest.raises(DomainError):
        RunConfig().replaced(p=F(1, 2))


def test_load_config_path_and_env(tmp_path, monkeypatch):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("precision = 48\ncompact = yes\n")
    assert load_config(cfg_file).precision == 48
    monkeypatch.setenv(ENV_CONFIG, str(cfg_file))
    import os

    assert load_config(None, env=os.environ).compact is True
    monkeypatch.delenv(ENV_CONFIG)
    assert load_config(None, env=os.environ) == RunConfig()
    with pytest.raises(DomainError):
        load_config(tmp_path / "missing.cfg")


# ---------------------------------------------------------------------------
# report: canonical JSON, schema, CSV, figure
# ---------------------------------------------------------------------------


def test_canonical_json_is_deterministic_and_sorted():
    doc = {"b": 1, "a": [{"z": "2", "y": "3"}]}
    first = canonical_json(doc, compact=True)
    assert first == canonical_json(dict(reversed(doc.items())), compact=True)
    assert first == '{"a":[{"y":"3","z":"2"}],"b":1}\n'
    pretty = canonical_json(doc)
    assert pretty.endswith("\n") and "\n  " in pretty
    assert json.loads(pretty) == json.loads(first)


def test_schema_accepts_all_emitted_kinds():
    docs = [
        {"schema_version": "nowhere-lq/1", "kind": "stage", **stage(4).to_json()},
        lemma_chain(F(1), F(2), n_max=5).to_json(),
        certify_membership(1, Depths(4, 4, 4, 6, 4)).to_json(),
        certify_divergence(1, QInterval(F(0), F(1)), F(2), 2, Depths(4, 4, 4, 6, 4)).to_json(),
    ]
    for doc in docs:
        validate_document(doc)


def test_schema_rejects_corrupt_documents():
    doc = lemma_chain(F(1), F(2), n_max=3).to_json()
    bad_kind = dict(doc, kind="nonsense")
    with pytest.raises(jsonschema.ValidationError):
        validate_document(bad_kind)
    bad_rat = json.loads(json.dumps(doc))
    bad_rat["rows"][0]["t_n"] = "one half"
    with pytest.raises(jsonschema.ValidationError):
        validate_document(bad_rat)
    missing = dict(doc)
    del missing["rows"]
    with pytest.raises(jsonschema.ValidationError):
        validate_document(missing)


def test_lb_csv_columns_and_rows(tmp_path):
    rep = lemma_chain(F(1), F(2), n_max=6)
    path = tmp_path / "lb.csv"
    write_lb_csv(rep, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(LB_CSV_COLUMNS)
    assert len(lines) == 7
    row3 = lines[3].split(",")
    assert row3[0] == "3" and row3[1] == "5/32"
    assert row3[2].startswith("1.4853") and row3[3].startswith("1.4853")
    assert row3[4].startswith("0.7937")
    for line in lines[1:]:
        _, _, lb_lo, lb_hi, safe = line.split(",")
        assert float(lb_lo) <= float(lb_hi) and float(safe) <= float(lb_lo)


def test_lb_figure_rendered(tmp_path):
    rep = lemma_chain(F(1), F(2), n_max=6)
    path = tmp_path / "lb.png"
    render_lb_figure(rep, path)
    assert path.exists() and path.stat().st_size > 1000


# ---------------------------------------------------------------------------
# CLI: exit codes and emitted documents
# ---------------------------------------------------------------------------


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_cantor_stage(capsys):
    code, out, _ = run_cli(capsys, "cantor", "stage", "3")
    doc = json.loads(out)
    assert code == 0
    assert doc["kind"] == "stage" and doc["measure"] == "5/8"
    validate_document(doc)


def test_cli_cantor_tn_compact_and_out(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "--compact", "cantor", "tn", "3")
    assert code == 0 and out.count("\n") == 1
    target = tmp_path / "tn.json"
    code, out, _ = run_cli(capsys, "--out", str(target), "cantor", "tn", "3")
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    assert doc["t_n"] == "5/32" and doc["fast_bound_holds"] is False
    assert doc["fast_bound"] == "1/8" == str(tn_bounds(3)["fast_bound"])
    validate_document(doc)


def test_cli_abuilt(capsys):
    code, out, _ = run_cli(capsys, "abuilt", "2", "--depth", "4", "--stage", "4")
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "abuilt"
    assert doc["measure"] == "135/512"
    assert doc["component_count"] == 15
    validate_document(doc)


def test_cli_lemma_chain(capsys):
    code, out, _ = run_cli(capsys, "lemma-chain", "--p", "1", "--q", "2", "--nmax", "4")
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "lemma_chain" and doc["j0"] == 2
    assert len(doc["rows"]) == 4
    validate_document(doc)


def test_cli_certify_divergence_roundtrip(capsys):
    code, out, _ = run_cli(
        capsys,
        "certify", "divergence", "--g", "1", "--interval", "0,1",
        "--q", "2", "--target", "10", *SMALL,
    )
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "divergence_integral"
    validate_document(doc)


def test_cli_certify_divergence_ess_sup(capsys):
    code, out, _ = run_cli(
        capsys,
        "certify", "divergence", "--g", "1", "--interval", "0,1",
        "--q", "inf", "--target", "100", *SMALL,
    )
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "divergence_ess_sup"
    validate_document(doc)


def test_cli_budget_exhaustion_exits_2(capsys):
    code, out, _ = run_cli(
        capsys,
        "certify", "divergence", "--g", "1", "--interval", "0,1",
        "--q", "2", "--target", "1000000000", "--n-budget", "4", *SMALL,
    )
    doc = json.loads(out)
    assert code == 2 and doc["kind"] == "failure" and doc["n_reached"] == 4
    validate_document(doc)


def test_cli_precondition_exits_1(capsys):
    code, out, err = run_cli(capsys, "lemma-chain", "--p", "2", "--q", "1")
    assert code == 1 and out == "" and "q must exceed p" in err


def test_cli_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["cantor", "stage", "3", "--bogus-flag"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_cli_certify_membership(capsys):
    code, out, _ = run_cli(capsys, "certify", "membership", "--g", "1", *SMALL)
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "membership"
    assert doc["identity_exact"] is True
    assert F(doc["norm"]["lo"]) <= 1 <= F(doc["norm"]["hi"])
    validate_document(doc)


def test_cli_isometry(capsys):
    code, out, _ = run_cli(capsys, "isometry", "--coeffs", "1,-1/2", *SMALL)
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "isometry"
    assert doc["symbolic_identity"] is True
    validate_document(doc)


def test_cli_projection(capsys):
    code, out, _ = run_cli(capsys, "projection", "--k", "2", *SMALL)
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "projection"
    assert doc["delta_exact"] is True
    validate_document(doc)


def test_cli_plot_data_writes_csv_and_figure(capsys, tmp_path):
    code, out, _ = run_cli(
        capsys,
        "--output-dir", str(tmp_path),
        "emit", "plot-data", "--series", "lb", "--p", "1", "--q", "2", "--nmax", "8",
    )
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "plot_data"
    csv_path = tmp_path / "lb_p1_q2.csv"
    png_path = tmp_path / "lb_p1_q2.png"
    assert csv_path.exists() and png_path.exists()
    assert len(csv_path.read_text().strip().splitlines()) == 9
    validate_document(doc)


def test_cli_plot_data_no_figure(capsys, tmp_path):
    code, _, _ = run_cli(
        capsys,
        "--output-dir", str(tmp_path),
        "emit", "plot-data", "--series", "lb", "--p", "1", "--q", "2",
        "--nmax", "5", "--no-figure",
    )
    assert code == 0
    assert (tmp_path / "lb_p1_q2.csv").exists()
    assert not (tmp_path / "lb_p1_q2.png").exists()


def test_cli_env_config(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("compact = yes\n")
    monkeypatch.setenv(ENV_CONFIG, str(cfg))
    code, out, _ = run_cli(capsys, "cantor", "stage", "2")
    assert code == 0 and out.count("\n") == 1


def test_cli_emissions_are_byte_deterministic(capsys):
    args = ("lemma-chain", "--p", "1", "--q", "2", "--nmax", "6")
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second
