import csv
import json

import numpy as np
import pytest

from fdrelay.cli import (BER_COLUMNS, EE_COLUMNS, EE_DRAW_COLUMNS, SWEEP_COLUMNS, main, parse_config)
from fdrelay.channel import snr_relay_db

TINY_BER = ["--N", "8,10", "--K", "2", "--pr-db", "0,10", "--trials", "4", "--symbols", "20"]
TINY_EE = ["--N", "12", "--K", "2", "--draws", "2", "--n-it", "50", "--L", "2", "--sum-rates", "1,2"]


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert len(lines) - len(body) <= 1 and all(ln.startswith("#") for ln in lines[:len(lines) - len(body)])
    return list(csv.reader(body))


def payload(path):
    return "".join(ln for ln in path.read_text(encoding="utf-8").splitlines(True) if not ln.startswith("#"))


def test_default_spec_matches_fig2_setup():
    spec = parse_config({})
    assert spec.experiment == "relay-ber"
    assert (spec.K, spec.snr_db, spec.mod_order) == (5, 8.0, 16)
    assert (spec.sigma_li2, spec.eps_h2, spec.eps_t2) == (1.0, 1e-3, 1e-3)
    cfg = spec.system_config(64)
    assert np.all(cfg.p_s == 1.0)
    assert snr_relay_db(cfg) == pytest.approx(8.0)


def test_ee_defaults():
    spec = parse_config({"experiment": "opa-ee"})
    assert (spec.K, spec.snr_db, spec.sigma_nd2) == (10, 16.0, 1.0)
    assert (spec.n_it, spec.L) == (1000, 5)


def test_invalid_combinations_rejected():
    with pytest.raises(ValueError, match="K=64"):
        parse_config({"K": 64, "N": "32"})
    with pytest.raises(ValueError, match="unknown configuration keys"):
        parse_config({"bogus": 1})
    with pytest.raises(ValueError):
        parse_config({"modes": "MMSE,XX"})
    assert main(["--K", "64", "--N", "32"]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    kv = tmp_path / "run.cfg"
    kv.write_text("# sweep\nexperiment = e2e-ber\nK = 3\nN = 16, 32\npr_db = 0,5\n", encoding="utf-8")
    spec = parse_config({"K": 4}, kv)
    assert spec.experiment == "e2e-ber" and spec.K == 4 and spec.N == [16, 32] and spec.pr_db == [0.0, 5.0]
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"experiment": "opa-ee", "sum_rates": [1, 2]}), encoding="utf-8")
    assert parse_config({}, js).sum_rates == [1.0, 2.0]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ValueError, match="malformed"):
        parse_config({}, bad)


@pytest.mark.parametrize("experiment,columns", [("relay-ber", BER_COLUMNS), ("e2e-ber", BER_COLUMNS),
                                                ("custom-sweep", SWEEP_COLUMNS)])
def test_ber_schema(tmp_path, experiment, columns):
    assert main(["--experiment", experiment, *TINY_BER, "--mode", "MMSE,HD", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / f"{experiment}.csv")
    assert rows[0] == columns
    assert len(rows) == 1 + 2 * 2 * 2
    for row in rows[1:]:
        rec = dict(zip(columns, row))
        assert rec["mode"] in ("MMSE", "HD") and int(rec["K"]) == 2
        err_cols = [c for c in columns if c.endswith("bit_errors")]
        for c in err_cols:
            bits = int(rec[c.replace("bit_errors", "bits")])
            assert 0 <= int(rec[c]) <= bits == 4 * 19 * 2 * 4
            assert float(rec[c.replace("bit_errors", "ber")]) == pytest.approx(int(rec[c]) / bits)
    meta = json.loads((tmp_path / f"{experiment}.meta.json").read_text())
    assert meta["spec"]["experiment"] == experiment
    assert meta["system_config"]["8"]["n_rx"] == 8


def test_ee_schema(tmp_path):
    assert main(["--experiment", "opa-ee", *TINY_EE, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "opa-ee.csv")
    assert rows[0] == EE_COLUMNS
    assert len(rows) == 1 + 4 * 2 * 2
    for row in rows[1:]:
        rec = dict(zip(EE_COLUMNS, row))
        assert int(rec["iteration"]) in (1, 2) and 0 <= int(rec["feasible"]) <= 2
        float(rec["EE"]), float(rec["p_R"]), float(rec["p_S_total"])
    draws = read_csv(tmp_path / "opa-ee_draws.csv")
    assert draws[0] == EE_DRAW_COLUMNS
    assert {r[-1] for r in draws[1:]} <= {"true", "false"}


@pytest.mark.parametrize("args", [["--experiment", "relay-ber", *TINY_BER],
                                  ["--experiment", "opa-ee", *TINY_EE]])
def test_same_seed_same_bytes(tmp_path, args):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main([*args, "--seed", "7", "--out", str(out)]) == 0
    for f in sorted(a.glob("*.csv")):
        assert payload(f) == payload(b / f.name)
    main([*args, "--seed", "7", "--no-timestamp", "--out", str(tmp_path / "c")])
    for f in sorted(a.glob("*.csv")):
        assert (tmp_path / "c" / f.name).read_text() == payload(f)
    main([*args, "--seed", "8", "--no-timestamp", "--out", str(tmp_path / "d")])
    assert any((tmp_path / "d" / f.name).read_text() != payload(f) for f in a.glob("*.csv"))


def test_threads_do_not_change_ber_output(tmp_path):
    main(["--experiment", "relay-ber", *TINY_BER, "--no-timestamp", "--out", str(tmp_path / "one")])
    main(["--experiment", "relay-ber", *TINY_BER, "--no-timestamp", "--threads", "3", "--out", str(tmp_path / "three")])
    assert (tmp_path / "one" / "relay-ber.csv").read_bytes() == (tmp_path / "three" / "relay-ber.csv").read_bytes()
