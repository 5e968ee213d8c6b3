import json
from fractions import Fraction
from pathlib import Path

import pytest

from sumproduct_lab.cli import main
from sumproduct_lab.errors import BudgetExceeded, PreconditionError
from sumproduct_lab.families import (
    FamilySpec, arithmetic_progression, cantor, generate_family, load_custom, random_non_concentrated,
)
from sumproduct_lab.grid_set import GridSet, non_concentration_constant, write
from sumproduct_lab.sweep import SweepConfig, load_config, run_sweep

GOLDEN = Path(__file__).parent / "golden"


class TestFamilies:
    def test_cantor_size(self):
        A = cantor(12, [0, 3])
        assert len(A) == 64
        assert A.indices[0] == 4096

    def test_cantor_digits(self):
        A = cantor(4, [0, 3])
        assert [k - 16 for k in A.indices] == [0, 3, 12, 15]

    def test_cantor_bad_L(self):
        with pytest.raises(PreconditionError):
            cantor(5, [0, 3])

    def test_ap(self):
        A = arithmetic_progression(8, 4)
        assert len(A) == 64 and A.indices[0] == 256 and A.indices[-1] == 508

    def test_random_nc_self_check(self):
        A = random_non_concentrated(12, Fraction(1, 2), 4, seed=7)
        assert len(A) == 64
        assert non_concentration_constant(A, Fraction(1, 2)).c_observed <= 4

    def test_random_nc_deterministic(self):
        spec = FamilySpec("random_nc", 10, seed=3)
        assert generate_family(spec).indices == generate_family(spec).indices

    def test_random_nc_budget(self):
        with pytest.raises(BudgetExceeded, match="best observed"):
            random_non_concentrated(8, Fraction(1, 2), Fraction(1, 2), seed=1, attempts=3)

    def test_gp_in_range(self):
        A = generate_family(FamilySpec("gp", 10))
        assert 1024 <= A.indices[0] and A.indices[-1] <= 2048

    def test_custom_reverified(self, tmp_path):
        p = tmp_path / "a.txt"
        write(GridSet.from_indices([256, 300, 511], 8), p)
        assert len(load_custom(p, 8, 3)) == 3
        with pytest.raises(PreconditionError):
            load_custom(p, 9)
        with pytest.raises(PreconditionError):
            load_custom(p, 8, 4)
        p.write_text("8 0 512 2\n100\n300\n")
        with pytest.raises(PreconditionError):
            load_custom(p)

    @pytest.mark.parametrize("kw", [dict(kind="nope", L=8), dict(kind="ap", L=0),
                                    dict(kind="ap", L=8, sigma_target=1), dict(kind="ap", L=8, seed=-1)])
    def test_bad_spec(self, kw):
        with pytest.raises(ValueError):
            FamilySpec(**kw)


def _cfg(tmp_path, text):
    p = tmp_path / "sweep.ini"
    p.write_text(text)
    return load_config(p)


MIXED = """
[sweep]
L = 8
j = 2

[family ap]
kind = ap
step = 4

[family rnd]
kind = random_nc
seed = 7
"""


class TestSweep:
    def test_empty(self):
        result = run_sweep(SweepConfig())
        assert result.rows == [] and result.failed_rows == 0
        assert result.csv_text().count("\n") == 1

    def test_deterministic_csv(self, tmp_path):
        a = run_sweep(_cfg(tmp_path, MIXED)).csv_text()
        b = run_sweep(_cfg(tmp_path, MIXED)).csv_text()
        assert a == b

    def test_k_recomputes(self, tmp_path):
        for row in run_sweep(_cfg(tmp_path, MIXED)).rows:
            assert row.K == Fraction(row.cover_sum + row.cover_prod, row.n)
            assert Fraction(row.csv_row()[7]) == Fraction(float(row.K))

    def test_row_order(self, tmp_path):
        cfg = _cfg(tmp_path, MIXED + "\n[family aaa]\nkind = ap\nL = 10 8\n")
        assert [(r.family, r.L) for r in run_sweep(cfg).rows] == [("aaa", 8), ("aaa", 10), ("ap", 8), ("rnd", 8)]

    def test_failed_row_captured(self, tmp_path):
        cfg = _cfg(tmp_path, "[sweep]\nL = 8\n[family bad]\nkind = custom-file\npath = missing.txt\n"
                             "[family ap]\nkind = ap\nstep = 4\n")
        result = run_sweep(cfg)
        assert result.failed_rows == 1
        assert result.rows[0].family == "ap" and result.rows[0].error is None
        assert result.rows[1].csv_row()[8] == "failed"

    def test_L_must_divide(self, tmp_path):
        with pytest.raises(ValueError):
            _cfg(tmp_path, "[sweep]\nL = 9\n[family ap]\nkind = ap\n")

    def test_bundle(self, tmp_path):
        cfg = _cfg(tmp_path, MIXED)
        cfg.json_path = tmp_path / "out.json"
        cfg.oracle_universe = 3
        result = run_sweep(cfg)
        result.write()
        bundle = json.loads(cfg.json_path.read_text())
        assert set(bundle) == {"version", "config", "rows", "oracle_findings"}
        assert set(bundle["oracle_findings"]) == {"plunnecke", "ruzsa"}
        assert result.theorem_violations == 0

    def test_cantor_golden(self):
        cfg = load_config(GOLDEN / "cantor.ini")
        assert run_sweep(cfg).csv_text() == (GOLDEN / "cantor_sigma_half.csv").read_text()


class TestCli:
    def test_constants(self, capsys):
        assert main(["constants", "--sigma", "1/2"]) == 0
        out = capsys.readouterr().out
        assert "1/136" in out and "7/34" in out and "|A|^(1 - 1/68)" in out

    def test_constants_json(self, capsys):
        assert main(["constants", "--sigma", "1/3", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["sigma"] == "1/3"

    def test_generate_and_classify(self, tmp_path, capsys):
        p = tmp_path / "ap.txt"
        assert main(["generate", "--kind", "ap", "--L", "10", "--param", "step=64", "--out", str(p)]) == 0
        capsys.readouterr()
        assert main(["classify", "--input", str(p), "--gamma", "1/4"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["classification"]["verdict"] == "gap"

    def test_analyze(self, tmp_path, capsys):
        p = tmp_path / "ap.txt"
        main(["generate", "--kind", "ap", "--L", "8", "--param", "step=4", "--out", str(p)])
        capsys.readouterr()
        assert main(["analyze", "--input", str(p), "--sigma", "1/2"]) == 0
        assert json.loads(capsys.readouterr().out)["verdict"] == "dense"

    def test_operational_error(self, tmp_path, capsys):
        assert main(["classify", "--input", str(tmp_path / "none.txt"), "--gamma", "1/4"]) == 1
        assert main(["constants", "--sigma", "2"]) == 1

    def test_bad_param(self):
        assert main(["generate", "--kind", "ap", "--L", "8", "--param", "step"]) == 1

    def test_sweep_exit_codes(self, tmp_path, capsys):
        ok = tmp_path / "ok.ini"
        ok.write_text(MIXED)
        assert main(["sweep", "--config", str(ok), "--csv", str(tmp_path / "o.csv")]) == 0
        assert (tmp_path / "o.csv").read_text().startswith("family,L,")
        empty = tmp_path / "empty.ini"
        empty.write_text("[sweep]\nL = 8\n")
        assert main(["sweep", "--config", str(empty)]) == 0
        assert main(["sweep", "--config", str(GOLDEN / "cantor.ini")]) == 1

    def test_verify_oracles(self, capsys):
        assert main(["verify-oracles", "--universe", "4", "--ruzsa-universe", "3"]) == 0

    def test_long_flags_only(self):
        with pytest.raises(SystemExit):
            main(["constants", "--sig", "1/2"])
