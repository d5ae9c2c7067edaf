import subprocess
import sys

import pytest

from vccsim.cli import RunConfig, build_parser, main, parse_config, run
from vccsim.errors import InvalidConfigurationError
from vccsim.recipes import RECIPES, list_recipes


class TestParseConfig:
    def test_flags_only(self):
        cfg = parse_config(recipe="fig3", seed=5, locations=3, fadings=2)
        assert cfg == RunConfig("fig3", 5, 3, 2, None, {}, 1)

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("recipe=fig4\nseed=9\nlocations=7\nL=16\nQ=optimize\n")
        cfg = parse_config(path=str(path))
        assert cfg.recipe == "fig4" and cfg.seed == 9 and cfg.n_locations == 7
        assert cfg.overrides == {"L": 16, "Q": None}

    def test_flags_beat_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("recipe=fig4\nseed=9\n")
        cfg = parse_config(path=str(path), recipe="fig3", seed=1)
        assert cfg.recipe == "fig3" and cfg.seed == 1

    def test_set_overrides(self):
        cfg = parse_config(recipe="fig3", sets=["L=16", "gamma=5/6", "ptot_dbm=40,43"])
        assert cfg.overrides == {"L": 16, "gamma": __import__("fractions").Fraction(5, 6),
                                 "ptot_dbm": (40.0, 43.0)}

    def test_unknown_key_named(self):
        with pytest.raises(InvalidConfigurationError, match="banana_mode"):
            parse_config(recipe="fig3", sets=["banana_mode=1"])

    def test_type_mismatch_named(self):
        with pytest.raises(InvalidConfigurationError, match="'L'"):
            parse_config(recipe="fig3", sets=["L=banana"])

    def test_unknown_recipe(self):
        with pytest.raises(InvalidConfigurationError, match="fig99"):
            parse_config(recipe="fig99")

    def test_missing_recipe(self):
        with pytest.raises(InvalidConfigurationError, match="recipe"):
            parse_config(sets=["L=8"])


class TestListRecipes:
    def test_contains_all_names(self):
        text = list_recipes()
        for name in (f"fig{i}" for i in range(2, 10)):
            assert f"{name}:" in text
        assert set(RECIPES) == {f"fig{i}" for i in range(2, 10)}

    def test_fig4_parameters(self):
        assert "L=32, M=4, Q=2, Q'=8, G=4" in list_recipes()

    def test_fig7_micro(self):
        text = list_recipes()
        assert "fig7: Micro-cell" in text and "L=32, M=2, G=6" in text

    def test_csit_note(self):
        text = list_recipes()
        assert "csit_error_var=0.01" in text

    def test_stable_output(self):
        assert list_recipes() == list_recipes()


def run_cli(args):
    return subprocess.run(
        [sys.executable, "-m", "vccsim", *args],
        capture_output=True, text=True,
    )


class TestRun:
    def test_smoke_and_summary(self, tmp_path):
        out = tmp_path / "fig4.csv"
        cfg = parse_config(
            recipe="fig4", seed=1, locations=3, fadings=1, out=str(out)
        )
        assert run(cfg) == 0
        text = out.read_text()
        assert text.splitlines()[0] == "# recipe=fig4"
        assert "scheme,ptot_dbm,snr_db,q,mean_rate_nats" in text
        assert "vcc_bd_mrc," in text and "cacheless_bd_mrc," in text

    def test_same_seed_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            run(parse_config(recipe="fig4", seed=3, locations=2, fadings=1, out=str(path)))
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_worker_count_byte_identical(self, tmp_path):
        outs = []
        for name, workers in (("w1.csv", 1), ("w8.csv", 8)):
            path = tmp_path / name
            cfg = parse_config(
                recipe="fig4", seed=3, locations=4, fadings=1,
                out=str(path), workers=workers,
            )
            run(cfg)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_echo_round_trip(self, tmp_path):
        out = tmp_path / "fig4.csv"
        cfg = parse_config(
            recipe="fig4", seed=7, locations=2, fadings=1, out=str(out),
            sets=["L=16", "Q=1", "Qprime=2", "ptot_dbm=40,43"],
        )
        run(cfg)
        # the echoed header alone reproduces the run request
        back = parse_config(path=str(out))
        assert back.recipe == cfg.recipe
        assert back.seed == cfg.seed
        assert back.n_locations == 2 and back.n_fadings == 1
        assert back.overrides == cfg.overrides

    def test_cli_process_exit_codes(self, tmp_path):
        ok = run_cli([
            "--recipe", "fig4", "--locations", "2", "--fadings", "1",
            "--set", "ptot_dbm=40", "--out", str(tmp_path / "x.csv"),
        ])
        assert ok.returncode == 0, ok.stderr
        assert "wrote" in ok.stdout
        bad = run_cli(["--recipe", "fig4", "--set", "L=banana"])
        assert bad.returncode == 2
        assert "L" in bad.stderr

    def test_list_recipes_flag(self):
        out = run_cli(["--list-recipes"])
        assert out.returncode == 0
        assert out.stdout == list_recipes()


class TestParser:
    def test_known_flags(self):
        parser = build_parser()
        args = parser.parse_args(
            ["--recipe", "fig7", "--seed", "4", "--workers", "2",
             "--locations", "10", "--fadings", "3", "--set", "L=16",
             "--out", "x.csv"]
        )
        assert args.recipe == "fig7" and args.workers == 2
        assert args.set == ["L=16"]

    def test_main_list(self, capsys):
        assert main(["--list-recipes"]) == 0
        assert "fig2:" in capsys.readouterr().out
