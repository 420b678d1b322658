import json
import math

import pytest

from speciesppf import io
from speciesppf.cli import main, parse_polynomial
from speciesppf.partitions import dp_log_eppf


def write(path, payload):
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


def run(tmp_path, command, config, *flags, name="cfg.json"):
    cfg = write(tmp_path / name, config) if config is not None else None
    argv = [command, *( ["--config", str(cfg)] if cfg else []), *flags]
    return main(argv)


@pytest.mark.parametrize(
    "text, coefficients",
    [("m^2+1", [1, 0, 1]), ("2*m", [0, 2]), ("0.5m + 3", [3, 0.5]), ("m**3 - m + 2", [2, -1, 0, 1]), ("1", [1])],
)
def test_parse_polynomial(text, coefficients):
    assert parse_polynomial(text) == pytest.approx(coefficients)


class TestValidatePpf:
    def test_dp_passes(self, tmp_path):
        out = tmp_path / "o"
        assert run(tmp_path, "validate-ppf", {"ppf": {"family": "dp", "theta": 2.83}, "bound": 6}, "--out", str(out)) == 0
        report = json.loads((out / "balance.json").read_text())
        assert report["holds"] and report["bound"] == 6
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "validate-ppf" and "balance.json" in manifest["outputs"]
        assert manifest["version"]

    def test_square_rule_fails_with_witness(self, tmp_path):
        out = tmp_path / "o"
        config = {"ppf": {"family": "polynomial-f", "f": "m^2+1", "theta": 1}, "bound": 3}
        assert run(tmp_path, "validate-ppf", config, "--out", str(out)) == 1
        first = json.loads((out / "balance.json").read_text())["violations"][0]
        assert first["composition"] == "1"
        assert first["lhs"] == pytest.approx(1 / 9) and first["rhs"] == pytest.approx(2 / 15)

    def test_linear_f(self, tmp_path):
        config = {"ppf": {"family": "linear-f", "slope": 2, "intercept": 0, "theta": 1}, "bound": 5}
        assert run(tmp_path, "validate-ppf", config, "--out", str(tmp_path / "o")) == 0
        config["ppf"]["intercept"] = 1
        assert run(tmp_path, "validate-ppf", config, "--out", str(tmp_path / "o2")) == 1

    @pytest.mark.parametrize(
        "config",
        ['{"ppf": ', {"ppf": {"family": "nope"}}, {"ppf": {"family": "dp", "theta": -1}}, {"bound": 3}, [1, 2]],
    )
    def test_config_errors(self, tmp_path, config):
        assert run(tmp_path, "validate-ppf", config, "--out", str(tmp_path / "o")) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["validate-ppf", "--config", str(tmp_path / "absent.json")]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["no-such-command"])
        assert info.value.code == 2


class TestDeriveEppf:
    def test_dp_table(self, tmp_path):
        out = tmp_path / "o"
        assert run(tmp_path, "derive-eppf", {"ppf": {"family": "dp", "theta": 1}, "bound": 4}, "--out", str(out)) == 0
        rows = {r["composition"]: float(r["log_probability"]) for r in io.read_csv(out / "eppf.csv")}
        assert rows["1-1-1"] == pytest.approx(math.log(1 / 6), rel=1e-12)
        assert all(v == pytest.approx(dp_log_eppf(tuple(map(int, k.split("-"))), 1.0), rel=1e-12, abs=1e-15) for k, v in rows.items())
        assert io.read_eppf(out / "eppf.csv").bound == 4

    def test_bound_one(self, tmp_path):
        out = tmp_path / "o"
        assert run(tmp_path, "derive-eppf", {"ppf": {"family": "dp", "theta": 1}, "bound": 1}, "--out", str(out)) == 0
        assert (out / "eppf.csv").read_text() == "composition,log_probability\n1,0.0\n"

    def test_path_dependent(self, tmp_path):
        out = tmp_path / "o"
        config = {"ppf": {"family": "polynomial-f", "coefficients": [1, 0, 1], "theta": 1}, "bound": 4}
        assert run(tmp_path, "derive-eppf", config, "--out", str(out)) == 1
        witness = json.loads((out / "path_dependence.json").read_text())
        assert sum(map(int, witness["composition"].split("-"))) == 3


class TestEstimatePpf:
    def test_scenario_file_and_determinism(self, tmp_path):
        (tmp_path / "scen.txt").write_text("# sizes\n1\n3-1\n\n2-2\n")
        config = {"weights": {"kind": "dp-stick-breaking", "params": {"theta": 1}}, "draws": 6000, "scenarios": "scen.txt"}
        assert run(tmp_path, "estimate-ppf", config, "--out", str(tmp_path / "a"), "--workers", "1") == 0
        assert run(tmp_path, "estimate-ppf", config, "--out", str(tmp_path / "b"), "--workers", "3") == 0
        a, b = (tmp_path / "a" / "ppf.csv").read_bytes(), (tmp_path / "b" / "ppf.csv").read_bytes()
        assert a == b and b"\r" not in a
        rows = io.read_csv(tmp_path / "a" / "ppf.csv")
        assert list(rows[0]) == ["composition", "j", "estimate", "stderr", "L", "ess", "seed"]
        assert len(rows) == 2 + 3 + 3

    def test_bad_scenario(self, tmp_path):
        (tmp_path / "scen.txt").write_text("1-0\n")
        config = {"draws": 10, "scenarios": "scen.txt"}
        assert run(tmp_path, "estimate-ppf", config, "--out", str(tmp_path / "o")) == 2


class TestFlags:
    def test_conflict_is_error(self, tmp_path):
        config = {"ppf": {"family": "dp", "theta": 1}, "seed": 3}
        assert run(tmp_path, "validate-ppf", config, "--seed", "4", "--out", str(tmp_path / "o")) == 2

    def test_equal_values_allowed(self, tmp_path):
        config = {"ppf": {"family": "dp", "theta": 1}, "seed": 3, "bound": 2}
        assert run(tmp_path, "validate-ppf", config, "--seed", "3", "--out", str(tmp_path / "o")) == 0

    def test_out_from_config(self, tmp_path):
        config = {"ppf": {"family": "dp", "theta": 1}, "bound": 2, "out": str(tmp_path / "from_cfg")}
        assert run(tmp_path, "validate-ppf", config) == 0
        assert (tmp_path / "from_cfg" / "manifest.json").exists()


class TestOtherCommands:
    def test_sample_weights(self, tmp_path):
        out = tmp_path / "o"
        assert main(["sample-weights", "--seed", "5", "--out", str(out)]) == 0
        rows = io.read_csv(out / "weights.csv")
        assert list(rows[0]) == ["h", "weight", "sorted"]
        meta = json.loads((out / "weights_meta.json").read_text())
        total = sum(float(r["weight"]) for r in rows) + meta["tail_mass"]
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_simulate(self, tmp_path):
        out = tmp_path / "o"
        config = {"ppf": {"family": "dp", "theta": 1}, "length": 7, "replicates": 3}
        assert run(tmp_path, "simulate", config, "--out", str(out)) == 0
        rows = io.read_csv(out / "sequences.csv")
        assert len(rows) == 21 and rows[0]["label"] == "0"


class TestFit:
    def test_grid_preset(self, tmp_path):
        out = tmp_path / "o"
        assert main(["fit", "--preset", "grid", "--iters", "120", "--burn-in", "20", "--out", str(out)]) == 0
        for name in ("cocluster.csv", "k_dist.csv", "nmax_dist.csv", "predictive.csv", "states.txt", "manifest.json"):
            assert (out / name).exists()
        states = io.read_states(out / "states.txt")
        assert len(states) == 100 and all(len(s) == 9 for s in states)
        k = io.read_csv(out / "k_dist.csv")
        assert sum(float(r["probability"]) for r in k) == pytest.approx(1.0)

    def test_deterministic_outputs(self, tmp_path):
        for name in ("a", "b"):
            assert main(["fit", "--preset", "grid", "--iters", "30", "--burn-in", "5", "--seed", "8", "--out", str(tmp_path / name)]) == 0
        for name in ("cocluster.csv", "k_dist.csv", "nmax_dist.csv", "predictive.csv", "states.txt", "log_scores.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_sarcoma_single_sweep(self, tmp_path):
        out = tmp_path / "o"
        assert main(["fit", "--preset", "sarcoma", "--iters", "1", "--burn-in", "0", "--out", str(out)]) == 0
        header = (out / "cocluster.csv").read_text().splitlines()[0]
        assert header == "item,LEI,LIP,MFH,OST,Syn,Ang,MPNST,Fib"
        assert not (out / "predictive.csv").exists()

    def test_data_file(self, tmp_path):
        (tmp_path / "d.csv").write_text("y,n\n1,5\n2,6\n0,4\n")
        config = {"likelihood": "binomial", "data": "d.csv", "model": {"alpha": 1, "beta": 1}}
        assert run(tmp_path, "fit", config, "--iters", "5", "--burn-in", "1", "--out", str(tmp_path / "o")) == 0

    def test_ssm_prior_config(self, tmp_path):
        config = {"prior": {"kind": "ssm", "weights": {"kind": "logistic-normal"}, "ppf_draws": 100}}
        assert run(tmp_path, "fit", config, "--preset", "grid", "--iters", "3", "--burn-in", "0", "--out", str(tmp_path / "o")) == 0

    @pytest.mark.parametrize(
        "config, flags",
        [
            ({}, []),
            ({"likelihood": "binomial"}, ["--preset", "grid"]),
            ({"model": {"c": -1}}, ["--preset", "grid"]),
            ({}, ["--preset", "grid", "--iters", "5", "--burn-in", "5"]),
            ({"data": "missing.csv"}, []),
        ],
    )
    def test_fit_config_errors(self, tmp_path, config, flags):
        assert run(tmp_path, "fit", config, *flags, "--out", str(tmp_path / "o")) == 2
