import json
import math

import pytest

from treatpolicy.config import (
    RESERVED_POLICY_NAMES,
    apply_overrides,
    config_hash,
    load_config,
    validate_config,
)
from treatpolicy.errors import ConfigError


def minimal(**extra):
    raw = {"data": {"path": "table.csv", "treatment": "treat", "outcome": "outcome"}}
    raw.update(extra)
    return raw


class TestDefaults:
    def test_every_section_is_echoed(self):
        echo = validate_config(minimal()).echo
        assert set(echo) == {
            "data", "splits", "propensity", "cate", "uncertainty", "deferral",
            "policy", "evaluation", "simulation", "identification", "report",
            "output_dir",
        }

    def test_documented_defaults(self):
        echo = validate_config(minimal()).echo
        assert echo["splits"]["fractions"] == [0.6, 0.15, 0.25]
        assert echo["propensity"]["learner"] == {"kind": "logistic", "lam": 1.0}
        assert echo["propensity"]["calibrate"] is True
        assert echo["propensity"]["bounds"] == {"method": "quantile", "q_low": 0.01, "q_high": 0.99}
        assert echo["cate"]["menu"] == {
            "t-ridge": {"kind": "t", "learner": {"kind": "ridge", "lam": 1.0}, "g_constant": None}
        }
        assert echo["cate"]["ensembles"] == []
        assert echo["uncertainty"] == {"alpha_stat": 0.9, "lam": 1.0, "b_boot": 200, "seed": 0}
        assert echo["deferral"] == {"mode": "conservative", "profile_lam": 0.1}
        assert echo["policy"] == {"direction": "higher-better", "threshold": 0.0}
        assert echo["evaluation"]["estimators"] == ["IPW", "DR"]
        assert echo["evaluation"]["bootstrap_b"] == 1000
        assert echo["simulation"]["enabled"] is False
        assert echo["identification"]["acknowledged"] is False
        assert echo["output_dir"] == "out"

    def test_echo_is_idempotent(self):
        cfg = validate_config(minimal())
        again = validate_config(cfg.echo)
        assert again.echo == cfg.echo
        assert again.hash == cfg.hash

    def test_data_keys_are_required(self):
        with pytest.raises(ConfigError, match="data.path"):
            validate_config({})
        with pytest.raises(ConfigError, match="data.outcome"):
            validate_config({"data": {"path": "t.csv", "treatment": "t"}})


class TestUnknownKeys:
    def test_top_level(self):
        with pytest.raises(ConfigError, match=r"\['outputdir'\] at top level"):
            validate_config(minimal(outputdir="x"))

    def test_nested_section(self):
        raw = minimal(evaluation={"bootstrp_b": 5})
        with pytest.raises(ConfigError, match=r"\['bootstrp_b'\] at evaluation"):
            validate_config(raw)

    def test_menu_entry(self):
        raw = minimal(cate={"menu": {"m": {"kind": "t", "learner": {"kind": "ridge"}, "lam": 1}}})
        with pytest.raises(ConfigError, match="cate.menu.m"):
            validate_config(raw)

    def test_bounds_param_for_other_method(self):
        raw = minimal(propensity={"bounds": {"method": "fixed", "eta_low": 0.1,
                                             "eta_high": 0.9, "q_low": 0.01}})
        with pytest.raises(ConfigError, match="q_low"):
            validate_config(raw)

    def test_uncertainty(self):
        with pytest.raises(ConfigError, match="alpha"):
            validate_config(minimal(uncertainty={"alpha": 0.9}))


class TestScalarChecks:
    def test_split_fractions(self):
        with pytest.raises(ConfigError, match="3 fractions"):
            validate_config(minimal(splits={"fractions": [0.5, 0.5]}))
        with pytest.raises(ConfigError, match="sum to 1"):
            validate_config(minimal(splits={"fractions": [0.5, 0.3, 0.3]}))

    def test_negative_seed(self):
        with pytest.raises(ConfigError, match="splits.seed"):
            validate_config(minimal(splits={"seed": -1}))

    def test_bad_mode_choice(self):
        with pytest.raises(ConfigError, match="deferral.mode"):
            validate_config(minimal(deferral={"mode": "strict"}))

    def test_rank_step_open_at_zero(self):
        with pytest.raises(ConfigError, match="rank_step"):
            validate_config(minimal(evaluation={"rank_step": 0}))
        echo = validate_config(minimal(evaluation={"rank_step": 1.0})).echo
        assert echo["evaluation"]["rank_step"] == 1.0

    def test_simulation_ranges(self):
        with pytest.raises(ConfigError, match="simulation.runs"):
            validate_config(minimal(simulation={"runs": 1}))
        with pytest.raises(ConfigError, match="train_frac"):
            validate_config(minimal(simulation={"train_frac": 1.0}))
        with pytest.raises(ConfigError, match="effect_size"):
            validate_config(minimal(simulation={"effect_size": 0}))

    def test_report_bins_minimum(self):
        with pytest.raises(ConfigError, match="report.bins"):
            validate_config(minimal(report={"bins": 1}))

    def test_boolean_typed(self):
        with pytest.raises(ConfigError, match="true or false"):
            validate_config(minimal(identification={"acknowledged": "yes"}))


class TestMenu:
    def menu(self, entries):
        return minimal(cate={"menu": entries})

    def test_reserved_names_rejected(self):
        for name in ("doctors", "treat-all-1", "ensemble-average"):
            assert name in RESERVED_POLICY_NAMES
            raw = self.menu({name: {"kind": "t", "learner": {"kind": "ridge"}}})
            with pytest.raises(ConfigError, match="reserved"):
                validate_config(raw)

    def test_name_charset(self):
        for bad in ("-lead", "has space", ""):
            raw = self.menu({bad: {"kind": "t", "learner": {"kind": "ridge"}}})
            with pytest.raises(ConfigError, match="name"):
                validate_config(raw)
        ok = self.menu({"Model.v2_x": {"kind": "t", "learner": {"kind": "ridge"}}})
        assert "Model.v2_x" in validate_config(ok).echo["cate"]["menu"]

    def test_learner_required_and_task_checked(self):
        with pytest.raises(ConfigError, match="learner is required"):
            validate_config(self.menu({"m": {"kind": "t"}}))
        with pytest.raises(ConfigError, match="m.learner"):
            validate_config(self.menu({"m": {"kind": "t", "learner": {"kind": "logistic"}}}))

    def test_bad_meta_kind(self):
        with pytest.raises(ConfigError, match="m.kind"):
            validate_config(self.menu({"m": {"kind": "r", "learner": {"kind": "ridge"}}}))

    def test_g_constant_range(self):
        raw = self.menu({"m": {"kind": "x", "learner": {"kind": "ridge"}, "g_constant": 1.5}})
        with pytest.raises(ConfigError, match="g_constant"):
            validate_config(raw)

    def test_empty_menu_rejected(self):
        with pytest.raises(ConfigError, match="at least one model"):
            validate_config(self.menu({}))


class TestBounds:
    def test_fixed_requires_both_etas(self):
        raw = minimal(propensity={"bounds": {"method": "fixed", "eta_low": 0.1}})
        with pytest.raises(ConfigError, match="eta_high is required"):
            validate_config(raw)

    def test_quantile_defaults_fill_in(self):
        echo = validate_config(minimal(propensity={"bounds": {"method": "quantile"}})).echo
        assert echo["propensity"]["bounds"] == {"method": "quantile", "q_low": 0.01, "q_high": 0.99}

    def test_min_count_positive(self):
        raw = minimal(propensity={"bounds": {"method": "min-count", "min_count": 0}})
        with pytest.raises(ConfigError, match="min_count"):
            validate_config(raw)

    def test_unknown_method(self):
        raw = minimal(propensity={"bounds": {"method": "adaptive"}})
        with pytest.raises(ConfigError, match="bounds.method"):
            validate_config(raw)


class TestUncertainty:
    def test_lam_and_alpha_causal_exclusive(self):
        raw = minimal(uncertainty={"lam": 1.2, "alpha_causal": 0.1})
        with pytest.raises(ConfigError, match="not both"):
            validate_config(raw)

    def test_alpha_causal_resolves_to_lam(self):
        echo = validate_config(minimal(uncertainty={"alpha_causal": 0.1})).echo
        assert echo["uncertainty"]["lam"] == pytest.approx(math.exp(0.1), abs=1e-15)
        assert "alpha_causal" not in echo["uncertainty"]

    def test_lam_below_one_rejected(self):
        with pytest.raises(ConfigError, match="lam"):
            validate_config(minimal(uncertainty={"lam": 0.99}))

    def test_alpha_stat_strictly_below_one(self):
        with pytest.raises(ConfigError, match="alpha_stat"):
            validate_config(minimal(uncertainty={"alpha_stat": 1.0}))

    def test_negative_b_boot_rejected(self):
        with pytest.raises(ConfigError, match="b_boot"):
            validate_config(minimal(uncertainty={"b_boot": -1}))


class TestListChecks:
    def test_estimators(self):
        with pytest.raises(ConfigError, match="at least one estimator"):
            validate_config(minimal(evaluation={"estimators": []}))
        with pytest.raises(ConfigError, match="twice"):
            validate_config(minimal(evaluation={"estimators": ["IPW", "IPW"]}))
        with pytest.raises(ConfigError, match="AIPW"):
            validate_config(minimal(evaluation={"estimators": ["AIPW"]}))

    def test_ensembles(self):
        with pytest.raises(ConfigError, match="voting"):
            validate_config(minimal(cate={"ensembles": ["voting"]}))
        with pytest.raises(ConfigError, match="twice"):
            validate_config(minimal(cate={"ensembles": ["average", "average"]}))


class TestHash:
    def test_stable_and_value_sensitive(self):
        a = validate_config(minimal())
        b = validate_config(minimal())
        c = validate_config(minimal(evaluation={"bootstrap_b": 5}))
        assert a.hash == b.hash
        assert a.hash != c.hash

    def test_key_order_irrelevant(self):
        fwd = {"data": {"path": "t.csv", "treatment": "t", "outcome": "y"}, "splits": {"seed": 3}}
        rev = {"splits": {"seed": 3}, "data": {"outcome": "y", "treatment": "t", "path": "t.csv"}}
        assert validate_config(fwd).hash == validate_config(rev).hash

    def test_hash_matches_canonical_json(self):
        cfg = validate_config(minimal())
        assert cfg.hash == config_hash(json.loads(json.dumps(cfg.echo)))


class TestAccessors:
    def test_schema_and_seeds(self):
        cfg = validate_config(minimal())
        schema = cfg.table_schema()
        assert schema.treatment == "treat" and schema.outcome == "outcome"
        assert set(cfg.seeds()) == {
            "splits", "propensity", "cate", "uncertainty", "evaluation", "simulation"
        }

    def test_bounds_kwargs_and_menu_objects(self):
        cfg = validate_config(minimal())
        assert cfg.bounds_kwargs() == {"method": "quantile", "q_low": 0.01, "q_high": 0.99}
        menu = cfg.cate_menu()
        assert list(menu) == ["t-ridge"]
        assert menu["t-ridge"].kind == "t"
        assert menu["t-ridge"].learner.kind == "ridge"

    def test_theta_reflects_uncertainty_section(self):
        cfg = validate_config(minimal(uncertainty={"alpha_stat": 0.8, "lam": 2.0, "b_boot": 7}))
        theta = cfg.theta()
        assert (theta.alpha_stat, theta.lam, theta.b_boot) == (0.8, 2.0, 7)


class TestOverrides:
    def test_json_coercion(self):
        out = apply_overrides({}, ["a.b=1", "a.flag=true", "a.arr=[1,2]", "a.s=plain"])
        assert out == {"a": {"b": 1, "flag": True, "arr": [1, 2], "s": "plain"}}

    def test_quoted_string_stays_string(self):
        out = apply_overrides({}, ['k="5"'])
        assert out == {"k": "5"}

    def test_overrides_win_over_file(self):
        raw = minimal(evaluation={"bootstrap_b": 7})
        out = apply_overrides(raw, ["evaluation.bootstrap_b=9"])
        assert out["evaluation"]["bootstrap_b"] == 9
        assert raw["evaluation"]["bootstrap_b"] == 7  # input untouched

    def test_descending_into_scalar_rejected(self):
        with pytest.raises(ConfigError, match="non-object"):
            apply_overrides({"output_dir": "x"}, ["output_dir.sub=1"])

    def test_malformed_assignments(self):
        with pytest.raises(ConfigError, match="dotted.key=value"):
            apply_overrides({}, ["noequals"])
        with pytest.raises(ConfigError, match="empty key"):
            apply_overrides({}, ["=5"])


class TestLoadConfig:
    def test_round_trip_with_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(minimal()))
        cfg = load_config(path, overrides=["splits.seed=3"])
        assert cfg.echo["splits"]["seed"] == 3
        assert cfg.source == str(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)
