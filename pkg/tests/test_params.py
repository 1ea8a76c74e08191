import math

import pytest

from twotier.params import (ConfigError, InconsistentPair, MissingKey, OutOfRange, SystemParams,
                            UnknownKey, derive, hex_area, load_config, parse_config_text,
                            reference_gain, reference_params, validate)

TABLE_I = {
    "R_c": 500, "R_f": 20, "U_f": 5, "N_sec": 3, "N_hop": 1, "G": 128, "gamma": 2,
    "epsilon": 0.1, "P_r_c": 1, "P_r_f": 1, "sigma_dB": 4, "alpha": 4, "beta": 2,
    "d_0c": 100, "d_0f": 5, "f_carrier": 2e9,
}


def test_table_values_validate():
    p = validate({k: str(v) for k, v in TABLE_I.items()}, base=reference_params())
    assert p == reference_params()


def test_femto_radius_must_be_below_macro_radius():
    with pytest.raises(OutOfRange) as ei:
        reference_params(R_f=500.0)
    assert any("R_f" in str(v) for v in ei.value.violations)


def test_hop_count_above_gain_rejected():
    with pytest.raises(InconsistentPair):
        reference_params(N_hop=256)
    # equality allowed
    assert reference_params(N_hop=128).N_hop == 128


@pytest.mark.parametrize("key,value", [
    ("epsilon", 0.0), ("epsilon", 1.0), ("alpha", 2.0), ("G", 0.0), ("gamma", -1.0),
    ("d_0f", 100.0), ("P_r_f", 0.0), ("N_sec", 0),
])
def test_out_of_range(key, value):
    with pytest.raises(ConfigError):
        reference_params(**{key: value})


def test_unknown_and_missing_keys():
    with pytest.raises(UnknownKey):
        validate({"R_cc": "1"}, base=reference_params())
    with pytest.raises(MissingKey):
        validate({"R_c": "500"})


def test_interference_constant_hand_value(params):
    # independent hand computation: K_c/K_f = (d_0f/d_0c)^2 = 1/400, so
    # Q_f = 1 * 20^2 * (1/400) * 100^4 / 5^2 = 400 * 0.0025 * 1e8 / 25 = 4.0e6
    assert params.K_c / params.K_f == pytest.approx(2.5e-3, rel=1e-12)
    assert params.Q_f == pytest.approx(4.0e6, rel=1e-12)


def test_reference_gain_free_space():
    c = 299_792_458.0
    assert reference_gain(2e9, 100.0) == pytest.approx((c / (4 * math.pi * 2e9 * 100.0)) ** 2)


def test_derive_scaling(params):
    d = derive(params, 0.0, 50.0)
    assert d.lambda_c == 0.0
    assert d.lambda_f == pytest.approx(50.0 / params.area_H)
    assert d.rho_c == pytest.approx(128 / 2)
    assert reference_params(P_r_f=2.0).Q_f == pytest.approx(2 * params.Q_f, rel=1e-12)
    assert reference_params(R_f=40.0).Q_f == pytest.approx(4 * params.Q_f, rel=1e-12)


def test_hex_area():
    assert hex_area(1.0) == pytest.approx(1.5 * math.sqrt(3.0))
    assert abs(reference_params().area_H / 500.0**2 - 2.598) / 2.598 < 1e-3


def test_config_file_roundtrip(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nR_c = 400   # inline\nhopping_mode = independent\n"
                   "tier_selection = true\n")
    p = load_config(cfg, base=reference_params(), overrides={"N_hop": "4"})
    assert (p.R_c, p.hopping_mode, p.tier_selection, p.N_hop) == (400.0, "independent", True, 4)


def test_config_error_reports_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text("R_c = 500\n\nnot a pair\n")


def test_params_immutable_and_digest(params):
    with pytest.raises(Exception):
        params.R_c = 1.0
    assert params.digest() == reference_params().digest()
    assert params.digest() != params.replace(G=64.0).digest()
    assert isinstance(params, SystemParams)
