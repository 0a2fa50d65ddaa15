"""Stealth identity, attack sampling and dataset generation/serialization."""

import numpy as np
import pytest

from fdilab import (
    AttackConfig,
    NoiseModel,
    build_jacobian,
    calibrate_threshold,
    craft_attack,
    default_attack_config,
    generate_dataset,
    inject,
    load_builtin,
    load_dataset,
    residual_norm,
    save_dataset,
    solve_dc_state,
    stealthiness_report,
    wls_estimate,
)
from fdilab.attack import batch_residuals

from oracles import random_connected_system


SIGMA = 0.01


class TestAttackConfig:
    def test_default_target_budget(self):
        assert default_attack_config(13).max_targets == 5
        assert default_attack_config(117).max_targets == 39
        assert default_attack_config(3).max_targets == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            AttackConfig(max_targets=0)
        with pytest.raises(ValueError):
            AttackConfig(max_targets=2, magnitude_low=0.2, magnitude_high=0.1)
        with pytest.raises(ValueError):
            AttackConfig(max_targets=2, magnitude_low=0.0)


class TestCraftAttack:
    def test_sparsity_and_magnitudes(self):
        jac = build_jacobian(load_builtin("ieee14"))
        cfg = AttackConfig(max_targets=5, magnitude_low=0.01, magnitude_high=0.1)
        rng = np.random.default_rng(0)
        for _ in range(200):
            atk = craft_attack(jac, cfg, rng)
            nz = np.abs(atk.c) > 0
            assert 1 <= nz.sum() <= 5
            assert np.all(np.abs(atk.c[nz]) >= 0.01)
            assert np.all(np.abs(atk.c[nz]) <= 0.1)

    def test_both_signs_appear(self):
        jac = build_jacobian(load_builtin("ieee14"))
        cfg = AttackConfig(max_targets=5)
        rng = np.random.default_rng(1)
        vals = np.concatenate([craft_attack(jac, cfg, rng).c for _ in range(50)])
        assert (vals > 0).any() and (vals < 0).any()

    def test_a_is_image_of_c(self):
        jac = build_jacobian(load_builtin("ieee14"))
        atk = craft_attack(jac, AttackConfig(max_targets=4), np.random.default_rng(2))
        assert np.allclose(atk.a, jac.matrix @ atk.c)

    def test_too_many_targets_rejected(self):
        jac = build_jacobian(load_builtin("ieee14"))
        with pytest.raises(ValueError, match="max_targets"):
            craft_attack(jac, AttackConfig(max_targets=14), np.random.default_rng(0))

    def test_inject_shape_check(self):
        jac = build_jacobian(load_builtin("ieee14"))
        atk = craft_attack(jac, AttackConfig(max_targets=3), np.random.default_rng(3))
        with pytest.raises(ValueError):
            inject(np.zeros(5), atk)


class TestStealthIdentity:
    def test_residual_unchanged_and_estimate_shifted(self):
        # the crafted attack moves the estimate by exactly c but the residual
        # does not move at all
        rng = np.random.default_rng(7)
        for _ in range(20):
            sys = random_connected_system(rng)
            jac = build_jacobian(sys)
            x = rng.normal(0.0, 0.2, sys.n_states)
            z = jac.matrix @ x + rng.normal(0.0, SIGMA, jac.n_measurements)
            cfg = AttackConfig(max_targets=max(1, sys.n_states // 2))
            atk = craft_attack(jac, cfg, rng)
            z_bad = inject(z, atk)
            var = SIGMA ** 2
            xh = wls_estimate(jac, var, z)
            xh_bad = wls_estimate(jac, var, z_bad)
            assert np.max(np.abs(xh_bad - (xh + atk.c))) < 1e-9
            r = residual_norm(z, jac, xh)
            r_bad = residual_norm(z_bad, jac, xh_bad)
            assert abs(r - r_bad) < 1e-8

    def test_naive_attack_is_flagged(self):
        # corrupting one measurement directly (a not in range of H) raises the
        # residual and the detector sees it
        sys = load_builtin("ieee14")
        jac = build_jacobian(sys)
        rng = np.random.default_rng(8)
        x = solve_dc_state(sys, jac, sys.injections())
        z = jac.matrix @ x + rng.normal(0.0, SIGMA, jac.n_measurements)
        thr = calibrate_threshold(sys, NoiseModel(SIGMA), n_samples=400, seed=9)
        var = SIGMA ** 2
        assert residual_norm(z, jac, wls_estimate(jac, var, z)) < thr
        z_naive = z.copy()
        z_naive[0] += 1.0
        r_naive = residual_norm(z_naive, jac, wls_estimate(jac, var, z_naive))
        assert r_naive > thr


class TestGenerateDataset:
    def test_shapes_counts_and_meta(self):
        sys = load_builtin("ieee14")
        ds = generate_dataset(sys, 100, 0.3, NoiseModel(SIGMA), 0.1, None, seed=5)
        assert ds.X.shape == (100, 34)
        assert ds.y.sum() == 30  # floor(100 * 0.3), exact
        assert ds.meta["system"] == "ieee14"
        assert ds.meta["max_targets"] == 5
        assert ds.meta["seed"] == 5

    def test_exact_attack_count_rounding(self):
        sys = load_builtin("ieee14")
        ds = generate_dataset(sys, 7, 0.5, NoiseModel(SIGMA), 0.1, None, seed=5)
        assert ds.y.sum() == 3  # floor(3.5)

    def test_deterministic_bitwise(self):
        sys = load_builtin("ieee14")
        a = generate_dataset(sys, 40, 0.5, NoiseModel(SIGMA), 0.1, None, seed=11)
        b = generate_dataset(sys, 40, 0.5, NoiseModel(SIGMA), 0.1, None, seed=11)
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.y, b.y)

    def test_seed_changes_data(self):
        sys = load_builtin("ieee14")
        a = generate_dataset(sys, 40, 0.5, NoiseModel(SIGMA), 0.1, None, seed=11)
        b = generate_dataset(sys, 40, 0.5, NoiseModel(SIGMA), 0.1, None, seed=12)
        assert not np.array_equal(a.X, b.X)

    def test_attacked_rows_differ_from_clean_image(self):
        sys = load_builtin("ieee14")
        ds = generate_dataset(sys, 30, 0.5, NoiseModel(SIGMA), 0.1, None,
                              seed=13, keep_clean=True)
        attacked = ds.y == 1
        assert not np.allclose(ds.X[attacked], ds.clean_X[attacked])
        assert np.array_equal(ds.X[~attacked], ds.clean_X[~attacked])

    def test_stealth_rates_close(self):
        sys = load_builtin("ieee14")
        noise = NoiseModel(SIGMA)
        ds = generate_dataset(sys, 1000, 0.5, noise, 0.1, None, seed=14)
        jac = build_jacobian(sys)
        thr = calibrate_threshold(sys, noise, n_samples=500, quantile=0.95, seed=15)
        clean_rate, attacked_rate = stealthiness_report(ds, jac, noise.sigma ** 2, thr)
        assert abs(clean_rate - attacked_rate) < 0.02
        assert clean_rate < 0.15  # calibrated at the 95th percentile

    def test_validation(self):
        sys = load_builtin("ieee14")
        noise = NoiseModel(SIGMA)
        with pytest.raises(ValueError):
            generate_dataset(sys, 1, 0.5, noise, 0.1, None, seed=0)
        with pytest.raises(ValueError):
            generate_dataset(sys, 10, 1.5, noise, 0.1, None, seed=0)
        with pytest.raises(ValueError):
            generate_dataset(sys, 10, 0.5, noise, 1.0, None, seed=0)

    def test_batch_residuals_match_single(self):
        sys = load_builtin("ieee14")
        jac = build_jacobian(sys)
        ds = generate_dataset(sys, 20, 0.5, NoiseModel(SIGMA), 0.1, None, seed=16)
        var = SIGMA ** 2
        batched = batch_residuals(ds.X, jac, var)
        for i in range(20):
            single = residual_norm(ds.X[i], jac, wls_estimate(jac, var, ds.X[i]))
            assert batched[i] == pytest.approx(single, rel=1e-9)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        sys = load_builtin("ieee14")
        ds = generate_dataset(sys, 25, 0.4, NoiseModel(SIGMA), 0.1, None, seed=17)
        p = tmp_path / "ds.csv"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert np.array_equal(back.X, ds.X)  # repr round-trips floats exactly
        assert np.array_equal(back.y, ds.y)
        assert back.meta == ds.meta

    def test_header_format(self, tmp_path):
        sys = load_builtin("ieee14")
        ds = generate_dataset(sys, 5, 0.5, NoiseModel(SIGMA), 0.1, None, seed=18)
        p = tmp_path / "ds.csv"
        save_dataset(ds, p)
        header = p.read_text().splitlines()[0]
        assert header == ",".join([f"f{j}" for j in range(1, 35)] + ["label"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="header"):
            load_dataset(p)

    def test_ragged_row_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f1,f2,label\n0.1,0.2,1\n0.3,0\n")
        with pytest.raises(ValueError, match="line 3"):
            load_dataset(p)

    def test_load_without_sidecar(self, tmp_path):
        p = tmp_path / "ds.csv"
        p.write_text("f1,f2,label\n0.1,0.2,1\n0.3,0.4,0\n")
        ds = load_dataset(p)
        assert ds.meta == {}
        assert ds.X.shape == (2, 2)
