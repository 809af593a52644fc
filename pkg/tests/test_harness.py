import json
import os

import numpy as np
import pytest

from mida import (
    ConfigError,
    ExperimentConfig,
    bh_select,
    fscore,
    precision_recall_at_k,
    run_coverage,
    run_fdr,
    run_pr_fscore,
    run_rate_check,
)


def tiny_config(tmp_path, **kw):
    base = dict(p=6, d=1.0, r=2, n_list=(300,), replications=6,
                graph_mode="true_cpdag", seed=3, output_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_json_round_trip(self):
        cfg = ExperimentConfig(p=10, n_list=(100, 200), seed=5)
        again = ExperimentConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_json(json.dumps({"p": 10, "bogus": 1}))

    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(p=3)
        with pytest.raises(ConfigError):
            ExperimentConfig(n_list=())
        with pytest.raises(ConfigError):
            ExperimentConfig(graph_mode="nope")

    def test_overrides(self):
        cfg = ExperimentConfig()
        out = cfg.with_overrides({"seed": 9, "graph_mode": "empty"})
        assert out.seed == 9 and out.graph_mode == "empty"
        with pytest.raises(ConfigError):
            cfg.with_overrides({"nonsense": 1})


class TestBhSelect:
    def test_worked_example(self):
        assert bh_select([0.01, 0.02, 0.9], 0.05) == [0, 1]

    def test_all_ones(self):
        assert bh_select([1.0, 1.0, 1.0], 0.05) == []

    def test_singleton(self):
        assert bh_select([0.04], 0.05) == [0]
        assert bh_select([0.06], 0.05) == []

    def test_step_up_rescues_smaller(self):
        # p_(2) qualifies at 2a/m which drags in p_(1) even though p_(1) > a/m
        assert bh_select([0.030, 0.032], 0.05) == [0, 1]

    def test_null_uniform_rarely_selects(self):
        rng = np.random.default_rng(1)
        counts = [len(bh_select(rng.uniform(size=100), 0.05)) for _ in range(400)]
        assert np.mean(counts) < 0.5
        assert np.mean(np.array(counts) > 0) < 0.12

    def test_rejects_bad_pvalues(self):
        with pytest.raises(ConfigError):
            bh_select([0.5, 1.5], 0.05)


class TestPrHelpers:
    def test_perfect_knowledge(self):
        truth = {0, 3, 4}
        ranked = [4, 0, 3, 1, 2]  # all true cells first
        curve = precision_recall_at_k(ranked, truth)
        k, prec, rec = curve[len(truth) - 1]
        assert (k, prec, rec) == (3, 1.0, 1.0)

    def test_fscore(self):
        assert fscore(0.0, 0.0) == 0.0
        assert fscore(1.0, 1.0) == 1.0
        assert fscore(0.5, 1.0) == pytest.approx(2 / 3)


class TestCoverage:
    def test_deterministic_and_schema(self, tmp_path):
        cfg_a = tiny_config(tmp_path / "a")
        cfg_b = tiny_config(tmp_path / "b")
        report = run_coverage(cfg_a)
        run_coverage(cfg_b)
        for name in ("coverage.csv", "coverage_true_eta.csv"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b
        header = (tmp_path / "a" / "coverage.csv").read_text().splitlines()[0]
        assert header == ("p,n,group,median_coverage,mean_coverage,"
                          "coverage_sd,avg_length,count,excluded")
        assert len(report.rows) == 3  # one n, three groups

    def test_group_sizes_balanced(self, tmp_path):
        report = run_coverage(tiny_config(tmp_path, p=7, r=3, replications=4))
        counts = [row.count for row in report.rows]
        assert sum(counts) == 3 * 5  # r * mediators
        assert max(counts) - min(counts) <= 1

    def test_thread_count_does_not_change_results(self, tmp_path):
        a = run_coverage(tiny_config(tmp_path / "one", threads=1))
        b = run_coverage(tiny_config(tmp_path / "four", threads=4))
        assert a == b

    def test_row_accounting(self, tmp_path):
        cfg = tiny_config(tmp_path, replications=5)
        report = run_coverage(cfg)
        for row in report.rows:
            assert row.count * cfg.replications >= row.count  # rows exist
            assert row.excluded == 0


class TestPrFscore:
    def test_outputs_and_dominance(self, tmp_path):
        cfg = tiny_config(tmp_path, p=8, d=1.5, r=2, n_list=(400,),
                          replications=20, seed=11, p_treat=0.6, p_resp=0.5)
        run_pr_fscore(cfg)
        pr_lines = (tmp_path / "pr.csv").read_text().splitlines()
        assert pr_lines[0] == "setting,k,method,precision,recall"
        cells = 2 * 6  # r * mediators
        assert len(pr_lines) == 1 + 2 * cells  # two methods, one n
        fs_lines = (tmp_path / "fscore.csv").read_text().splitlines()
        assert fs_lines[0] == ("p,n,threshold,target_size,est_size,recall,"
                               "precision,fscore,optimal_fscore")
        recalls = [float(line.split(",")[4]) for line in pr_lines[1:]
                   if line.split(",")[2] == "pvalue"]
        assert recalls[-1] == pytest.approx(1.0)  # full ranking reaches recall 1

    def test_pvalue_ranking_at_least_as_good_at_optimum(self, tmp_path):
        cfg = tiny_config(tmp_path, p=10, d=1.5, r=2, n_list=(300,),
                          replications=30, seed=13, p_treat=0.5, p_resp=0.4)
        run_pr_fscore(cfg)
        curves = {"estimate": [], "pvalue": []}
        for line in (tmp_path / "pr.csv").read_text().splitlines()[1:]:
            setting, k, method, prec, rec = line.split(",")
            curves[method].append((float(prec), float(rec)))
        best = {m: max(fscore(p, r) for p, r in pts) for m, pts in curves.items()}
        assert best["pvalue"] >= best["estimate"] - 0.02


class TestFdr:
    def test_all_null_spec(self, tmp_path):
        cfg = tiny_config(tmp_path, p=7, r=2, replications=25, seed=17,
                          p_treat=0.0, p_resp=0.0)
        run_fdr(cfg, bh_alpha=0.05, screen_level=0.01)
        lines = (tmp_path / "fdr.csv").read_text().splitlines()
        assert lines[0] == "p,n,alpha,pipeline,target,empirical_fdr,power"
        for line in lines[1:]:
            cells = line.split(",")
            assert float(cells[5]) <= 0.10  # near-zero selections
            assert float(cells[6]) == 0.0

    def test_screening_reduces_conservativeness(self, tmp_path):
        cfg = tiny_config(tmp_path, p=10, d=1.5, r=2, replications=40,
                          n_list=(500,), seed=19)
        run_fdr(cfg, bh_alpha=0.2, screen_level=0.01)
        rows = {}
        for line in (tmp_path / "fdr.csv").read_text().splitlines()[1:]:
            p, n, alpha, pipeline, target, fdr, power = line.split(",")
            rows[(pipeline, target)] = float(fdr)
        assert rows[("screened_bh", "eta_cpdag")] >= rows[("bh", "eta_cpdag")] - 0.02


class TestRateCheck:
    def test_schema_and_slopes(self, tmp_path):
        cfg = tiny_config(tmp_path, p=12, d=2.0, n_list=(250, 500, 1000, 2000),
                          replications=30, seed=23)
        result = run_rate_check(cfg, subsets_per_n=10, max_subset_size=4)
        lines = (tmp_path / "rates.csv").read_text().splitlines()
        assert lines[0] == "n,q_n,L_n,stat,median_value"
        assert len(lines) == 1 + 4 * 5  # four n values, five statistics
        assert -0.8 < result.slopes["sup_psi_mean"] < -0.2
        assert -1.6 < result.slopes["sup_remainder"] < -0.5

    def test_growing_collection_never_shrinks_sup(self, tmp_path):
        # direct check of sup monotonicity through the rate-check plumbing
        from mida import covariance_of, generate_random_lsem, sample, uniform_diagnostics

        rng = np.random.default_rng(29)
        spec = generate_random_lsem(10, 2.0, rng=rng)
        sigma = covariance_of(spec)
        data = sample(spec, 400, rng)
        small = [(1, 2), (3, 4)]
        large = small + [(5,), (2, 6, 7)]
        a = uniform_diagnostics(data, 10, small, sigma, spec.means)
        b = uniform_diagnostics(data, 10, large, sigma, spec.means)
        assert b.sup_beta_err >= a.sup_beta_err - 1e-15
