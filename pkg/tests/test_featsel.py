"""Metaheuristic feature selection: primitives, exhaustive-search optimality,
trace and caching behavior."""

import numpy as np
import pytest

from fdilab import (
    BcsParams,
    BpsoParams,
    FsResult,
    GaParams,
    export_fs_result,
    fitness,
    make_fitness_context,
    run_search,
)
from fdilab.classify import KnnConfig
from fdilab.featsel import _improves, binarize, levy_step, repair_mask

from oracles import exhaustive_best_mask


def synthetic_dataset(n=160, n_noise=4, seed=0):
    """Binary labels, two strongly informative columns (0 and 3), noise elsewhere.

    Column order: [informative, noise, noise, informative, noise, noise] for
    n_noise = 4, so mask searches have something real to find.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    cols = [None] * (n_noise + 2)
    cols[0] = y + rng.normal(0.0, 0.35, n)
    cols[3] = (1 - y) + rng.normal(0.0, 0.35, n)
    noise_slots = [i for i in range(n_noise + 2) if i not in (0, 3)]
    for slot in noise_slots:
        cols[slot] = rng.normal(0.0, 1.0, n)
    return np.column_stack(cols), y


@pytest.fixture()
def ctx():
    X, y = synthetic_dataset()
    return make_fitness_context(X, y, classifier="knn", config=KnnConfig(k=5),
                                val_fraction=0.2, seed=1)


class TestLevy:
    def test_lambda_validation(self):
        rng = np.random.default_rng(0)
        for bad in (1.0, 0.5, 3.5):
            with pytest.raises(ValueError):
                levy_step(bad, rng)

    def test_scalar_and_vector_shapes(self):
        rng = np.random.default_rng(1)
        assert np.isscalar(levy_step(1.5, rng)) or np.asarray(levy_step(1.5, rng)).shape == ()
        assert levy_step(1.5, rng, size=7).shape == (7,)

    def test_roughly_symmetric(self):
        rng = np.random.default_rng(2)
        s = levy_step(1.5, rng, size=200_000)
        assert abs(float((s > 0).mean()) - 0.5) < 0.01

    def test_tail_density_slope(self):
        # |step| density falls like s^-lam: log-log histogram slope ~ -1.5
        rng = np.random.default_rng(3)
        s = np.abs(levy_step(1.5, rng, size=2_000_000))
        edges = np.logspace(1, 4, 25)
        hist, _ = np.histogram(s, bins=edges)
        widths = np.diff(edges)
        centers = np.sqrt(edges[:-1] * edges[1:])
        keep = hist > 50  # only well-populated bins
        density = hist[keep] / widths[keep]
        slope = np.polyfit(np.log(centers[keep]), np.log(density), 1)[0]
        assert slope == pytest.approx(-1.5, abs=0.3)

    def test_heavier_tail_for_smaller_lambda(self):
        rng = np.random.default_rng(4)
        frac_heavy = lambda lam: float((np.abs(levy_step(lam, rng, size=400_000)) > 100).mean())
        assert frac_heavy(1.3) > frac_heavy(2.0)


class TestBinarize:
    def test_probability_matches_sigmoid(self):
        rng = np.random.default_rng(5)
        pos = np.full(200_000, 0.8)
        rate = float(binarize(pos, rng).mean())
        assert rate == pytest.approx(1.0 / (1.0 + np.exp(-0.8)), abs=0.01)

    def test_scalar_returns_bool(self):
        rng = np.random.default_rng(6)
        out = binarize(0.0, rng)
        assert isinstance(out, bool)

    def test_extreme_positions_do_not_overflow(self):
        # exp underflow to 0.0 is fine; overflow or nan would not be
        rng = np.random.default_rng(7)
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            hi = binarize(np.full(1000, 1e9), rng)
            lo = binarize(np.full(1000, -1e9), rng)
        assert hi.all()
        assert not lo.any()


class TestRepair:
    def test_all_zero_gets_exactly_one_bit(self):
        rng = np.random.default_rng(8)
        fixed = repair_mask(np.zeros(10, dtype=bool), rng)
        assert fixed.sum() == 1

    def test_nonzero_untouched(self):
        rng = np.random.default_rng(9)
        mask = np.array([False, True, False])
        assert np.array_equal(repair_mask(mask, rng), mask)


class TestParams:
    def test_bcs_validation(self):
        with pytest.raises(ValueError):
            BcsParams(alpha=0.0)
        with pytest.raises(ValueError):
            BcsParams(pa=1.5)
        with pytest.raises(ValueError):
            BcsParams(lam=1.0)
        with pytest.raises(ValueError):
            BcsParams(population=1)

    def test_bpso_validation(self):
        with pytest.raises(ValueError):
            BpsoParams(v_max=0.0)
        with pytest.raises(ValueError):
            BpsoParams(c1=-1.0)

    def test_ga_validation(self):
        with pytest.raises(ValueError):
            GaParams(mutation_rate=1.5)
        with pytest.raises(ValueError):
            GaParams(tournament=0)
        with pytest.raises(ValueError):
            GaParams(elite=50, population=50)


class TestFitness:
    def test_cache_counts_evals_vs_trainings(self, ctx):
        mask = np.array([True, False, False, True, False, False])
        v1 = fitness(mask, ctx)
        v2 = fitness(mask, ctx)
        assert v1 == v2
        assert ctx.evals == 2
        assert ctx.trainings == 1

    def test_mask_validation(self, ctx):
        with pytest.raises(ValueError, match="length"):
            fitness(np.ones(5, dtype=bool), ctx)
        with pytest.raises(ValueError, match="empty"):
            fitness(np.zeros(6, dtype=bool), ctx)

    def test_informative_beats_noise(self, ctx):
        informative = np.array([True, False, False, True, False, False])
        noise_only = np.array([False, True, True, False, True, True])
        assert fitness(informative, ctx) > fitness(noise_only, ctx)

    def test_improves_tie_rule(self):
        two = np.array([True, True, False])
        one = np.array([True, False, False])
        assert _improves(0.9, two, 0.8, one)         # better fitness wins
        assert _improves(0.9, one, 0.9, two)         # tie: fewer features wins
        assert not _improves(0.9, two, 0.9, one)
        assert _improves(0.5, two, 0.5, None)        # first offer always lands


class TestSearchers:
    @pytest.mark.parametrize("method,params", [
        ("bcs", BcsParams()),
        ("bpso", BpsoParams()),
        ("ga", GaParams(population=20, iterations=15)),
    ])
    def test_finds_exhaustive_optimum(self, ctx, method, params):
        best_fit, _ = exhaustive_best_mask(lambda m: fitness(m, ctx), ctx.n_features)
        hits = 0
        runs = 8
        for seed in range(runs):
            res = run_search(method, ctx, params, seed)
            hits += res.best_fitness == best_fit
        assert hits >= runs - 1, f"{method}: {hits}/{runs} runs reached {best_fit}"

    def test_traces_monotone_and_sized(self, ctx):
        for method, params in (("bcs", BcsParams()), ("bpso", BpsoParams()),
                               ("ga", GaParams())):
            res = run_search(method, ctx, params, 3)
            assert len(res.trace) == params.iterations + 1
            assert all(b >= a for a, b in zip(res.trace, res.trace[1:]))
            assert res.trace[-1] == res.best_fitness

    def test_evaluation_counts_pin_population_loops(self, ctx):
        # initial population + per-iteration proposals (+ BCS abandonments)
        res = run_search("bcs", ctx, BcsParams(), 0)
        assert res.evaluations == 30 + 10 * (30 + 7)
        res = run_search("bpso", ctx, BpsoParams(), 0)
        assert res.evaluations == 30 + 10 * 30
        res = run_search("ga", ctx, GaParams(), 0)
        assert res.evaluations == 50 + 30 * 50

    def test_deterministic_given_seed(self, ctx):
        for method in ("bcs", "bpso", "ga"):
            a = run_search(method, ctx, None, 11)
            b = run_search(method, ctx, None, 11)
            assert np.array_equal(a.best_mask, b.best_mask)
            assert a.trace == b.trace

    def test_generator_rng_accepted(self, ctx):
        res = run_search("ga", ctx, GaParams(population=6, iterations=2),
                         np.random.default_rng(0))
        assert res.n_selected >= 1

    def test_cache_soundness(self):
        X, y = synthetic_dataset(seed=42)
        ctx = make_fitness_context(X, y, config=KnnConfig(k=5), seed=2)
        run_search("ga", ctx, GaParams(population=10, iterations=5), 0)
        assert ctx.trainings == len(ctx.cache)
        assert ctx.evals >= ctx.trainings

    def test_unknown_method(self, ctx):
        with pytest.raises(ValueError, match="unknown FS"):
            run_search("tabu", ctx, None, 0)

    def test_zero_iterations_returns_initial_best(self, ctx):
        res = run_search("bpso", ctx, BpsoParams(iterations=0), 4)
        assert len(res.trace) == 1
        assert res.evaluations == 30


class TestFsResult:
    def test_decreasing_trace_rejected(self):
        with pytest.raises(ValueError, match="non-decreasing"):
            FsResult(best_mask=np.ones(3, dtype=bool), best_fitness=0.5,
                     trace=(0.6, 0.5), evaluations=2)

    def test_n_selected(self):
        res = FsResult(best_mask=np.array([True, False, True]), best_fitness=0.9,
                       trace=(0.9,), evaluations=1)
        assert res.n_selected == 2


class TestExport:
    def test_files_and_contents(self, tmp_path, ctx):
        res = run_search("ga", ctx, GaParams(population=8, iterations=3), 0)
        labels = [f"m{i}" for i in range(6)]
        txt, trace = export_fs_result(res, labels, tmp_path / "ga")
        body = txt.read_text()
        assert f"n_selected = {res.n_selected}" in body
        assert f"evaluations = {res.evaluations}" in body
        for idx in np.flatnonzero(res.best_mask):
            assert f"{idx} m{idx}" in body
        lines = trace.read_text().splitlines()
        assert lines[0] == "iteration,best_fitness"
        assert len(lines) == 1 + len(res.trace)

    def test_label_count_mismatch(self, tmp_path, ctx):
        res = run_search("ga", ctx, GaParams(population=8, iterations=2), 0)
        with pytest.raises(ValueError, match="label count"):
            export_fs_result(res, ["only", "two"], tmp_path / "x")
