"""Design-loop engine: filtering, utility estimators, argmax, and the full run."""

import dataclasses
import math

import numpy as np
import pytest

from accboed.engine import (
    AccBoedConfig,
    DesignChoice,
    RunRecord,
    acc_boed_run,
    build_cde_dataset,
    estimate_utility_acc,
    estimate_utility_basic,
    informative_region,
    load_records_csv,
    optimize_design,
    ratio_prediction,
    save_records_csv,
    save_summary_json,
    sweep_utilities,
    utility_term_basic,
)
from accboed.gaussians import gaussian_kl, ScalarGaussian
from accboed.gp import Dataset, KernelSpec, build_gp, fit_gp, predict_mean_var
from accboed.kmn import InsufficientData, KmnConfig, train_kmn
from accboed.poi import McmcConfig, PoiKind
from accboed.sampling import grid_candidates, lhs_sample, uniform_sample

SE = "squared_exponential"


def prior_like_gp(dim=2, signal_variance=1.0, lengthscale=1.0, y_far=0.0):
    """A GP whose posterior is numerically the prior near the origin.

    One training point is placed far outside the region of interest, so its
    influence underflows to zero there.
    """
    far = np.full((1, dim), 500.0)
    data = Dataset(far, np.array([y_far]))
    kernel = KernelSpec(SE, signal_variance, lengthscale)
    return build_gp(data, kernel, noise_variance=1e-10, mean_offset=0.0)


def small_config(**overrides):
    defaults = dict(n_initial=5, eps_cov=1e-6, n_z=15, n_d=8, big_n_z=60,
                    n_y=5, max_iterations=2, eps_z=1e-6, seed=0)
    defaults.update(overrides)
    return AccBoedConfig(**defaults)


# ---------------------------------------------------------------------------
# Informative-pair filtering
# ---------------------------------------------------------------------------

class TestInformativeRegion:
    def test_region_is_a_ball_for_a_prior_like_surrogate(self):
        # With the posterior equal to an SE prior (variance 1, lengthscale 1),
        # cov(d, z) = exp(-||d - z||^2 / 2), so eps = exp(-1/2) keeps designs
        # within unit distance of z.
        gp = prior_like_gp()
        grid = grid_candidates([[-2, 2], [-2, 2]], points_per_dim=41)
        z = np.zeros(2)
        region = informative_region(gp, z, grid, eps_cov=math.exp(-0.5))
        r2 = np.sum(grid**2, axis=1)
        inside = set(np.flatnonzero(r2 < 1.0 - 1e-9))
        outside = set(np.flatnonzero(r2 > 1.0 + 1e-9))
        got = set(region.tolist())
        assert inside <= got
        assert not (outside & got)

    def test_zero_threshold_keeps_every_candidate(self):
        gp = prior_like_gp()
        grid = grid_candidates([[-2, 2], [-2, 2]], points_per_dim=11)
        region = informative_region(gp, np.zeros(2), grid, eps_cov=0.0)
        assert region.tolist() == list(range(grid.shape[0]))

    def test_threshold_above_signal_variance_keeps_nothing(self):
        gp = prior_like_gp(signal_variance=1.0)
        grid = grid_candidates([[-2, 2], [-2, 2]], points_per_dim=11)
        region = informative_region(gp, np.zeros(2), grid, eps_cov=1.5)
        assert region.size == 0

    def test_empty_candidates_raise(self):
        gp = prior_like_gp()
        with pytest.raises(ValueError):
            informative_region(gp, np.zeros(2), np.empty((0, 2)), eps_cov=0.1)

    def test_selection_is_strict_while_region_is_inclusive(self):
        # At distance exactly 1 the covariance equals exp(-1/2) bit for bit,
        # so a threshold of exp(-1/2) includes the pair under >= and
        # excludes it under >.
        from accboed.engine import select_informative_samples

        gp = prior_like_gp()
        z = np.array([1.0, 0.0])
        pool = np.array([[0.0, 0.0]])
        eps = math.exp(-0.5)
        assert informative_region(gp, z, pool, eps).tolist() == [0]
        assert select_informative_samples(gp, pool[0], np.atleast_2d(z), eps).size == 0


# ---------------------------------------------------------------------------
# Training-set construction
# ---------------------------------------------------------------------------

class TestBuildCdeDataset:
    def test_exact_count_when_nothing_is_filtered(self):
        gp = prior_like_gp()
        pool = uniform_sample(30, [[-1, 1], [-1, 1]], np.random.default_rng(3))
        grid = grid_candidates([[-1, 1], [-1, 1]], points_per_dim=11)
        cfg = small_config(eps_cov=0.0, n_z=5, n_d=10)
        records = build_cde_dataset(gp, pool, grid, cfg, np.random.default_rng(0),
                                    min_records=50)
        assert len(records) == 5 * 10
        for rec in records:
            assert rec.design.shape == (2,)
            assert rec.poi_point.shape == (2,)
            assert math.isfinite(rec.y_sample)

    def test_draws_match_the_analytic_moments(self):
        # The virtual observation at z is the predictive mean, so with one
        # (z, d) pair every recorded value is a draw from the ratio Gaussian
        # evaluated at y_z = m_z, standardized by the unconstrained
        # predictive at the design — its moments are available directly.
        data = Dataset(np.array([[0.0, 0.0]]), np.array([0.7]))
        gp = build_gp(data, KernelSpec(SE, 1.0, 1.0), noise_variance=1e-10)
        z = np.array([0.3, 0.0])
        d = np.array([0.6, 0.0])

        (mz,), _ = predict_mean_var(gp, z.reshape(1, -1))
        ratio = ratio_prediction(gp, d, z, float(mz))
        (md,), (vd,) = predict_mean_var(gp, d.reshape(1, -1))
        target_mean = (ratio.mean - float(md)) / math.sqrt(float(vd))
        target_var = ratio.variance / float(vd)

        cfg = small_config(eps_cov=0.0, n_z=1, n_d=1)
        rng = np.random.default_rng(11)
        ys = []
        for _ in range(1000):
            (rec,) = build_cde_dataset(gp, z.reshape(1, -1), d.reshape(1, -1),
                                       cfg, rng, min_records=1)
            assert np.allclose(rec.design, d)
            assert np.allclose(rec.poi_point, z)
            ys.append(rec.y_sample)
        ys = np.array(ys)
        assert abs(ys.mean() - target_mean) < 5 * math.sqrt(target_var / 1000)
        assert 0.85 < ys.var(ddof=1) / target_var < 1.2

    def test_insufficient_data_raises_and_relaxation_recovers(self):
        gp = prior_like_gp()
        pool = np.tile([[-1.0, -1.0]], (40, 1))
        grid = grid_candidates([[-1, 1], [-1, 1]], points_per_dim=3)
        cfg = small_config(eps_cov=0.5, n_z=40, n_d=25)
        rng = np.random.default_rng(0)
        # Only 3 of the 9 grid cells lie within the covariance ball of the
        # corner, giving 120 triples < 250.
        with pytest.raises(InsufficientData):
            build_cde_dataset(gp, pool, grid, cfg, rng, min_records=250)
        relaxed = dataclasses.replace(cfg, eps_cov=0.05)
        records = build_cde_dataset(gp, pool, grid, relaxed,
                                    np.random.default_rng(0), min_records=250)
        assert len(records) == 40 * 8  # the far corner stays degenerate-free but filtered

    def test_degenerate_pairs_are_skipped(self):
        # Candidates far from every z produce ratios too close to flat and
        # are dropped rather than recorded.
        gp = prior_like_gp()
        pool = np.zeros((4, 2))
        far_grid = np.array([[40.0, 0.0], [0.0, 40.0]])
        cfg = small_config(eps_cov=0.0, n_z=4, n_d=2)
        with pytest.raises(InsufficientData):
            build_cde_dataset(gp, pool, far_grid, cfg, np.random.default_rng(0),
                              min_records=1)


# ---------------------------------------------------------------------------
# Accelerated estimator
# ---------------------------------------------------------------------------

class StubDensity:
    """Duck-typed stand-in for a trained density network.

    The predictive normalizer defaults to 1 everywhere, i.e. the stub
    pretends it is already a properly normalized ratio.  The expected
    information is evaluated by dense numerical integration of the same
    functional the mixture network computes in closed quadrature form:
    E_{g}[log(q / C)] with g ∝ N(mean, variance) * q and C the reported
    normalizer.
    """

    def __init__(self, fn, norm_fn=None):
        self.fn = fn
        self.norm_fn = norm_fn or (lambda mean, var, ds, zs: np.ones(len(ds)))

    def log_density_batch(self, ys, designs, pois):
        return self.fn(np.asarray(ys, float), np.asarray(designs, float),
                       np.asarray(pois, float))

    def predictive_normalizer(self, mean, variance, designs, pois):
        return self.norm_fn(mean, variance, np.asarray(designs, float),
                            np.asarray(pois, float))

    def expected_information(self, mean, variance, designs, pois):
        designs = np.atleast_2d(np.asarray(designs, float))
        pois = np.atleast_2d(np.asarray(pois, float))
        if variance < 0.0:
            raise ValueError("variance must be >= 0")
        if variance == 0.0:
            return np.zeros(len(designs))
        sd = math.sqrt(variance)
        ys = np.linspace(mean - 10.0 * sd, mean + 10.0 * sd, 4001)
        p2 = np.exp(-0.5 * ((ys - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
        norms = self.predictive_normalizer(mean, variance, designs, pois)
        out = np.empty(len(designs))
        for b in range(len(designs)):
            d_rep = np.broadcast_to(designs[b], (ys.size, designs.shape[1]))
            z_rep = np.broadcast_to(pois[b], (ys.size, pois.shape[1]))
            log_q = np.asarray(self.fn(ys, d_rep, z_rep), float)
            log_r = log_q - math.log(norms[b])
            out[b] = np.trapezoid(p2 * np.exp(log_q) * log_r, ys) / norms[b]
        return out


class TestEstimateUtilityAcc:
    def test_uniform_density_gives_exactly_zero(self):
        gp = prior_like_gp()
        stub = StubDensity(lambda ys, ds, zs: np.zeros(len(ys)))
        pool = uniform_sample(50, [[-1, 1], [-1, 1]], np.random.default_rng(1))
        est = estimate_utility_acc(np.zeros(2), gp, stub, pool,
                                   small_config(eps_cov=1e-8),
                                   np.random.default_rng(5))
        assert est.value == 0.0
        assert est.std_error == 0.0
        assert est.n_pairs == 50

    def test_matches_gaussian_kl_when_the_network_is_the_exact_ratio(self):
        # If q(y | d, z) is the exact standardized density ratio
        # N(0, 1/2) / N(0, 1), the per-pair expected information is the
        # closed-form KL between the two Gaussians, identically for every
        # pool point — so the estimate hits it with zero spread.
        gp = prior_like_gp()  # predictive at the design is N(0, 1)

        def exact_log_ratio(ys, ds, zs):
            num = -0.5 * ys**2 / 0.5 - 0.5 * math.log(2 * math.pi * 0.5)
            den = -0.5 * ys**2 - 0.5 * math.log(2 * math.pi)
            return num - den

        stub = StubDensity(exact_log_ratio)
        pool = uniform_sample(50, [[-1, 1], [-1, 1]], np.random.default_rng(2))
        est = estimate_utility_acc(np.zeros(2), gp, stub, pool,
                                   small_config(eps_cov=1e-8),
                                   np.random.default_rng(7))
        truth = gaussian_kl(ScalarGaussian(0.0, 0.5), ScalarGaussian(0.0, 1.0))
        assert truth == pytest.approx(0.09657, abs=1e-4)
        assert est.value == pytest.approx(truth, abs=1e-6)
        assert est.std_error == pytest.approx(0.0, abs=1e-12)

    def test_zero_threshold_reproduces_the_unfiltered_computation(self):
        gp = prior_like_gp()
        pool = uniform_sample(40, [[-1, 1], [-1, 1]], np.random.default_rng(3))
        design = np.array([0.2, -0.1])
        stub = StubDensity(lambda ys, ds, zs: -0.5 * (ys - 0.3) ** 2 + 0.1 * zs[:, 0])

        est = estimate_utility_acc(design, gp, stub, pool,
                                   small_config(eps_cov=0.0),
                                   np.random.default_rng(9))

        # Manual unfiltered replication: every pool point contributes its
        # per-pair expected information against the standardized predictive.
        terms = stub.expected_information(0.0, 1.0,
                                          np.broadcast_to(design, (40, 2)), pool)
        assert est.value == terms.mean()
        assert est.std_error == terms.std(ddof=1) / math.sqrt(40)

    def test_normalizer_division_shifts_and_scales_the_score(self):
        # A density that is uniformly e^0.4 with a reported predictive
        # expectation of 2 must score (e^0.4 / 2) * (0.4 - ln 2) at every
        # pool point: the estimator trusts the normalizer, not the raw
        # density, both in the log-ratio and in the change of measure.
        gp = prior_like_gp()
        stub = StubDensity(lambda ys, ds, zs: np.full(len(ys), 0.4),
                           norm_fn=lambda mean, var, ds, zs: np.full(len(ds), 2.0))
        pool = uniform_sample(25, [[-1, 1], [-1, 1]], np.random.default_rng(6))
        est = estimate_utility_acc(np.zeros(2), gp, stub, pool,
                                   small_config(eps_cov=1e-8),
                                   np.random.default_rng(8))
        expected = (math.exp(0.4) / 2.0) * (0.4 - math.log(2.0))
        assert est.value == pytest.approx(expected, rel=1e-9)
        assert est.std_error == pytest.approx(0.0, abs=1e-12)

    def test_filtered_points_contribute_zero_but_keep_pool_size(self):
        gp = prior_like_gp()
        near = uniform_sample(10, [[-0.3, 0.3], [-0.3, 0.3]], np.random.default_rng(0))
        far = np.full((30, 2), 30.0) + uniform_sample(
            30, [[-0.3, 0.3], [-0.3, 0.3]], np.random.default_rng(1))
        pool = np.vstack([near, far])
        stub = StubDensity(lambda ys, ds, zs: np.full(len(ys), 0.4))

        est = estimate_utility_acc(np.zeros(2), gp, stub, pool,
                                   small_config(eps_cov=0.5),
                                   np.random.default_rng(4))
        term = math.exp(0.4) * 0.4
        assert est.n_pairs == 40
        assert est.value == pytest.approx(term * 10 / 40, abs=1e-12)


# ---------------------------------------------------------------------------
# Reference estimator
# ---------------------------------------------------------------------------

class TestEstimateUtilityBasic:
    def test_single_pair_closed_form(self):
        # Design at distance sqrt(ln 2) from z halves the predictive variance,
        # and a virtual observation equal to the predictive mean leaves the
        # mean unchanged: KL(N(0, 1/2) || N(0, 1)) = (1/2)(ln 2 - 1/2).
        gp = prior_like_gp()
        d = np.array([math.sqrt(math.log(2.0)), 0.0])
        value = utility_term_basic(gp, d, np.zeros(2), y_z=0.0)
        assert value == pytest.approx(0.09657, abs=1e-4)
        assert value == pytest.approx(0.5 * (math.log(2.0) - 0.5), rel=1e-9)

    def test_decorrelated_pair_scores_zero(self):
        gp = prior_like_gp()
        est = estimate_utility_basic(np.array([40.0, 0.0]), gp,
                                     np.zeros((3, 2)), n_y=4,
                                     rng=np.random.default_rng(0))
        assert abs(est.value) <= 1e-10

    def test_value_is_nonnegative(self):
        rng = np.random.default_rng(8)
        data = Dataset(uniform_sample(12, [[-2, 2], [-2, 2]], rng),
                       rng.standard_normal(12))
        gp = build_gp(data, KernelSpec(SE, 1.0, 1.0), noise_variance=1e-4)
        pool = uniform_sample(20, [[-2, 2], [-2, 2]], rng)
        est = estimate_utility_basic(np.array([0.3, 0.7]), gp, pool, n_y=3,
                                     rng=np.random.default_rng(1))
        assert est.value >= 0.0
        assert est.n_pairs == 60

    def test_reports_pair_count_and_spread(self):
        gp = prior_like_gp()
        pool = uniform_sample(6, [[-1, 1], [-1, 1]], np.random.default_rng(2))
        est = estimate_utility_basic(np.zeros(2), gp, pool, n_y=5,
                                     rng=np.random.default_rng(3))
        assert est.n_pairs == 30
        assert est.std_error > 0.0


# ---------------------------------------------------------------------------
# Agreement between the two routes
# ---------------------------------------------------------------------------

class TestEstimatorAgreement:
    def test_acc_tracks_basic_across_a_candidate_grid(self):
        rng = np.random.default_rng(0)
        domain = [[-2, 2], [-2, 2]]
        inputs = lhs_sample(20, domain, seed=42)
        outputs = np.sin(inputs[:, 0]) * np.cos(inputs[:, 1])
        gp = fit_gp(Dataset(inputs, outputs), KernelSpec(SE, 1.0, 2.0), 1e-6)

        pool = uniform_sample(60, domain, rng)
        grid = grid_candidates(domain, points_per_dim=5)
        cfg = small_config(eps_cov=1e-4, n_z=40, n_d=15, big_n_z=60, n_y=10, seed=7)

        records = build_cde_dataset(gp, pool, grid, cfg, np.random.default_rng(5),
                                    min_records=150)
        kmn = train_kmn(records, KmnConfig(n_centers=15, epochs=250, seed=3))

        acc = sweep_utilities(grid, gp, pool, cfg, iteration=1, kmn=kmn,
                              estimator="acc")
        basic = sweep_utilities(grid, gp, pool, cfg, iteration=1,
                                estimator="basic")

        a = np.array([e.value for e in acc])
        b = np.array([e.value for e in basic])
        assert np.corrcoef(a, b)[0, 1] >= 0.8

        band = np.maximum(
            3 * (np.array([e.std_error for e in acc])
                 + np.array([e.std_error for e in basic])),
            0.1 * b.max(),
        )
        agree = np.abs(a - b) <= band
        assert agree.mean() >= 0.8


# ---------------------------------------------------------------------------
# Argmax
# ---------------------------------------------------------------------------

class TestOptimizeDesign:
    def make(self, values):
        from accboed.engine import UtilityEstimate
        return [UtilityEstimate(v, 0.01, 10) for v in values]

    def test_picks_the_maximum(self):
        choice = optimize_design(self.make([0.1, 0.7, 0.3]))
        assert choice == DesignChoice(index=1, value=0.7, uninformative=False)

    def test_ties_break_to_the_lowest_index(self):
        choice = optimize_design(self.make([0.1, 0.5, 0.5]))
        assert choice.index == 1

    def test_all_equal_flags_uninformative(self):
        choice = optimize_design(self.make([0.2, 0.2, 0.2]))
        assert choice.index == 0
        assert choice.uninformative

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            optimize_design([])


# ---------------------------------------------------------------------------
# Thread configuration
# ---------------------------------------------------------------------------

class TestThreading:
    def test_thread_count_does_not_change_results(self, monkeypatch):
        gp = prior_like_gp()
        pool = uniform_sample(50, [[-1, 1], [-1, 1]], np.random.default_rng(1))
        grid = grid_candidates([[-1, 1], [-1, 1]], points_per_dim=4)
        stub = StubDensity(lambda ys, ds, zs: -0.5 * ys**2 + 0.2 * ds[:, 0])
        cfg = small_config(eps_cov=1e-8, seed=11)

        monkeypatch.setenv("ACCBOED_THREADS", "1")
        serial = sweep_utilities(grid, gp, pool, cfg, iteration=2, kmn=stub)
        monkeypatch.setenv("ACCBOED_THREADS", "2")
        threaded = sweep_utilities(grid, gp, pool, cfg, iteration=2, kmn=stub)
        assert serial == threaded

    def test_invalid_thread_count_raises(self, monkeypatch):
        monkeypatch.setenv("ACCBOED_THREADS", "0")
        gp = prior_like_gp()
        pool = np.zeros((2, 2))
        stub = StubDensity(lambda ys, ds, zs: np.zeros(len(ys)))
        with pytest.raises(ValueError):
            sweep_utilities(np.zeros((1, 2)), gp, pool, small_config(), 1, kmn=stub)


# ---------------------------------------------------------------------------
# The full loop
# ---------------------------------------------------------------------------

class ToyProblem:
    """Smooth two-dimensional test function with a deterministic metric."""

    name = "toy"
    domain = ((-2.0, 2.0), (-2.0, 2.0))
    poi_kind = PoiKind("variance_weighted")
    metric_name = "probe_mean"
    kernel_init = KernelSpec(SE, 1.0, 1.0)
    noise_init = 1e-4
    refit_each_iteration = False

    def simulate(self, x, rng):
        return float(np.sin(x[0]) * np.cos(x[1]))

    def compute_metric(self, gp, poi_samples):
        mean, _ = predict_mean_var(gp, np.array([[0.5, 0.5]]))
        return float(mean[0])

    def should_stop(self, metric_history, eps_z):
        return False


class FailingMetricProblem(ToyProblem):
    def compute_metric(self, gp, poi_samples):
        if gp.data.n > self.sizes_before_failure:
            raise ValueError("synthetic metric failure")
        return 0.0

    def __init__(self, sizes_before_failure):
        self.sizes_before_failure = sizes_before_failure


def toy_run_config(**overrides):
    defaults = dict(
        candidate_grid=grid_candidates(ToyProblem.domain, points_per_dim=6),
        n_initial=5, eps_cov=1e-4, n_z=15, n_d=8, big_n_z=60, n_y=3,
        max_iterations=2, eps_z=1e-9, seed=0,
    )
    defaults.update(overrides)
    return AccBoedConfig(**defaults)


def toy_mcmc():
    return McmcConfig(n_samples=60, burn_in=80, n_chains=4, seed=0)


def toy_kmn():
    return KmnConfig(n_centers=8, hidden_sizes=(16,), epochs=40, seed=0)


class TestAccBoedRun:
    def run_once(self, **overrides):
        return acc_boed_run(ToyProblem(), toy_run_config(**overrides),
                            mcmc=toy_mcmc(), kmn_config=toy_kmn())

    def test_records_cover_every_iteration(self):
        result = self.run_once()
        assert result.error is None
        assert [r.iteration for r in result.records] == [0, 1, 2]
        assert [r.dataset_size for r in result.records] == [5, 6, 7]
        assert all(np.isnan(result.records[0].chosen_design))
        assert math.isnan(result.records[0].utility_at_choice)
        for rec in result.records[1:]:
            assert np.all(np.isfinite(rec.chosen_design))
            assert math.isfinite(rec.utility_at_choice)
            assert rec.metric_name == "probe_mean"
            assert rec.wall_time_utility > 0.0
            assert rec.wall_time_total >= rec.wall_time_utility
        assert result.gp is not None
        assert result.gp.data.n == 7
        assert result.poi_samples is not None
        assert result.poi_samples.points.shape == (60, 2)

    def test_chosen_designs_come_from_the_candidate_grid(self):
        result = self.run_once()
        grid = grid_candidates(ToyProblem.domain, points_per_dim=6)
        for rec in result.records[1:]:
            match = np.all(np.isclose(grid, rec.chosen_design), axis=1)
            assert match.any()

    def test_runs_are_deterministic_apart_from_wall_times(self):
        first = self.run_once()
        second = self.run_once()
        assert first.error is None and second.error is None
        for a, b in zip(first.records, second.records):
            assert np.array_equal(a.chosen_design, b.chosen_design, equal_nan=True)
            assert (a.utility_at_choice == b.utility_at_choice
                    or (math.isnan(a.utility_at_choice)
                        and math.isnan(b.utility_at_choice)))
            assert a.metric_value == b.metric_value
            assert a.dataset_size == b.dataset_size

    def test_zero_iterations_yields_the_initial_record_only(self):
        result = self.run_once(max_iterations=0)
        assert result.error is None
        assert len(result.records) == 1
        assert result.records[0].iteration == 0
        assert result.records[0].dataset_size == 5

    def test_mid_run_failure_keeps_partial_records_and_names_the_stage(self):
        problem = FailingMetricProblem(sizes_before_failure=5)
        result = acc_boed_run(problem, toy_run_config(),
                              mcmc=toy_mcmc(), kmn_config=toy_kmn())
        assert result.error is not None
        assert result.error.startswith("iteration 1: metric")
        assert [r.iteration for r in result.records] == [0]
        assert result.gp is not None


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

class TestPersistence:
    def make_records(self):
        return [
            RunRecord(0, np.array([float("nan"), float("nan")]), float("nan"),
                      5, "rmse", 0.8, 0.0, 1.25),
            RunRecord(1, np.array([0.4, -1.2]), 0.031, 6, "rmse",
                      0.6180339887498949, 0.5, 2.0),
        ]

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "records.csv"
        records = self.make_records()
        save_records_csv(records, path)

        header = path.read_text().splitlines()[0]
        assert header == ("iteration,design_0,design_1,utility,dataset_size,"
                          "metric_name,metric_value,t_utility_s,t_total_s")

        loaded = load_records_csv(path)
        assert len(loaded) == 2
        assert np.array_equal(loaded[1].chosen_design, records[1].chosen_design)
        assert loaded[1].metric_value == records[1].metric_value
        assert loaded[0].dataset_size == 5
        assert math.isnan(loaded[0].utility_at_choice)

    def test_summary_json(self, tmp_path):
        import json

        from accboed.engine import RunResult

        path = tmp_path / "summary.json"
        result = RunResult(records=self.make_records(), gp=None, poi_samples=None,
                           error=None, uninformative_iterations=(2,))
        save_summary_json(result, "toy", toy_run_config(), path,
                          extra={"seed_used": 0})
        summary = json.loads(path.read_text())
        assert summary["problem"] == "toy"
        assert summary["final_metric_value"] == 0.6180339887498949
        assert summary["final_dataset_size"] == 6
        assert summary["uninformative_iterations"] == [2]
        assert summary["config"]["n_initial"] == 5
        assert summary["config"]["candidate_grid_shape"] == [36, 2]
        assert summary["seed_used"] == 0
