import numpy as np
import pytest
from scipy.linalg import solve_toeplitz

from mipipe.errors import RankDeficientError
from mipipe.features import (
    ArCoefficients,
    CspModel,
    FeatureVector,
    ar_feature,
    ar_from_autocovariance,
    class_covariance,
    csp_feature,
    fisher_scores,
    fit_ar,
    fit_csp,
    lrp_feature,
    select_channels,
)

from conftest import make_trial


def orthogonal_trial(scales, label=None):
    """Trial whose normalized covariance is diag(scales) / sum(scales)."""
    base = np.array([[1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0]])
    return make_trial(np.diag(np.sqrt(scales)) @ base, label=label)


class TestCsp:
    def test_hand_computed_2x2_oracle(self):
        # class covariances diag(2,1)/3 and diag(1,2)/3 exactly
        neg = [orthogonal_trial([2.0, 1.0])]
        pos = [orthogonal_trial([1.0, 2.0])]
        assert np.allclose(class_covariance(neg), np.diag([2 / 3, 1 / 3]))
        model = fit_csp(neg, pos, m=1)
        assert np.allclose(model.eigenvalues, [2 / 3, 1 / 3], atol=1e-8)
        # filters are the coordinate axes up to sign and scale
        for row in model.filters:
            assert np.min(np.abs(row)) < 1e-8 * np.max(np.abs(row))
        # both projected covariances diagonal, summing to identity
        for cov in (class_covariance(neg), class_covariance(pos)):
            proj = model.filters @ cov @ model.filters.T
            off = proj - np.diag(np.diag(proj))
            assert np.max(np.abs(off)) < 1e-8
        total = model.filters @ (class_covariance(neg) + class_covariance(pos)) @ model.filters.T
        assert np.allclose(total, np.eye(2), atol=1e-8)

    def test_identical_classes_half_eigenvalues(self, rng):
        trials = [make_trial(rng.normal(size=(4, 50))) for _ in range(6)]
        model = fit_csp(trials, trials, m=2)
        assert np.allclose(model.eigenvalues, 0.5, atol=1e-8)

    def test_composite_whitening_identity(self, rng):
        neg = [make_trial(rng.normal(size=(4, 200))) for _ in range(8)]
        pos = [make_trial(rng.normal(size=(4, 200))) for _ in range(8)]
        model = fit_csp(neg, pos, m=2)
        composite = class_covariance(neg) + class_covariance(pos)
        assert np.allclose(model.filters @ composite @ model.filters.T,
                           np.eye(4), atol=1e-8)
        # per-filter complementarity: class shares sum to 1
        neg_shares = np.diag(model.filters @ class_covariance(neg) @ model.filters.T)
        pos_shares = np.diag(model.filters @ class_covariance(pos) @ model.filters.T)
        assert np.allclose(neg_shares + pos_shares, 1.0, atol=1e-8)
        assert np.allclose(neg_shares, model.eigenvalues, atol=1e-8)

    def test_rank_deficient_error(self):
        # second channel duplicates the first
        data = np.vstack([np.arange(8.0), np.arange(8.0)])
        trials = [make_trial(data)]
        with pytest.raises(RankDeficientError):
            fit_csp(trials, trials, m=1)

    def test_too_many_filters(self, rng):
        trials = [make_trial(rng.normal(size=(2, 20)))]
        with pytest.raises(ValueError):
            fit_csp(trials, trials, m=2)

    def test_sign_convention(self, rng):
        neg = [make_trial(rng.normal(size=(4, 100))) for _ in range(4)]
        pos = [make_trial(rng.normal(size=(4, 100))) for _ in range(4)]
        model = fit_csp(neg, pos, m=1)
        for row in model.filters:
            assert row[np.argmax(np.abs(row))] > 0


class TestCspFeature:
    def identity_model(self):
        return CspModel(filters=np.eye(2), eigenvalues=np.array([0.7, 0.3]), m=1)

    def test_equal_variances(self, rng):
        x = rng.normal(size=(1, 100))
        trial = make_trial(np.vstack([x, x[:, ::-1]]))
        f = csp_feature(self.identity_model(), trial)
        assert abs(f.values[0] - np.log(0.5)) < 1e-12

    def test_three_to_one_ratio(self, rng):
        x = rng.normal(size=100)
        x = (x - x.mean()) / x.std()
        trial = make_trial(np.vstack([np.sqrt(3.0) * x, x]))
        f = csp_feature(self.identity_model(), trial)
        assert abs(f.values[0] - np.log(0.75)) < 1e-12

    def test_scale_invariance(self, rng):
        trial = make_trial(rng.normal(size=(2, 100)))
        f1 = csp_feature(self.identity_model(), trial)
        f2 = csp_feature(self.identity_model(), trial.with_data(17.5 * trial.data))
        assert abs(f1.values[0] - f2.values[0]) < 1e-9

    def test_variance_shares_sum_to_one(self, rng):
        model = self.identity_model()
        trial = make_trial(rng.normal(size=(2, 100)))
        projected = model.filters @ trial.data
        v = projected.var(axis=1)
        share_h = v[0] / v.sum()
        share_f = v[1] / v.sum()
        assert abs(share_h + share_f - 1.0) < 1e-12

    def test_output_negative(self, rng):
        trial = make_trial(rng.normal(size=(2, 100)))
        assert csp_feature(self.identity_model(), trial).values[0] < 0

    def test_class_sign_on_synthetic(self):
        from mipipe.preprocess import bandpass_zero_phase, crop
        from mipipe.synthgen import SynthConfig, generate

        ts = generate(SynthConfig(n_channels=4, trials_per_session=40,
                                  erd_depth=0.7, noise_sigma_uv=0.5, seed=2))
        prepped = [crop(bandpass_zero_phase(t, 100.0, 12.0, 14.0), 100.0, 0.5, 4.5)
                   for t in ts]
        neg = [t for t in prepped if t.label == -1]
        pos = [t for t in prepped if t.label == 1]
        model = fit_csp(neg[:10], pos[:10], m=1)
        neg_feats = [csp_feature(model, t).values[0] for t in neg[10:]]
        pos_feats = [csp_feature(model, t).values[0] for t in pos[10:]]
        assert np.mean(neg_feats) > np.log(0.5) > np.mean(pos_feats)


class TestAr:
    def test_white_noise(self, rng):
        x = rng.normal(size=10000)
        model = fit_ar(x, p=7)
        assert np.max(np.abs(model.a)) < 0.05
        assert abs(model.noise_variance - 1.0) < 0.05

    def test_analytic_ar1_autocovariance(self):
        # x(n) = 0.9 x(n-1) + u(n), var(u) = 1: r(k) = 0.9^k / (1 - 0.81)
        r = 0.9 ** np.arange(2) / (1 - 0.81)
        model = ar_from_autocovariance(r, p=1)
        assert abs(model.a[0] - (-0.9)) < 1e-10
        assert abs(model.noise_variance - 1.0) < 1e-10

    def test_analytic_matches_toeplitz_solver(self, rng):
        # independent oracle: generic SPD autocovariance solved by Levinson
        r = np.r_[5.0, 2.0, 1.0, 0.5, 0.1]
        p = 4
        model = ar_from_autocovariance(r, p)
        oracle = solve_toeplitz(r[:p], r[1: p + 1])
        assert np.max(np.abs(model.a + oracle)) < 1e-10

    def test_simulated_ar1(self, rng):
        n = 10000
        u = rng.normal(size=n + 500)
        x = np.empty(n + 500)
        x[0] = u[0]
        for i in range(1, n + 500):
            x[i] = 0.9 * x[i - 1] + u[i]
        model = fit_ar(x[500:], p=1)
        assert abs(model.a[0] - (-0.9)) < 0.05
        assert abs(model.noise_variance - 1.0) < 0.05

    def test_constant_series_errors(self):
        with pytest.raises(ValueError):
            fit_ar(np.ones(1000), p=3)

    def test_too_short_errors(self, rng):
        with pytest.raises(ValueError):
            fit_ar(rng.normal(size=60), p=7)

    def test_noise_variance_nonnegative(self):
        with pytest.raises(ValueError):
            ArCoefficients(a=[0.5], noise_variance=-1.0)


class TestArFeature:
    def test_dimension_one_channel(self, rng):
        trial = make_trial(rng.normal(size=(3, 200)))
        f = ar_feature(trial, [0], p=7)
        assert len(f) == 8
        assert f.method == "ar"

    def test_dimension_and_layout_two_channels(self, rng):
        trial = make_trial(rng.normal(size=(3, 200)))
        both = ar_feature(trial, [1, 2], p=7)
        first = ar_feature(trial, [1], p=7)
        assert len(both) == 16
        assert np.array_equal(both.values[:8], first.values)

    def test_error_tagged_with_channel(self, rng):
        data = rng.normal(size=(2, 200))
        data[1] = 1.0
        with pytest.raises(ValueError, match="channel 1"):
            ar_feature(make_trial(data), [0, 1], p=7)


class TestLrpFeature:
    def test_constant_after_baseline(self):
        from mipipe.preprocess import baseline_correct
        trial = make_trial(np.full((2, 300), 2.0))
        corrected = baseline_correct(trial, 100.0, (0.0, 0.5))
        f = lrp_feature(corrected, [0, 1], 100.0, (0.5, 1.5))
        assert np.allclose(f.values, 0.0)

    def test_ramp_mean(self):
        # channel rises linearly 0 -> 1 across the feature window
        n = 300
        data = np.zeros((1, n))
        window = slice(50, 150)
        data[0, window] = np.linspace(0, 1, 100)
        f = lrp_feature(make_trial(data), [0], 100.0, (0.5, 1.5))
        assert abs(f.values[0] - 0.5) < 1 / (2 * 100)

    def test_lateralized_drift_sign(self):
        from mipipe.preprocess import baseline_correct, lowpass_zero_phase
        from mipipe.synthgen import SynthConfig, generate

        ts = generate(SynthConfig(n_channels=4, trials_per_session=20,
                                  erd_depth=0.0, lrp_slope_uv_per_s=5.0,
                                  noise_sigma_uv=0.1, seed=5))
        feats = []
        for t in ts:
            p = baseline_correct(lowpass_zero_phase(t, 100.0, 1.5), 100.0, (0.0, 0.5))
            feats.append(lrp_feature(p, range(4), 100.0, (0.5, 1.5)).values)
        feats = np.array(feats)
        labels = np.array([t.label for t in ts])
        # the most drift-loaded channel separates the classes by sign
        scores = fisher_scores(feats, labels)
        best = int(np.argmax(scores))
        neg_mean = feats[labels == -1, best].mean()
        pos_mean = feats[labels == 1, best].mean()
        assert neg_mean * pos_mean < 0


class TestFisher:
    def test_equal_means_zero(self):
        values = np.array([[0.0], [0.0], [1.0], [1.0]])
        labels = [-1, 1, -1, 1]
        assert fisher_scores(values, labels)[0] == 0.0

    def test_known_score(self, rng):
        neg = rng.normal(0.0, 1.0, size=(5000, 1))
        pos = rng.normal(1.0, 1.0, size=(5000, 1))
        values = np.vstack([neg, pos])
        labels = [-1] * 5000 + [1] * 5000
        score = fisher_scores(values, labels)[0]
        assert abs(score - 0.5) < 0.05

    def test_exact_score_from_moments(self):
        # means 0 and 1, sample variances 1 and 1 exactly
        neg = np.array([-1.0, 1.0])  # mean 0, var (ddof=1) = 2 -> scale
        neg = neg / np.sqrt(2)
        pos = neg + 1.0
        values = np.r_[neg, pos][:, None]
        labels = [-1, -1, 1, 1]
        assert abs(fisher_scores(values, labels)[0] - 0.5) < 1e-12

    def test_scale_invariance(self, rng):
        values = rng.normal(size=(20, 3))
        labels = [-1] * 10 + [1] * 10
        s1 = fisher_scores(values, labels)
        s2 = fisher_scores(10.0 * values + 3.0, labels)
        assert np.max(np.abs(s1 - s2)) < 1e-9

    def test_zero_variance_separable_is_inf(self):
        values = np.array([[0.0], [0.0], [1.0], [1.0]])
        labels = [-1, -1, 1, 1]
        assert fisher_scores(values, labels)[0] == np.inf

    def test_too_few_per_class(self):
        with pytest.raises(ValueError):
            fisher_scores(np.zeros((3, 2)), [-1, 1, 1])

    def test_permutation_equivariance(self, rng):
        values = rng.normal(size=(20, 4))
        labels = [-1] * 10 + [1] * 10
        perm = [2, 0, 3, 1]
        s1 = fisher_scores(values, labels)[perm]
        s2 = fisher_scores(values[:, perm], labels)
        assert np.allclose(s1, s2)


class TestSelectChannels:
    def test_top_two(self):
        assert select_channels(np.array([0.1, 0.9, 0.5]), 2) == [1, 2]

    def test_tie_goes_to_lower_index(self):
        assert select_channels(np.array([0.5, 0.5, 0.5]), 1) == [0]

    def test_all_channels_sorted_by_score(self):
        assert select_channels(np.array([0.1, 0.9, 0.5]), 3) == [1, 2, 0]

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            select_channels(np.array([1.0, 2.0]), 0)
        with pytest.raises(ValueError):
            select_channels(np.array([1.0, 2.0]), 3)


def test_feature_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        FeatureVector(np.array([1.0, np.inf]), "csp")
