import numpy as np
import pytest
from scipy.special import expit

from choicerbm import oracle
from choicerbm.dataset import from_arrays
from choicerbm.model import CrbmParams
from choicerbm.stats import (bic, evaluate, finite_difference_hessian,
                             log_likelihood, mean_true_probability,
                             pinv_standard_errors, report_table_rows,
                             rho_squared, significant, t_statistics,
                             validation_error)
from conftest import random_params

FULL_TRAIN_ROWS = 177_662


def zero_params(n_alt, n_hid, n_feat):
    return CrbmParams(
        choice_hidden_w=np.zeros((n_alt, n_hid)),
        choice_context_w=np.zeros((n_alt, n_feat)),
        hidden_context_w=np.zeros((n_hid, n_feat)),
        choice_bias=np.zeros(n_alt),
        hidden_bias=np.zeros(n_hid))


class TestLogLikelihood:
    def test_uniform_model_closed_form(self, rng):
        ds = from_arrays(rng.normal(0, 1, (37, 2)), rng.integers(0, 5, 37))
        p = zero_params(5, 0, 2)
        assert log_likelihood(p, ds) == pytest.approx(37 * np.log(1 / 5),
                                                      abs=1e-10)

    def test_certain_prediction_gives_zero(self):
        ds = from_arrays(np.zeros((1, 1)), np.array([0]), n_alternatives=2)
        p = CrbmParams(
            choice_hidden_w=np.zeros((2, 0)),
            choice_context_w=np.zeros((2, 1)),
            hidden_context_w=np.zeros((0, 1)),
            choice_bias=np.array([2000.0, 0.0]),
            hidden_bias=np.zeros(0))
        assert log_likelihood(p, ds) == pytest.approx(0.0, abs=1e-12)

    def test_matches_enumeration_without_hidden(self, rng):
        p = random_params(rng, 4, 0, 3, scale=0.8)
        ds = from_arrays(rng.normal(0, 1, (25, 3)), rng.integers(0, 4, 25))
        assert log_likelihood(p, ds) == pytest.approx(
            oracle.exact_conditional_loglik(p, ds), abs=1e-10)

    def test_matches_enumeration_with_inactive_hidden(self, rng):
        # choice-hidden weights of zero make the mean-field path exact
        p = random_params(rng, 3, 2, 2, scale=0.8)
        p = CrbmParams(
            choice_hidden_w=np.zeros((3, 2)),
            choice_context_w=p.choice_context_w,
            hidden_context_w=p.hidden_context_w,
            choice_bias=p.choice_bias,
            hidden_bias=p.hidden_bias)
        ds = from_arrays(rng.normal(0, 1, (25, 2)), rng.integers(0, 3, 25))
        assert log_likelihood(p, ds) == pytest.approx(
            oracle.exact_conditional_loglik(p, ds), abs=1e-10)

    def test_never_minus_infinity(self, rng):
        p = CrbmParams(
            choice_hidden_w=np.zeros((2, 0)),
            choice_context_w=np.array([[500.0], [-500.0]]),
            hidden_context_w=np.zeros((0, 1)),
            choice_bias=np.zeros(2),
            hidden_bias=np.zeros(0))
        ds = from_arrays(np.array([[5.0], [-5.0]]), np.array([1, 0]),
                         n_alternatives=2)
        val = log_likelihood(p, ds)
        assert np.isfinite(val)


class TestRhoSquared:
    def test_null_model_gives_zero(self):
        n, i = 1000, 7
        assert rho_squared(n * np.log(1 / i), n, i) == pytest.approx(0.0)

    def test_reference_values(self):
        assert rho_squared(-206_808, FULL_TRAIN_ROWS, 13) == pytest.approx(
            0.546, abs=1e-3)
        assert rho_squared(-200_846, FULL_TRAIN_ROWS, 13) == pytest.approx(
            0.559, abs=1e-3)
        assert rho_squared(-203_558, FULL_TRAIN_ROWS, 13) == pytest.approx(
            0.553, abs=1e-3)

    def test_increasing_in_loglik(self):
        lls = np.linspace(-5000, -100, 17)
        vals = [rho_squared(ll, 500, 4) for ll in lls]
        assert np.all(np.diff(vals) > 0)


class TestBic:
    def test_reference_values(self):
        assert bic(-206_808, 273, FULL_TRAIN_ROWS) == pytest.approx(416_915, abs=2)
        assert bic(-203_558, 341, FULL_TRAIN_ROWS) == pytest.approx(411_237, abs=2)

    def test_zero_case(self):
        assert bic(0.0, 0, 10) == 0.0

    def test_linear_in_params_decreasing_in_loglik(self):
        base = bic(-1000, 10, 100)
        assert bic(-1000, 11, 100) == pytest.approx(base + np.log(100))
        assert bic(-999, 10, 100) < base


class TestValidationError:
    def test_perfect_predictor(self, rng):
        x = np.array([[3.0], [-3.0]] * 10)
        idx = np.array([0, 1] * 10)
        ds = from_arrays(x, idx, n_alternatives=2)
        p = CrbmParams(
            choice_hidden_w=np.zeros((2, 0)),
            choice_context_w=np.array([[50.0], [-50.0]]),
            hidden_context_w=np.zeros((0, 1)),
            choice_bias=np.zeros(2),
            hidden_bias=np.zeros(0))
        assert validation_error(p, ds) == 0.0
        assert mean_true_probability(p, ds) == pytest.approx(1.0, abs=1e-10)

    def test_uniform_model_with_tie_break(self, rng):
        n = 20_000
        idx = rng.integers(0, 13, n)
        ds = from_arrays(rng.normal(0, 1, (n, 2)), idx, n_alternatives=13)
        p = zero_params(13, 0, 2)
        err = validation_error(p, ds)
        # argmax of uniform probabilities always picks alternative 1
        expected = 1.0 - np.mean(idx == 0)
        assert err == pytest.approx(expected, abs=1e-12)
        sigma = np.sqrt((1 / 13) * (12 / 13) / n)
        assert abs(err - 12 / 13) < 3 * sigma

    def test_error_plus_accuracy_is_one(self, rng):
        p = random_params(rng, 4, 1, 2, scale=0.5)
        ds = from_arrays(rng.normal(0, 1, (200, 2)), rng.integers(0, 4, 200))
        from choicerbm.inference import predict_batch
        _, confusion = predict_batch(p, ds)
        accuracy = np.trace(confusion) / ds.n_rows
        assert validation_error(p, ds) + accuracy == pytest.approx(1.0, abs=0)

    def test_empty_dataset_rejected(self, rng):
        # empty datasets cannot even be constructed, so scoring one is
        # impossible by construction
        ds = from_arrays(rng.normal(0, 1, (4, 1)), rng.integers(0, 3, 4))
        with pytest.raises(ValueError, match="no rows"):
            ds.take(np.array([], dtype=int))


class TestStandardErrors:
    def test_opg_matches_analytic_fisher_one_param_logistic(self, rng):
        n, beta = 20_000, 0.7
        x = rng.normal(0, 1, n)
        prob = expit(beta * x)
        y = (rng.random(n) < prob).astype(float)
        scores = ((y - prob) * x)[:, None]
        se = pinv_standard_errors(scores)[0]
        fisher_se = 1.0 / np.sqrt((x ** 2 * prob * (1 - prob)).sum())
        assert se == pytest.approx(fisher_se, rel=0.05)

    def test_fd_hessian_matches_analytic_fisher(self, rng):
        n, beta = 4000, 0.7
        x = rng.normal(0, 1, n)
        prob = expit(beta * x)
        y = (rng.random(n) < prob).astype(float)

        def nll(theta):
            z = theta[0] * x
            return float(np.logaddexp(0, z).sum() - (y * z).sum())

        hess = finite_difference_hessian(nll, np.array([beta]))
        fisher = (x ** 2 * prob * (1 - prob)).sum()
        assert hess[0, 0] == pytest.approx(fisher, rel=0.05)
        assert 1 / np.sqrt(hess[0, 0]) == pytest.approx(1 / np.sqrt(fisher),
                                                        rel=0.05)

    def test_fd_hessian_caps_parameter_count(self):
        with pytest.raises(ValueError, match="50"):
            finite_difference_hessian(lambda t: float(t @ t), np.zeros(51))

    def test_zero_parameter_gives_zero_t(self, rng):
        ds = from_arrays(rng.normal(0, 1, (300, 2)), rng.integers(0, 3, 300))
        p = zero_params(3, 0, 2)
        with pytest.warns(UserWarning, match="singular"):
            _, tstats = t_statistics(p, ds)
        assert np.all(tstats.choice_context_w == 0.0)
        assert np.all(tstats.choice_bias == 0.0)

    def test_t_sign_follows_parameter_sign(self, rng):
        p = random_params(rng, 3, 1, 2, scale=0.6)
        ds = from_arrays(rng.normal(0, 1, (500, 2)), rng.integers(0, 3, 500))
        with pytest.warns(UserWarning, match="singular"):
            std_errs, tstats = t_statistics(p, ds)
        for (_, se), (_, t), (_, theta) in zip(std_errs.blocks(),
                                               tstats.blocks(), p.blocks()):
            mask = (se > 0) & (theta != 0)
            assert np.all(np.sign(t[mask]) == np.sign(theta[mask]))

    def test_significance_flag_threshold(self):
        t = np.array([-2.5, -1.96, -1.0, 0.0, 1.0, 1.96, 2.5])
        np.testing.assert_array_equal(
            significant(t), [True, True, False, False, False, True, True])

    def test_warns_when_underdetermined(self, rng):
        p = random_params(rng, 3, 2, 4, scale=0.3)
        ds = from_arrays(rng.normal(0, 1, (10, 4)), rng.integers(0, 3, 10))
        with pytest.warns(UserWarning, match="fewer rows"):
            t_statistics(p, ds)


class TestEvaluate:
    def test_report_fields_consistent(self, rng):
        tr = from_arrays(rng.normal(0, 1, (400, 3)), rng.integers(0, 4, 400))
        va = from_arrays(rng.normal(0, 1, (150, 3)), rng.integers(0, 4, 150))
        p = random_params(rng, 4, 2, 3, scale=0.4)
        with pytest.warns(UserWarning, match="singular"):
            rep = evaluate(p, tr, va)
        assert rep.rho2 <= 1.0
        assert np.isfinite(rep.bic)
        assert 0.0 <= rep.validation_error <= 1.0
        assert rep.confusion.sum() == va.n_rows
        np.testing.assert_array_equal(rep.confusion.sum(axis=1),
                                      va.y.sum(axis=0))
        assert rep.n_params == 4 * 2 + 3 * 4 + 3 * 2 + 2 + 4

    def test_table_rows_format(self, rng):
        tr = from_arrays(rng.normal(0, 1, (200, 2)), rng.integers(0, 3, 200))
        p = zero_params(3, 0, 2)
        with pytest.warns(UserWarning, match="singular"):
            rep = evaluate(p, tr, tr)
        text = report_table_rows([("MNL", rep)])
        lines = text.strip().split("\n")
        assert lines[0].startswith("model,validation_error,log_likelihood")
        assert lines[1].startswith("MNL,")
        assert len(lines[1].split(",")) == 6
