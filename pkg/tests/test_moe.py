import math

import numpy as np
import pytest

from moegate.info import LN2, channel_mutual_information
from moegate.moe import (
    ExpertBank,
    GateParams,
    LabeledDataset,
    MoEModel,
    empirical_risk,
    gate_probs,
    gating_rate_plugin,
    generate_dataset,
    population_risk_estimate,
    sample_model_from_prior,
    sample_route,
    sample_routes,
)


def make_model(gate_w, gate_b, exp_w, exp_b):
    return MoEModel(GateParams(gate_w, gate_b), ExpertBank(exp_w, exp_b))


@pytest.fixture
def toy():
    """d = 1, two experts: h_0 = 1[x > 0], h_1 = 1[x < 0]."""
    model = make_model([[1.0], [-1.0]], [0.0, 0.5], [[1.0], [-1.0]], [0.0, 0.0])
    data = LabeledDataset([[-1.0], [0.5], [2.0]], [1, 1, 0])
    return model, data


class TestConstruction:
    def test_inconsistent_n(self):
        with pytest.raises(ValueError):
            make_model(np.zeros((3, 2)), np.zeros(3), np.zeros((2, 2)), np.zeros(2))

    def test_inconsistent_d(self):
        with pytest.raises(ValueError):
            make_model(np.zeros((2, 3)), np.zeros(2), np.zeros((2, 2)), np.zeros(2))

    def test_non_finite_gate(self):
        with pytest.raises(ValueError):
            GateParams([[np.inf]], [0.0])

    def test_labels_checked(self):
        with pytest.raises(ValueError):
            LabeledDataset([[0.0], [1.0]], [0, 2])
        with pytest.raises(ValueError):
            LabeledDataset([[0.0], [1.0]], [0])

    def test_parameters_read_only(self, toy):
        model, _ = toy
        with pytest.raises(ValueError):
            model.gate.weights[0, 0] = 3.0


class TestGateProbs:
    def test_zero_params_uniform(self):
        model = make_model(np.zeros((4, 2)), np.zeros(4), np.zeros((4, 2)), np.zeros(4))
        np.testing.assert_allclose(gate_probs(model, [0.3, -1.2]), np.full(4, 0.25), atol=1e-15)

    def test_saturated(self):
        model = make_model(np.zeros((3, 1)), [-50.0, 50.0, -50.0], np.zeros((3, 1)), np.zeros(3))
        np.testing.assert_allclose(gate_probs(model, [0.0]), [0, 1, 0], atol=1e-9)

    def test_two_logits(self):
        model = make_model([[0.0], [0.0]], [1.0, 0.0], np.zeros((2, 1)), np.zeros(2))
        np.testing.assert_allclose(
            gate_probs(model, [5.0]), [0.7310585786300049, 0.2689414213699951], atol=1e-12
        )

    def test_dimension_mismatch(self, toy):
        with pytest.raises(ValueError):
            gate_probs(toy[0], [1.0, 2.0])

    def test_valid_simplex(self, rng):
        model = sample_model_from_prior(3, 10, rng)
        P = model.gate_probs(rng.standard_normal((500, 3)) * 5)
        assert np.all(P > 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


class TestSampleRoute:
    def test_one_hot(self, rng):
        model = make_model(np.zeros((3, 1)), [-60.0, -60.0, 60.0], np.zeros((3, 1)), np.zeros(3))
        assert {sample_route(model, [0.0], rng) for _ in range(200)} == {2}

    def test_uniform_frequencies(self, rng):
        n = 5
        model = make_model(np.zeros((n, 2)), np.zeros(n), np.zeros((n, 2)), np.zeros(n))
        routes = sample_routes(model, np.zeros((100_000, 2)), rng)
        freq = np.bincount(routes, minlength=n) / routes.size
        np.testing.assert_allclose(freq, 1 / n, atol=0.01)

    def test_deterministic(self, toy):
        a = [sample_route(toy[0], [0.3], r) for r in [np.random.default_rng(3)] for _ in range(50)]
        b = [sample_route(toy[0], [0.3], r) for r in [np.random.default_rng(3)] for _ in range(50)]
        assert a == b


class TestEmpiricalRisk:
    def test_always_correct(self):
        # both experts output 1 everywhere; all labels 1
        model = make_model([[1.0], [2.0]], [0.0, 0.0], [[0.0], [0.0]], [1.0, 1.0])
        data = LabeledDataset([[0.1], [-3.0], [2.0]], [1, 1, 1])
        assert empirical_risk(model, data) == 0.0

    def test_single_expert(self, rng):
        model = sample_model_from_prior(2, 1, rng)
        X = rng.standard_normal((40, 2))
        y = rng.integers(0, 2, 40)
        pred = (X @ model.bank.weights[0] + model.bank.biases[0] > 0).astype(int)
        assert empirical_risk(model, LabeledDataset(X, y)) == pytest.approx(np.mean(pred != y))

    def test_matches_sampled_routes(self, toy):
        model, data = toy
        exact = empirical_risk(model, data)
        rng = np.random.default_rng(11)
        draws = 1_000_000
        probs = model.gate_probs(data.X)
        preds = model.bank.predict(data.X)
        losses = np.empty((draws, len(data)))
        for j in range(len(data)):
            t = rng.choice(2, size=draws, p=probs[j])
            losses[:, j] = preds[j, t] != data.y[j]
        per_draw = losses.mean(axis=1)
        se = per_draw.std(ddof=1) / math.sqrt(draws)
        assert abs(per_draw.mean() - exact) <= 3 * se

    def test_empty(self, toy):
        empty = LabeledDataset(np.zeros((0, 1)), np.zeros(0, dtype=int))
        with pytest.raises(ValueError):
            empirical_risk(toy[0], empty)

    def test_custom_loss(self, toy):
        model, data = toy
        flipped = MoEModel(model.gate, model.bank, loss=lambda p, y: (p == y).astype(float))
        assert empirical_risk(flipped, data) == pytest.approx(1 - empirical_risk(model, data))


class TestPopulationRisk:
    def test_perfect_model(self, rng):
        truth = make_model([[0.0, 0.0]], [0.0], [[1.0, -1.0]], [0.2])
        test = generate_dataset(truth, 500, rng)
        assert population_risk_estimate(truth, test) == 0.0

    def test_random_guess(self, rng):
        model = sample_model_from_prior(3, 4, rng)
        X = rng.standard_normal((10_000, 3))
        test = LabeledDataset(X, rng.integers(0, 2, 10_000))
        assert population_risk_estimate(model, test) == pytest.approx(0.5, abs=0.02)

    def test_disjoint_seeds_agree(self):
        truth = sample_model_from_prior(3, 10, np.random.default_rng(0))
        model = sample_model_from_prior(3, 10, np.random.default_rng(1))
        a = population_risk_estimate(model, generate_dataset(truth, 1000, np.random.default_rng(2)))
        b = population_risk_estimate(model, generate_dataset(truth, 1000, np.random.default_rng(3)))
        assert abs(a - b) <= 3 * math.sqrt(0.25 / 1000)


class TestGatingRate:
    def test_constant_gate(self, rng):
        model = make_model(np.zeros((4, 3)), rng.standard_normal(4), np.zeros((4, 3)), np.zeros(4))
        assert gating_rate_plugin(model, rng.standard_normal((50, 3))) == 0.0

    def test_hard_balanced_split(self):
        model = make_model([[50.0], [-50.0]], [0.0, 0.0], np.zeros((2, 1)), np.zeros(2))
        X = np.array([[1.0]] * 7 + [[-1.0]] * 7)
        assert gating_rate_plugin(model, X) == pytest.approx(LN2, abs=1e-12)

    def test_four_point_support(self, rng):
        model = sample_model_from_prior(2, 3, rng)
        X = rng.standard_normal((4, 2))
        channel = model.gate_probs(X)
        expected = channel_mutual_information(np.full(4, 0.25), channel)
        assert gating_rate_plugin(model, X) == pytest.approx(expected, abs=1e-12)

    def test_bounds(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 7))
            model = sample_model_from_prior(2, n, rng)
            rate = gating_rate_plugin(model, 3 * rng.standard_normal((30, 2)))
            assert 0.0 <= rate <= math.log(n) + 1e-12

    def test_empty(self, toy):
        with pytest.raises(ValueError):
            gating_rate_plugin(toy[0], np.zeros((0, 1)))


class TestPriorAndData:
    def test_shapes(self, rng):
        model = sample_model_from_prior(3, 10, rng)
        assert model.n_experts == 10 and model.dim == 3
        assert model.bank.weights.shape == (10, 3)

    def test_seeded(self):
        a = sample_model_from_prior(3, 10, np.random.default_rng(5))
        b = sample_model_from_prior(3, 10, np.random.default_rng(5))
        np.testing.assert_array_equal(a.gate.weights, b.gate.weights)
        np.testing.assert_array_equal(a.bank.biases, b.bank.biases)

    def test_prior_mean(self, rng):
        w = np.concatenate(
            [sample_model_from_prior(10, 10, rng).gate.weights.ravel() for _ in range(100)]
        )
        assert w.size == 10_000
        assert abs(w.mean()) < 0.05

    def test_bad_sizes(self, rng):
        with pytest.raises(ValueError):
            sample_model_from_prior(0, 3, rng)

    def test_dataset_size(self, rng):
        data = generate_dataset(sample_model_from_prior(3, 10, rng), 5, rng)
        assert len(data) == 5 and data.X.shape == (5, 3)

    def test_constant_expert(self, rng):
        truth = make_model([[0.0, 0.0]], [0.0], [[0.0, 0.0]], [1.0])
        assert np.all(generate_dataset(truth, 100, rng).y == 1)

    def test_nonpositive_m(self, toy, rng):
        with pytest.raises(ValueError):
            generate_dataset(toy[0], 0, rng)

    def test_label_frequency_stable(self):
        truth = sample_model_from_prior(3, 10, np.random.default_rng(99))
        freqs = [generate_dataset(truth, 100_000, np.random.default_rng(s)).y.mean() for s in (1, 2)]
        assert abs(freqs[0] - freqs[1]) < 0.01

    def test_bit_identical(self):
        truth = sample_model_from_prior(3, 10, np.random.default_rng(4))
        a = generate_dataset(truth, 50, np.random.default_rng(8))
        b = generate_dataset(truth, 50, np.random.default_rng(8))
        assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()


def test_predict_proba_mixture(toy):
    model, data = toy
    proba = model.predict_proba(data.X)
    expected = np.sum(model.gate_probs(data.X) * model.bank.predict(data.X), axis=1)
    np.testing.assert_allclose(proba[:, 1], expected)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(model.predict(data.X)) <= {0, 1}
