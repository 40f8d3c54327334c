import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masteryhmm.errors import (
    DegenerateObservationError,
    InputDomainError,
    InvalidModelError,
    ModelFormatError,
)
from masteryhmm.hmm_core import (
    DiscreteEmission,
    GaussianEmission,
    HmmModel,
    MixtureEmission,
    backward,
    forward,
    model_from_dict,
    model_to_dict,
    permute_states,
    sample,
    state_posteriors,
    viterbi,
)

from oracles import (
    brute_loglik,
    brute_posteriors,
    brute_viterbi,
    random_discrete_params,
)


def _identity_model(n=2, a=None):
    a = np.full((n, n), 1.0 / n) if a is None else a
    return HmmModel(np.full(n, 1.0 / n), a, DiscreteEmission(np.eye(n)))


def _random_model(seed, n, m):
    rng = np.random.default_rng(seed)
    pi, a, b = random_discrete_params(rng, n, m)
    return HmmModel(pi, a, DiscreteEmission(b)), (pi, a, b)


small_problem = st.tuples(
    st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 4), st.integers(1, 6)
)


class TestModelInvariants:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(InvalidModelError, match="transition"):
            HmmModel([0.5, 0.5], [[0.5, 0.6], [0.5, 0.5]], DiscreteEmission(np.eye(2)))
        with pytest.raises(InvalidModelError, match="initial"):
            HmmModel([0.4, 0.5], np.eye(2), DiscreteEmission(np.eye(2)))
        with pytest.raises(InvalidModelError, match="emission"):
            DiscreteEmission([[0.5, 0.6]])

    def test_rejects_negative_entries(self):
        with pytest.raises(InvalidModelError):
            HmmModel([1.2, -0.2], np.eye(2), DiscreteEmission(np.eye(2)))

    def test_rejects_state_count_mismatch(self):
        with pytest.raises(InvalidModelError, match="emission model has 3 states"):
            HmmModel([0.5, 0.5], np.eye(2), DiscreteEmission(np.eye(3)))

    def test_covariance_checks(self):
        with pytest.raises(InvalidModelError, match="symmetric"):
            GaussianEmission([[0.0, 0.0]], [[[1.0, 0.5], [0.0, 1.0]]])
        with pytest.raises(InvalidModelError, match="eigenvalue"):
            GaussianEmission([[0.0]], [[[1e-9]]])
        with pytest.raises(InvalidModelError, match="mixture weights"):
            MixtureEmission([[0.5, 0.6]], [[[0.0], [1.0]]], [[[[1.0]], [[1.0]]]])

    def test_parameters_are_read_only(self):
        model = _identity_model()
        with pytest.raises(ValueError):
            model.transitions[0, 0] = 1.0


class TestForward:
    def test_single_symbol(self):
        assert forward(_identity_model(), [1]).loglik == pytest.approx(np.log(0.5), abs=1e-10)

    def test_two_symbols(self):
        assert forward(_identity_model(), [1, 2]).loglik == pytest.approx(np.log(0.25), abs=1e-10)

    def test_matches_path_enumeration(self):
        model, (pi, a, b) = _random_model(3, 3, 4)
        obs = np.array([0, 3, 1, 1, 2, 0])
        assert forward(model, obs + 1).loglik == pytest.approx(brute_loglik(pi, a, b, obs), abs=1e-10)

    def test_scaled_columns_and_unscaling(self):
        model, (pi, a, b) = _random_model(11, 3, 4)
        obs = np.array([1, 0, 3, 2])
        res = forward(model, obs + 1)
        np.testing.assert_allclose(res.alpha.sum(axis=1), 1.0, atol=1e-9)
        raw = res.alpha * np.cumprod(res.scale)[:, None]
        # unnormalized alpha_t(i) by direct recursion
        ref = pi * b[:, obs[0]]
        expected = [ref]
        for o in obs[1:]:
            ref = (ref @ a) * b[:, o]
            expected.append(ref)
        np.testing.assert_allclose(raw, np.array(expected), rtol=1e-12)
        assert res.loglik == pytest.approx(np.log(np.cumprod(res.scale)[-1]), abs=1e-12)

    def test_out_of_alphabet(self):
        with pytest.raises(InputDomainError, match="symbol 3 at position 2"):
            forward(_identity_model(), [1, 3])
        with pytest.raises(InputDomainError):
            forward(_identity_model(), [0])
        with pytest.raises(InputDomainError):
            forward(_identity_model(), [1.5])
        with pytest.raises(InputDomainError):
            forward(_identity_model(), [])

    def test_degenerate_observation_names_step(self):
        # distant but representable frames survive the per-frame log offset
        model = HmmModel([1.0], [[1.0]], GaussianEmission([[0.0]], [[[1e-8]]]))
        assert np.isfinite(forward(model, [0.0, 1e6]).loglik)
        # an overflowing Mahalanobis distance has exactly zero density
        with pytest.raises(DegenerateObservationError, match="time step 2"):
            forward(model, [0.0, 1e200])
        with pytest.raises(DegenerateObservationError, match="time step 2"):
            viterbi(model, [0.0, 1e200])

    def test_zero_emission_is_floored(self):
        # symbol 2 is impossible in state 1 but the floor keeps inference finite
        model = HmmModel([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], DiscreteEmission([[1.0, 0.0], [0.0, 1.0]]))
        assert np.isfinite(forward(model, [1, 2]).loglik)

    def test_gaussian_forward_matches_enumeration(self):
        rng = np.random.default_rng(5)
        means = np.array([[0.0], [2.0]])
        covars = np.array([[[1.0]], [[0.5]]])
        model = HmmModel([0.3, 0.7], [[0.6, 0.4], [0.1, 0.9]], GaussianEmission(means, covars))
        x = rng.normal(size=5)
        dens = np.stack(
            [np.exp(-0.5 * (x - means[i, 0]) ** 2 / covars[i, 0, 0]) / np.sqrt(2 * np.pi * covars[i, 0, 0])
             for i in range(2)], axis=1)
        total = 0.0
        for p in itertools.product(range(2), repeat=5):
            w = model.initial[p[0]] * dens[0, p[0]]
            for t in range(1, 5):
                w *= model.transitions[p[t - 1], p[t]] * dens[t, p[t]]
            total += w
        assert forward(model, x).loglik == pytest.approx(np.log(total), abs=1e-10)


class TestBackward:
    def test_length_one_is_all_ones(self):
        model, _ = _random_model(1, 3, 4)
        np.testing.assert_array_equal(backward(model, [2]), np.ones((1, 3)))

    def test_single_state_constant(self):
        model = HmmModel([1.0], [[1.0]], DiscreteEmission([[0.2, 0.3, 0.5]]))
        beta = backward(model, [1, 3, 2, 2])
        np.testing.assert_allclose(beta, beta[0, 0])

    def test_posteriors_match_enumeration(self):
        model, (pi, a, b) = _random_model(7, 2, 3)
        obs = np.array([0, 2, 2, 1, 0])
        gamma = forward(model, obs + 1).alpha * backward(model, obs + 1)
        np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(gamma, brute_posteriors(pi, a, b, obs), atol=1e-10)


class TestStatePosteriors:
    def test_deterministic_model_gives_one_hot(self):
        model = HmmModel([1.0, 0.0], [[0.0, 1.0], [1.0, 0.0]], DiscreteEmission(np.eye(2)))
        np.testing.assert_allclose(state_posteriors(model, [1, 2, 1]), [[1, 0], [0, 1], [1, 0]], atol=1e-11)

    def test_single_state(self):
        model = HmmModel([1.0], [[1.0]], DiscreteEmission([[0.5, 0.5]]))
        np.testing.assert_array_equal(state_posteriors(model, [1, 2, 2]), np.ones((3, 1)))

    def test_matches_enumeration(self):
        model, (pi, a, b) = _random_model(8, 2, 4)
        obs = np.array([3, 0, 1, 3])
        np.testing.assert_allclose(state_posteriors(model, obs + 1), brute_posteriors(pi, a, b, obs), atol=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(small_problem)
    def test_rows_normalized(self, problem):
        seed, n, m, t = problem
        model, _ = _random_model(seed, n, m)
        obs = np.random.default_rng(seed + 1).integers(1, m + 1, size=t)
        gamma = state_posteriors(model, obs)
        assert np.all((gamma >= 0) & (gamma <= 1))
        np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-9)


class TestViterbi:
    def test_single_state(self):
        model = HmmModel([1.0], [[1.0]], DiscreteEmission([[0.1, 0.9]]))
        assert viterbi(model, [2, 1, 2]).states == (1, 1, 1)

    def test_deterministic_emissions(self):
        a = np.array([[0.7, 0.3], [0.4, 0.6]])
        assert viterbi(_identity_model(a=a), [1, 2, 1]).states == (1, 2, 1)

    def test_matches_enumerated_argmax(self):
        model, (pi, a, b) = _random_model(21, 3, 4)
        obs = np.array([2, 2, 0, 3, 1, 0])
        path, lp = brute_viterbi(pi, a, b, obs)
        traj = viterbi(model, obs + 1)
        assert traj.states == tuple(s + 1 for s in path)
        assert traj.log_prob == pytest.approx(lp, abs=1e-10)

    def test_ties_go_to_lower_state(self):
        # fully symmetric model: every path is equally likely
        model = HmmModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], DiscreteEmission([[0.5, 0.5], [0.5, 0.5]]))
        assert viterbi(model, [1, 2, 1, 1]).states == (1, 1, 1, 1)

    @settings(max_examples=40, deadline=None)
    @given(small_problem)
    def test_optimality(self, problem):
        seed, n, m, t = problem
        model, (pi, a, b) = _random_model(seed, n, m)
        obs = np.random.default_rng(seed + 2).integers(0, m, size=t)
        _, best = brute_viterbi(pi, a, b, obs)
        traj = viterbi(model, obs + 1)
        assert len(traj) == t
        assert traj.log_prob == pytest.approx(best, abs=1e-10)


class TestSample:
    def test_deterministic_per_seed(self, two_state_model):
        s1, o1 = sample(two_state_model, 30, 4)
        s2, o2 = sample(two_state_model, 30, 4)
        np.testing.assert_array_equal(s1, s2)
        np.testing.assert_array_equal(o1, o2)

    def test_fully_deterministic_model(self):
        model = HmmModel([0.0, 1.0], [[0.0, 1.0], [1.0, 0.0]], DiscreteEmission([[0.0, 1.0], [1.0, 0.0]]))
        states, obs = sample(model, 5, 123)
        assert states.tolist() == [2, 1, 2, 1, 2]
        assert obs.tolist() == [1, 2, 1, 2, 1]

    def test_transition_frequencies(self, two_state_model):
        states, _ = sample(two_state_model, 100_000, 99)
        s = states - 1
        counts = np.zeros((2, 2))
        np.add.at(counts, (s[:-1], s[1:]), 1)
        freq = counts / counts.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(freq, two_state_model.transitions, atol=0.01)

    def test_invalid_length(self, two_state_model):
        with pytest.raises(InputDomainError):
            sample(two_state_model, 0, 1)

    def test_continuous_shapes(self):
        model = HmmModel([1.0], [[1.0]], MixtureEmission([[0.3, 0.7]], [[[0.0, 0.0], [5.0, 5.0]]],
                                                       [[np.eye(2), np.eye(2)]]))
        _, obs = sample(model, 7, 0)
        assert obs.shape == (7, 2)
        assert np.isfinite(forward(model, obs).loglik)


class TestPermutationInvariance:
    @settings(max_examples=60, deadline=None)
    @given(small_problem, st.randoms(use_true_random=False))
    def test_loglik_unchanged(self, problem, rnd):
        seed, n, m, t = problem
        model, _ = _random_model(seed, n, m)
        order = list(range(n))
        rnd.shuffle(order)
        obs = np.random.default_rng(seed + 3).integers(1, m + 1, size=t)
        a = forward(model, obs).loglik
        b = forward(permute_states(model, order), obs).loglik
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_rejects_bad_permutation(self, two_state_model):
        with pytest.raises(InputDomainError):
            permute_states(two_state_model, [0, 0])


class TestSerialization:
    @pytest.mark.parametrize("kind", ["discrete", "gaussian", "mixture"])
    def test_round_trip_exact(self, kind):
        rng = np.random.default_rng(1)
        pi, a, b = random_discrete_params(rng, 3, 4)
        if kind == "discrete":
            emission = DiscreteEmission(b)
        elif kind == "gaussian":
            emission = GaussianEmission(rng.normal(size=(3, 2)), np.stack([np.eye(2) * (i + 1) for i in range(3)]))
        else:
            emission = MixtureEmission(rng.dirichlet(np.ones(2), size=3), rng.normal(size=(3, 2, 1)),
                                       np.ones((3, 2, 1, 1)))
        model = HmmModel(pi, a, emission)
        doc = json.loads(json.dumps(model_to_dict(model)))
        assert doc["version"] == 1 and doc["num_states"] == 3 and doc["emission"]["kind"] == kind
        back = model_from_dict(doc)
        np.testing.assert_array_equal(back.initial, model.initial)
        np.testing.assert_array_equal(back.transitions, model.transitions)
        for name in ("probs", "means", "covars", "weights"):
            if hasattr(emission, name):
                np.testing.assert_array_equal(getattr(back.emissions, name), getattr(emission, name))

    def test_unknown_version(self, two_state_model):
        doc = model_to_dict(two_state_model)
        doc["version"] = 99
        with pytest.raises(ModelFormatError, match="version 99"):
            model_from_dict(doc)

    def test_tampered_row(self, two_state_model):
        doc = model_to_dict(two_state_model)
        doc["A"][0] = [0.6, 0.6]
        with pytest.raises(ModelFormatError, match="rows must sum to 1"):
            model_from_dict(doc)

    def test_unknown_kind_and_missing_field(self, two_state_model):
        doc = model_to_dict(two_state_model)
        doc["emission"]["kind"] = "poisson"
        with pytest.raises(ModelFormatError, match="poisson"):
            model_from_dict(doc)
        doc = model_to_dict(two_state_model)
        del doc["pi"]
        with pytest.raises(ModelFormatError, match="missing field"):
            model_from_dict(doc)
