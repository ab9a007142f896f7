import math

import numpy as np
import pytest

from incnet.graph import AttributedGraph
from incnet.model import (
    EmbeddingModel,
    Trainer,
    TrainConfig,
    attr_grads,
    exact_objective,
    init_model,
    load_embeddings,
    lr_schedule,
    prob_attr,
    prob_context,
    save_embeddings,
    sgd_step_attr,
    sgd_step_structure,
    structure_grads,
    train,
)
from incnet.walks import count_context_pairs, generate_walks

from oracles import (
    brute_force_objective,
    fd_max_relative_error,
    random_graph,
    random_model,
    sampled_loss,
)

FD_RTOL = 1e-5


def random_config(rng, n_items, dim_choices=(2, 8, 32), k=5):
    d = int(rng.choice(dim_choices))
    j = int(rng.integers(n_items))
    negs = rng.choice([x for x in range(n_items) if x != j], size=k, replace=True)
    return d, j, negs


class TestInit:
    def test_input_range(self):
        model = init_model(50, 3, 4, seed=1)
        assert np.all(np.abs(model.w_in) < 0.125)
        assert model.w_in.std() > 0

    def test_outputs_zero(self):
        model = init_model(7, 5, 16, seed=2)
        assert not model.w_out_s.any() and not model.w_out_a.any()
        assert model.w_out_s.shape == (16, 7)
        assert model.w_out_a.shape == (16, 5)

    def test_deterministic(self):
        a, b = init_model(9, 4, 8, seed=3), init_model(9, 4, 8, seed=3)
        np.testing.assert_array_equal(a.w_in, b.w_in)

    def test_embedding_is_input_row(self):
        model = init_model(6, 2, 5, seed=4)
        np.testing.assert_array_equal(model.embedding(3), model.w_in[3])
        one_hot = np.eye(6)[3]
        np.testing.assert_array_equal(model.w_in.T @ one_hot, model.w_in[3])


class TestProbabilities:
    def test_zero_outputs_uniform(self):
        model = init_model(6, 4, 3, seed=0)
        assert prob_context(model, 2, 5) == pytest.approx(1 / 6, abs=1e-15)
        assert prob_attr(model, 1, 3) == pytest.approx(1 / 4, abs=1e-15)

    def test_normalised(self):
        for seed in range(10):
            model = random_model(8, 5, 6, seed, scale=2.0)
            for i in range(8):
                assert abs(sum(prob_context(model, i, j) for j in range(8)) - 1) < 1e-12
                assert abs(sum(prob_attr(model, i, j) for j in range(5)) - 1) < 1e-12

    def test_two_node_logits(self):
        model = EmbeddingModel(np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]]), np.zeros((1, 1)))
        assert prob_context(model, 0, 0) == pytest.approx(math.e / (math.e + 1), abs=1e-15)
        assert prob_context(model, 0, 0) == pytest.approx(0.7310585786300049, abs=1e-15)

    def test_single_attribute(self):
        model = random_model(3, 1, 4, seed=1)
        assert prob_attr(model, 2, 0) == pytest.approx(1.0, abs=1e-15)

    def test_large_logits_stable(self):
        model = EmbeddingModel(np.array([[800.0], [0.0]]), np.array([[1.0, 0.0]]), np.zeros((1, 1)))
        assert prob_context(model, 0, 0) == 1.0
        assert prob_context(model, 0, 1) == 0.0


def small_instance(seed, n=5, a=3):
    g = random_graph(n, 0.6, seed, n_attrs=a, attr_density=0.7)
    if g.edge_count == 0:
        g = AttributedGraph.from_edges(n, [(0, 1, 1.0)], g.attr_vocab.names,
                                       zip(g.attr_rows(), g.attr_indices, g.attr_values))
    counts = count_context_pairs(generate_walks(g, 6, 2, seed), 2, n)
    return g, counts


class TestExactObjective:
    def test_uniform_identity(self):
        g, counts = small_instance(0, n=6, a=4)
        report = exact_objective(init_model(6, 4, 8, seed=0), counts, g)
        assert report.total == pytest.approx(math.log(6) + math.log(4), abs=1e-12)
        assert report.alpha1 == pytest.approx(1 / counts.total)
        assert report.alpha2 == pytest.approx(1 / g.attr_values.sum())

    def test_no_attributes(self):
        g, counts = small_instance(1)
        bare = g.without_attrs()
        model = random_model(5, 3, 4, seed=1)
        report = exact_objective(model, counts, bare)
        assert report.attribute_term == 0.0 and report.alpha2 == 0.0
        assert report.total == pytest.approx(report.structure_term, abs=0)

    def test_matches_brute_force(self):
        for seed in range(10):
            g, counts = small_instance(seed)
            model = random_model(5, 3, 4, seed)
            got = exact_objective(model, counts, g).total
            assert abs(got - brute_force_objective(model, counts, g)) < 1e-10


class TestGradients:
    def test_zero_vectors(self):
        model = init_model(4, 2, 3, seed=0)
        model.w_in[:] = 0
        grad_in, grad_pos, grad_negs = structure_grads(model, 0, 1, [2, 3])
        np.testing.assert_array_equal(grad_in, 0)
        np.testing.assert_array_equal(grad_pos, 0)
        np.testing.assert_array_equal(grad_negs, 0)

    def test_zero_outputs_nonzero_input(self):
        model = init_model(4, 2, 3, seed=0)
        grad_in, grad_pos, grad_negs = structure_grads(model, 0, 1, [2, 3])
        np.testing.assert_array_equal(grad_in, 0)
        np.testing.assert_allclose(grad_pos, -0.5 * model.w_in[0], rtol=1e-15)
        np.testing.assert_allclose(grad_negs, 0.5 * np.tile(model.w_in[0], (2, 1)), rtol=1e-15)

    @pytest.mark.parametrize("family", ["structure", "attribute"])
    def test_finite_differences(self, family):
        rng = np.random.default_rng(7 if family == "structure" else 8)
        worst = 0.0
        for trial in range(30):
            d, j, negs = random_config(rng, 12)
            i = int(rng.integers(12))
            model = random_model(12, 12, d, trial)
            if family == "structure":
                grads, out = structure_grads(model, i, j, negs), model.w_out_s
            else:
                grads, out = attr_grads(model, i, j, negs), model.w_out_a
            worst = max(worst, fd_max_relative_error(model, out, i, j, negs, grads))
        assert worst < FD_RTOL

    def test_doubled_embedding(self):
        model = random_model(10, 3, 8, seed=3)
        j, negs = 4, np.array([1, 2, 7, 7, 9])
        base = structure_grads(model, 0, j, negs)[1]
        model.w_in[0] *= 2
        doubled = structure_grads(model, 0, j, negs)
        assert fd_max_relative_error(model, model.w_out_s, 0, j, negs, doubled) < FD_RTOL
        # same direction (both are multiples of the embedding), scaled by 2 and the new sigma
        cos = base @ doubled[1] / np.linalg.norm(base) / np.linalg.norm(doubled[1])
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_positive_in_negatives_rejected(self):
        with pytest.raises(ValueError):
            structure_grads(init_model(4, 1, 2, seed=0), 0, 1, [1, 2])


class TestSgdSteps:
    def test_zero_rate_is_noop(self):
        model = random_model(8, 4, 6, seed=0)
        before = model.copy()
        sgd_step_structure(model, 0, 1, [2, 3, 4], 0.0)
        sgd_step_attr(model, 0, 1, [2, 3], 0.0)
        for name in ("w_in", "w_out_s", "w_out_a"):
            assert getattr(model, name).tobytes() == getattr(before, name).tobytes()

    @pytest.mark.parametrize("seed", range(5))
    def test_descent(self, seed):
        model = random_model(10, 6, 8, seed)
        negs = [3, 5, 5, 8, 9]
        before = sampled_loss(model.w_in[2], model.w_out_s, 1, negs)
        sgd_step_structure(model, 2, 1, negs, 1e-3)
        assert sampled_loss(model.w_in[2], model.w_out_s, 1, negs) < before
        negs = [0, 2, 3, 4, 5]
        before = sampled_loss(model.w_in[2], model.w_out_a, 1, negs)
        sgd_step_attr(model, 2, 1, negs, 1e-3)
        assert sampled_loss(model.w_in[2], model.w_out_a, 1, negs) < before

    def test_step_equals_gradient_update(self):
        for seed in range(20):
            model = random_model(12, 7, 16, seed)
            rng = np.random.default_rng(seed)
            i, j = 3, 4
            negs = rng.choice([x for x in range(7) if x != j], size=5)
            grad_in, grad_pos, grad_negs = attr_grads(model, i, j, negs)
            expected = model.copy()
            lr = 0.05
            expected.w_in[i] -= lr * grad_in
            expected.w_out_a[:, j] -= lr * grad_pos
            for k, g in zip(negs, grad_negs):
                expected.w_out_a[:, k] -= lr * g
            sgd_step_attr(model, i, j, negs, lr)
            np.testing.assert_allclose(model.w_in, expected.w_in, rtol=1e-13, atol=1e-15)
            np.testing.assert_allclose(model.w_out_a, expected.w_out_a, rtol=1e-13, atol=1e-15)

    def test_locality(self):
        model = random_model(20, 9, 8, seed=1)
        before = model.copy()
        negs = [2, 5, 6, 11, 17]
        sgd_step_structure(model, 7, 3, negs, 0.1)
        assert np.flatnonzero((model.w_in != before.w_in).any(axis=1)).tolist() == [7]
        changed = np.flatnonzero((model.w_out_s != before.w_out_s).any(axis=0))
        assert changed.tolist() == sorted([3] + negs)
        assert model.w_out_a.tobytes() == before.w_out_a.tobytes()


class TestLearningRate:
    def test_start(self):
        assert lr_schedule(0.025, 0, 1_000_000) == 0.025

    def test_end_is_clamped(self):
        assert lr_schedule(0.025, 1_000_000, 1_000_000, 10_000) == pytest.approx(0.025 * 1e-4)

    def test_staircase(self):
        assert lr_schedule(0.025, 5_000, 1_000_000, 10_000) == 0.025
        assert lr_schedule(0.025, 19_999, 1_000_000, 10_000) == pytest.approx(0.025 * 0.99)

    def test_custom_floor(self):
        assert lr_schedule(1.0, 90, 100, 10, floor=0.5) == 0.5


def two_block(n=40, seed=0, n_attrs=6):
    rng = np.random.default_rng(seed)
    block = np.arange(n) * 2 // n
    edges = [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)
             if rng.random() < (0.3 if block[i] == block[j] else 0.02)]
    attrs = [(i, j, 1.0) for i in range(n) for j in range(n_attrs)
             if (j < n_attrs // 2) == (block[i] == 0)]
    return AttributedGraph.from_edges(n, edges, [f"a{j}" for j in range(n_attrs)], attrs)


SMALL = dict(walk_len=20, walks_per_node=5, window=3, dim=8, lr_update_period=1000)


class TestTrain:
    def test_structure_only_degenerate(self):
        g = two_block().without_attrs()
        trainer = Trainer.prepare(g, TrainConfig(max_iters=5000, **SMALL))
        trainer.run()
        assert trainer.structure_steps == 5000
        assert not trainer.model.w_out_a.any()

    def test_attribute_only_degenerate(self):
        g = two_block()
        g = AttributedGraph.from_edges(g.node_count, [], g.attr_vocab.names,
                                       zip(g.attr_rows(), g.attr_indices, g.attr_values))
        trainer = Trainer.prepare(g, TrainConfig(max_iters=5000, **SMALL))
        trainer.run()
        assert trainer.structure_steps == 0
        assert not trainer.model.w_out_s.any()

    def test_nothing_to_train(self):
        g = AttributedGraph.from_edges(3, [], ["a"], [(0, 0, 0.0)])
        with pytest.raises(ValueError, match="neither"):
            train(g, TrainConfig(max_iters=10, **SMALL))

    def test_deterministic(self):
        g = two_block()
        cfg = TrainConfig(max_iters=20_000, seed=5, **SMALL)
        a, b = train(g, cfg), train(g, cfg)
        assert a.w_in.tobytes() == b.w_in.tobytes()
        assert a.w_out_a.tobytes() == b.w_out_a.tobytes()
        c = train(g, cfg.replace(seed=6))
        assert a.w_in.tobytes() != c.w_in.tobytes()

    def test_split_runs_match_single_run(self):
        g = two_block()
        cfg = TrainConfig(max_iters=6000, seed=2, **SMALL)
        whole = train(g, cfg)
        trainer = Trainer.prepare(g, cfg)
        trainer.run(2000)
        trainer.run(4000)
        assert trainer.model.w_in.tobytes() == whole.w_in.tobytes()

    def test_structure_fraction(self):
        trainer = Trainer.prepare(two_block(), TrainConfig(max_iters=1_000_000, seed=1, **SMALL))
        trainer.run()
        assert abs(trainer.structure_steps / 1_000_000 - 0.5) < 0.002

    @pytest.mark.parametrize("prob,expected", [(0.0, 0), (1.0, 3000)])
    def test_structure_prob_extremes(self, prob, expected):
        trainer = Trainer.prepare(
            two_block(), TrainConfig(max_iters=3000, structure_prob=prob, **SMALL)
        )
        trainer.run()
        assert trainer.structure_steps == expected

    def test_objective_decreases(self):
        g = two_block()
        cfg = TrainConfig(max_iters=100_000, seed=3, lr0=0.05, **SMALL)
        trainer = Trainer.prepare(g, cfg)
        start = exact_objective(trainer.model, trainer.counts, g).total
        seen = []
        trainer.run(callback=lambda t: seen.append(exact_objective(t.model, t.counts, g).total),
                    callback_every=10_000)
        assert len(seen) == 10
        assert seen[-1] < start
        assert trainer.model.is_finite()

    def test_callback_period_must_align(self):
        trainer = Trainer.prepare(two_block(), TrainConfig(max_iters=3000, **SMALL))
        with pytest.raises(ValueError):
            trainer.run(callback=lambda t: None, callback_every=1500)

    def test_hogwild_mode_runs(self):
        g = two_block()
        cfg = TrainConfig(max_iters=20_000, threads=2, deterministic=False, **SMALL)
        trainer = Trainer.prepare(g, cfg)
        trainer.run()
        assert trainer.model.is_finite()
        assert 0 < trainer.structure_steps < 20_000

    def test_threads_require_nondeterministic(self):
        with pytest.raises(ValueError):
            TrainConfig(threads=2)

    @pytest.mark.parametrize("field", ["walk_len", "window", "dim", "negatives", "max_iters"])
    def test_config_validation(self, field):
        with pytest.raises(ValueError):
            TrainConfig(**{field: 0})

    def test_default_hyperparameters(self):
        cfg = TrainConfig()
        assert (cfg.walk_len, cfg.walks_per_node, cfg.window) == (100, 40, 10)
        assert (cfg.negatives, cfg.dim, cfg.lr0) == (5, 256, 0.025)
        assert cfg.lr_update_period == 10_000
        assert cfg.structure_prob == 0.5
        assert cfg.effective_lr_floor == pytest.approx(0.025e-4)


def test_embedding_file_format(tmp_path):
    g = two_block(n=10)
    model = init_model(10, g.attr_count, 4, seed=0)
    path = tmp_path / "emb.txt"
    save_embeddings(model, g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "10 4"
    assert len(lines) == 11
    first = lines[1].split()
    assert first[0] == g.node_vocab.name(0)
    assert all(len(x.split(".")[1]) == 6 for x in first[1:])
    names, emb = load_embeddings(path)
    assert names == list(g.node_vocab.names)
    np.testing.assert_allclose(emb, model.w_in, atol=5e-7)
