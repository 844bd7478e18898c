"""BPR core: gradients vs finite differences, training, ranking, and the
item-side update algebra."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedflex import bpr
from fedflex.bpr import (
    ModelError,
    ModelParameters,
    ModelUpdate,
    TrainConfig,
    apply_update,
    auc,
    bpr_step,
    diff,
    init_model,
    pairwise_loss,
    score,
    score_all,
    top_k,
    train_local,
)
from fedflex.catalog import Item, ItemCatalog
from fedflex.profiles import InteractionEvent, UserProfile


def make_model(n_items=6, dim=4, seed=0, users=("u1",)):
    ids = [f"m{n:02d}" for n in range(1, n_items + 1)]
    return init_model(users, ids, dim, seed)


class TestInitAndShape:
    def test_deterministic(self):
        a, b = make_model(seed=3), make_model(seed=3)
        np.testing.assert_array_equal(a.item_factors, b.item_factors)
        np.testing.assert_array_equal(a.user_factors["u1"], b.user_factors["u1"])

    def test_item_ids_sorted_and_bias_zero(self):
        model = init_model(["u1"], ["m03", "m01", "m02"], 4, 0)
        assert model.item_ids == ["m01", "m02", "m03"]
        np.testing.assert_array_equal(model.item_bias, np.zeros(3))

    def test_rejects_degenerate(self):
        with pytest.raises(ModelError):
            init_model(["u1"], [], 4, 0)
        with pytest.raises(ModelError):
            init_model(["u1"], ["m01"], 0, 0)

    def test_item_vector_round_trip(self):
        model = make_model()
        flat = model.item_vector()
        assert flat.shape == (6 * 5,)
        other = make_model(seed=9)
        other.set_item_vector(flat)
        np.testing.assert_array_equal(other.item_factors, model.item_factors)
        np.testing.assert_array_equal(other.item_bias, model.item_bias)

    def test_item_vector_layout(self):
        """Canonical flattening: per item its dim factors then its bias."""
        model = make_model(n_items=2, dim=3)
        model.item_bias = np.array([10.0, 20.0])
        flat = model.item_vector()
        np.testing.assert_array_equal(flat[0:3], model.item_factors[0])
        assert flat[3] == 10.0
        np.testing.assert_array_equal(flat[4:7], model.item_factors[1])
        assert flat[7] == 20.0

    def test_set_item_vector_rejects_bad_shape(self):
        model = make_model()
        with pytest.raises(ModelError):
            model.set_item_vector(np.zeros(7))


class TestScore:
    def test_score_matches_definition(self):
        model = make_model()
        idx = model.item_index["m02"]
        expected = model.item_bias[idx] + float(
            model.user_factors["u1"] @ model.item_factors[idx]
        )
        assert score(model, "u1", "m02") == pytest.approx(expected)

    def test_score_all_matches_pointwise(self):
        model = make_model()
        scores = score_all(model, "u1")
        for n, iid in enumerate(model.item_ids):
            assert scores[n] == pytest.approx(score(model, "u1", iid))

    def test_unknown_ids(self):
        model = make_model()
        with pytest.raises(ModelError):
            score(model, "ghost", "m01")
        with pytest.raises(ModelError):
            score(model, "u1", "m99")


class TestGradient:
    @staticmethod
    def _touched_coords(pos_idx, neg_idx, dim):
        """(array, index) addresses of every parameter the step updates."""
        coords = [("user", d) for d in range(dim)]
        for idx in (pos_idx, neg_idx):
            coords += [("factor", (idx, d)) for d in range(dim)]
            coords += [("bias", idx)]
        return coords

    @staticmethod
    def _perturbed_loss(model, triple, reg, coord, eps):
        m = model.copy()
        kind, where = coord
        if kind == "user":
            m.user_factors[triple[0]][where] += eps
        elif kind == "factor":
            m.item_factors[where] += eps
        else:
            m.item_bias[where] += eps
        return pairwise_loss(m, triple, reg)

    @staticmethod
    def _read(model, triple, coord):
        kind, where = coord
        if kind == "user":
            return model.user_factors[triple[0]][where]
        if kind == "factor":
            return model.item_factors[where]
        return model.item_bias[where]

    def test_step_is_gradient_descent_on_pairwise_loss(self):
        """Central finite differences of pairwise_loss reproduce the update
        direction of bpr_step for every touched coordinate."""
        h = 1e-5
        rng = np.random.default_rng(42)
        config = TrainConfig(learning_rate=0.1, reg=0.02, epochs=1)
        triple = ("u1", "m01", "m03")
        for trial in range(20):
            model = make_model(n_items=4, dim=4, seed=trial)
            # randomize away from the tiny init so gradients are not trivial
            model.item_factors = rng.normal(0, 0.5, model.item_factors.shape)
            model.item_bias = rng.normal(0, 0.5, model.item_bias.shape)
            model.user_factors["u1"] = rng.normal(0, 0.5, 4)
            stepped = bpr_step(model, triple, config)
            coords = self._touched_coords(
                model.item_index["m01"], model.item_index["m03"], 4
            )
            for coord in coords:
                grad = (
                    self._perturbed_loss(model, triple, config.reg, coord, +h)
                    - self._perturbed_loss(model, triple, config.reg, coord, -h)
                ) / (2 * h)
                analytic = (
                    self._read(model, triple, coord)
                    - self._read(stepped, triple, coord)
                ) / config.learning_rate
                assert analytic == pytest.approx(grad, rel=1e-4, abs=1e-8)

    def test_step_leaves_input_untouched(self):
        model = make_model()
        before = model.item_vector().copy()
        bpr_step(model, ("u1", "m01", "m02"), TrainConfig())
        np.testing.assert_array_equal(model.item_vector(), before)

    def test_step_only_touches_pair(self):
        model = make_model()
        stepped = bpr_step(model, ("u1", "m01", "m02"), TrainConfig())
        for iid in ("m03", "m04", "m05", "m06"):
            idx = model.item_index[iid]
            np.testing.assert_array_equal(
                stepped.item_factors[idx], model.item_factors[idx]
            )


def _catalog_for(model):
    return ItemCatalog(
        [Item(iid, iid, frozenset({"G"})) for iid in model.item_ids]
    )


def _profile_with_clicks(catalog, clicks, user="u1"):
    profile = UserProfile(user, catalog)
    for n, iid in enumerate(clicks):
        profile.record_event(
            InteractionEvent(ts=n + 1, type="click", item_id=iid, slate_id="s1")
        )
    return profile


class TestTrainLocal:
    def test_cold_profile_untrained(self, small_catalog):
        model = make_model()
        profile = UserProfile("u1", small_catalog)
        out, trained = train_local(model, profile, small_catalog, TrainConfig())
        assert not trained
        np.testing.assert_array_equal(out.item_vector(), model.item_vector())

    def test_deterministic_for_seed(self):
        model = make_model(n_items=20)
        catalog = _catalog_for(model)
        profile = _profile_with_clicks(catalog, ["m01", "m05", "m09"])
        config = TrainConfig(seed=11, epochs=5)
        a, _ = train_local(model, profile, catalog, config)
        b, _ = train_local(model, profile, catalog, config)
        np.testing.assert_array_equal(a.item_vector(), b.item_vector())
        np.testing.assert_array_equal(a.user_factors["u1"], b.user_factors["u1"])

    def test_positives_rise_above_negatives(self):
        model = make_model(n_items=20, dim=8)
        catalog = _catalog_for(model)
        positives = ["m01", "m02", "m03"]
        profile = _profile_with_clicks(catalog, positives)
        trained, ok = train_local(
            model, profile, catalog, TrainConfig(epochs=50, seed=1)
        )
        assert ok
        pos_scores = [score(trained, "u1", p) for p in positives]
        neg_scores = [
            score(trained, "u1", i)
            for i in trained.item_ids
            if i not in positives
        ]
        assert min(pos_scores) > float(np.mean(neg_scores))

    def test_jit_matches_pure_python(self):
        """The accelerated kernel and the reference loop produce identical
        trajectories."""
        model = make_model(n_items=15, dim=4)
        catalog = _catalog_for(model)
        profile = _profile_with_clicks(catalog, ["m02", "m07"])
        config = TrainConfig(seed=3, epochs=4)

        fast, _ = train_local(model, profile, catalog, config)

        import fedflex.bpr as mod

        original = mod._STEP_RUNNER
        mod._STEP_RUNNER = mod._run_steps
        try:
            slow, _ = train_local(model, profile, catalog, config)
        finally:
            mod._STEP_RUNNER = original
        np.testing.assert_allclose(
            fast.item_vector(), slow.item_vector(), rtol=0, atol=1e-12
        )


class TestAuc:
    def test_perfect_and_inverted(self):
        model = make_model()
        model.item_bias = np.array([5.0, 4.0, 3.0, 2.0, 1.0, 0.0])
        model.user_factors["u1"] = np.zeros(4)
        assert auc(model, [("u1", "m01", ["m05", "m06"])]) == 1.0
        assert auc(model, [("u1", "m06", ["m01"])]) == 0.0

    def test_ties_count_half(self):
        model = make_model()
        model.item_bias = np.zeros(6)
        model.item_factors = np.zeros_like(model.item_factors)
        assert auc(model, [("u1", "m01", ["m02"])]) == 0.5

    def test_matches_counting_oracle(self, rng):
        model = make_model(n_items=12, dim=4, seed=5)
        model.item_bias = rng.normal(size=12)
        heldout = []
        for _ in range(30):
            ids = list(rng.choice(model.item_ids, size=4, replace=False))
            heldout.append(("u1", ids[0], ids[1:]))
        # independent tally
        wins = total = 0
        for user, pos, negs in heldout:
            sp = score(model, user, pos)
            for neg in negs:
                sn = score(model, user, neg)
                wins += (sp > sn) + 0.5 * (sp == sn)
                total += 1
        assert auc(model, heldout) == pytest.approx(wins / total)

    def test_empty_rejected(self):
        with pytest.raises(ModelError):
            auc(make_model(), [])


class TestTopK:
    def test_matches_full_sort_oracle(self, rng):
        model = make_model(n_items=30, dim=4, seed=2)
        catalog = _catalog_for(model)
        model.item_bias = rng.normal(size=30)
        ranked = sorted(
            model.item_ids, key=lambda i: (-score(model, "u1", i), i)
        )
        for k in (1, 5, 30, 50):
            assert top_k(model, "u1", catalog, k) == ranked[:k]

    def test_ties_break_ascending_id(self):
        model = make_model()
        catalog = _catalog_for(model)
        model.item_factors = np.zeros_like(model.item_factors)
        model.item_bias = np.zeros(6)
        assert top_k(model, "u1", catalog, 3) == ["m01", "m02", "m03"]

    def test_excluded_disjoint(self):
        model = make_model()
        catalog = _catalog_for(model)
        out = top_k(model, "u1", catalog, 10, excluded={"m01", "m04"})
        assert set(out) & {"m01", "m04"} == set()
        assert len(out) == 4

    def test_all_excluded_empty(self):
        model = make_model()
        catalog = _catalog_for(model)
        assert top_k(model, "u1", catalog, 3, excluded=set(model.item_ids)) == []

    @given(k=st.integers(1, 10), seed=st.integers(0, 50))
    @settings(max_examples=50, deadline=None)
    def test_sorted_unique_property(self, k, seed):
        model = make_model(n_items=10, dim=3, seed=seed)
        catalog = _catalog_for(model)
        out = top_k(model, "u1", catalog, k)
        assert len(out) == len(set(out)) == min(k, 10)
        scores = [score(model, "u1", i) for i in out]
        assert scores == sorted(scores, reverse=True)


class TestUpdateAlgebra:
    def test_diff_apply_round_trip(self):
        old = make_model(seed=1)
        new = make_model(seed=2)
        new.user_factors = {u: f.copy() for u, f in old.user_factors.items()}
        update = diff(old, new)
        restored = apply_update(old, update)
        np.testing.assert_allclose(
            restored.item_vector(), new.item_vector(), atol=1e-15
        )

    def test_update_carries_no_user_factors(self):
        old = make_model(seed=1)
        new = make_model(seed=2)
        update = diff(old, new)
        assert update.key_manifest == old.item_ids
        assert update.vector.shape == (6 * 5,)
        # perturbing user factors does not change the delta
        new.user_factors["u1"] = new.user_factors["u1"] + 100.0
        np.testing.assert_array_equal(diff(old, new).vector, update.vector)

    def test_apply_preserves_user_factors(self):
        old = make_model(seed=1)
        update = diff(old, make_model(seed=2))
        out = apply_update(old, update)
        np.testing.assert_array_equal(out.user_factors["u1"], old.user_factors["u1"])

    def test_shape_mismatch_rejected(self):
        old = make_model()
        with pytest.raises(ModelError):
            diff(old, make_model(n_items=5))
        with pytest.raises(ModelError):
            ModelUpdate(dim=4, key_manifest=["m01"], vector=np.zeros(3))
