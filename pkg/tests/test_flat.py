import pytest

from hdc.errors import ScorerFailure
from hdc.flat import FlatConfig, classify_flat
from hdc.metrics import CountingScorer
from hdc.tree import remove_class

from conftest import image_of, make_synthetic


def test_call_count_is_leaves_times_m(mini_tree):
    scorer = CountingScorer(make_synthetic(mini_tree))
    result = classify_flat(mini_tree, image_of("dog"), scorer, FlatConfig(m_final=2))
    assert scorer.calls == 4 * 2
    assert result.metrics.eps_calls_final == 8
    assert result.metrics.eps_calls_prune == 0
    assert result.metrics.eps_calls_total == 8
    assert result.metrics.surviving_leaves == 4


def test_call_count_large(tree27):
    scorer = CountingScorer(make_synthetic(tree27))
    result = classify_flat(tree27, image_of("n.1.1.1"), scorer, FlatConfig(m_final=16))
    assert scorer.calls == 27 * 16
    assert result.metrics.eps_calls_total == 432


def test_noiseless_predicts_true_class(tree27):
    scorer = make_synthetic(tree27)
    for label in tree27.leaf_labels():
        result = classify_flat(tree27, image_of(label), scorer, FlatConfig(m_final=4))
        assert result.prediction == label


def test_rerun_is_bit_identical(tree27):
    config = FlatConfig(m_final=8, sample_seed=3)
    img = image_of("n.2.0.1")
    a = classify_flat(tree27, img, make_synthetic(tree27, noise_sigma=0.4), config)
    b = classify_flat(tree27, img, make_synthetic(tree27, noise_sigma=0.4), config)
    assert a.prediction == b.prediction
    assert a.mean_errors == b.mean_errors
    assert a.posterior.entries == b.posterior.entries


def test_removing_non_predicted_leaf_keeps_prediction(tree27):
    config = FlatConfig(m_final=4, sample_seed=1)
    img = image_of("n.0.1.2")
    scorer = make_synthetic(tree27, noise_sigma=0.3)
    before = classify_flat(tree27, img, scorer, config)
    loser = [l for l in tree27.leaf_labels() if l != before.prediction][0]
    smaller = remove_class(tree27, loser)
    after = classify_flat(smaller, img, make_synthetic(smaller, noise_sigma=0.3), config)
    # scorer noise keys on (image, label, t, noise), so the shared leaves
    # score identically and the argmin cannot move
    assert after.prediction == before.prediction


def test_posterior_and_ranking_consistent(tree27):
    result = classify_flat(
        tree27, image_of("n.1.2.0"), make_synthetic(tree27, noise_sigma=0.2),
        FlatConfig(m_final=4),
    )
    assert result.ranking()[0] == result.prediction
    assert result.posterior.top_label() == result.prediction
    assert len(result.ranking()) == 27


def test_scorer_failure_carries_context(mini_tree):
    class Broken:
        def score(self, request):
            raise RuntimeError("backend down")

    with pytest.raises(ScorerFailure) as err:
        classify_flat(mini_tree, image_of("dog"), Broken(), FlatConfig(m_final=1))
    assert err.value.image_id == "dog#0"
    assert err.value.label == "cat"  # first in sorted label order


def test_flat_config_validation():
    with pytest.raises(ValueError):
        FlatConfig(m_final=0)


def test_call_count_eight_leaf_tree():
    from hdc.tree import tree_from_nested
    from conftest import image_of as img

    tree = tree_from_nested(
        {"r": {"g1": {"a": None, "b": None, "c": None, "d": None},
               "g2": {"e": None, "f": None, "g": None, "h": None}}}
    )
    scorer = CountingScorer(make_synthetic(tree))
    classify_flat(tree, img("a"), scorer, FlatConfig(m_final=2))
    assert scorer.calls == 16
