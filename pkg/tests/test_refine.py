import numpy as np
import pytest
from conftest import (
    LoggingBackend,
    ScriptedBackend,
    enumerate_best,
    single_block_best,
    two_class_linear,
)

from saliency_attacks.attacks import AttackConfig, saliency_attack
from saliency_attacks.backend import LinearBackend, QueryLedger, cw_loss, is_adversarial, predict


def _half(side=4):
    x = np.full((side, side, 1), 0.5, dtype=np.float32)
    return x


def test_already_misclassified_short_circuits():
    x = _half()
    be = two_class_linear(np.zeros((4, 4)), clean_margin=-0.5, x_clean=x)
    out = saliency_attack(x, 0, np.ones((4, 4), bool), be, AttackConfig(budget=50, k_int=4))
    assert out.success and out.queries == 1
    assert out.prior_misclassified
    assert not out.state.support.any()
    assert np.array_equal(out.adversarial, x)


def test_empty_mask_fails_after_one_probe():
    x = _half()
    be = two_class_linear(np.zeros((4, 4)), clean_margin=0.5, x_clean=x)
    out = saliency_attack(x, 0, np.zeros((4, 4), bool), be, AttackConfig(budget=50, k_int=4))
    assert not out.success and out.queries == 1
    assert not out.state.support.any()


def test_geometry_preconditions():
    be = two_class_linear(np.zeros((4, 4)), 0.5, _half())
    with pytest.raises(ValueError):
        saliency_attack(np.zeros((4, 6, 1), np.float32), 0, np.ones((4, 6), bool), be, AttackConfig(budget=5))
    with pytest.raises(ValueError):
        saliency_attack(_half(), 0, np.ones((4, 4), bool), be, AttackConfig(budget=5, k_int=8))
    with pytest.raises(ValueError):
        AttackConfig(budget=0)
    with pytest.raises(ValueError):
        AttackConfig(k_int=12)


def test_level_one_tie_prefers_positive():
    # one live child; equal margins for + and -; sign must end up +1
    margins = [1.0, 0.4, 0.4]
    be = ScriptedBackend(margins + [0.35, 0.45, 0.45, 0.45])
    x = _half(2)
    mask = np.ones((2, 2), bool)
    out = saliency_attack(x, 0, mask, be, AttackConfig(budget=100, k_int=2))
    # first acceptance was the all-plus assignment before deeper flips
    assert out.trace[1][1] == pytest.approx(-0.4)
    assert (out.state.signs != 0).all()
    # plus was kept on the tie: only the level-2 flip at (0,0) went negative
    assert out.state.signs[1, 1] == 1


def test_stale_best_comparison_prunes_second_block():
    # 4x4, k_int=2: children A=(0,0) B=(0,2) live, C D fully out of mask.
    # Recorded F_B = -0.5 loses to the post-recursion f_hat = -0.1, so B is
    # never descended into; the whole run costs exactly 9 queries.
    margins = [
        1.0,  # clean probe
        0.3, 0.8,  # A+, A-  -> F_A = -0.3 (plus kept)
        0.5, 0.9,  # B+, B-  -> F_B = -0.5
        0.1, 0.4, 0.45, 0.5,  # pixel flips inside A; first is the best
    ]
    be = ScriptedBackend(margins)
    x = _half()
    mask = np.zeros((4, 4), bool)
    mask[0:2, 0:4] = True  # A and B only
    out = saliency_attack(x, 0, mask, be, AttackConfig(budget=1000, k_int=2))
    assert be.calls == 9
    assert not out.success
    assert out.queries == 9
    assert out.best_f == pytest.approx(-0.1)
    # A was assigned wholly +, then its (0,0) pixel flip was accepted
    expect = np.zeros((4, 4), dtype=np.int8)
    expect[0:2, 0:2] = 1
    expect[0, 0] = -1
    assert np.array_equal(out.state.signs, expect)


def test_out_of_mask_children_never_queried():
    margins = [1.0, 0.3, 0.8, 0.2, 0.6, 0.7, 0.9]  # More than needed
    be = ScriptedBackend(margins)
    x = _half()
    mask = np.zeros((4, 4), bool)
    mask[0:2, 0:2] = True  # only child A intersects
    out = saliency_attack(x, 0, mask, be, AttackConfig(budget=1000, k_int=2))
    # probe + A+/- + 4 pixel flips of A = 7; B/C/D contribute nothing
    assert be.calls == 7
    assert out.state.support.sum() == 4
    assert out.state.support[:2, :2].all()


def test_level3_refinement_isolates_decisive_pixel():
    # Margin structure (closed form, gap = w.x + b, F = -max(gap, 0)):
    #   w[1,1] = +1.0, every other pixel -0.1, clean gap m = 2.0 * eps.
    # Level 1 accepts all-plus (gap m - 0.5eps), level 2 flips the quadrant
    # holding (1,1) (gap m - 1.9eps), and the first level-3 flip inside it
    # restores pixel (0,0) to +, crossing zero: success at query 8 with
    # (1,1) kept at -eps as the decisive pixel.
    eps = 0.05
    w = np.full((4, 4), -0.1)
    w[1, 1] = 1.0
    x = _half()
    m = 2.0 * eps
    inner = two_class_linear(w, clean_margin=m, x_clean=x)
    be = LoggingBackend(inner)
    out = saliency_attack(x, 0, np.ones((4, 4), bool), be, AttackConfig(epsilon=eps, budget=1000, k_int=4))

    assert out.success
    assert out.queries == 8
    signs = out.state.signs
    assert signs[1, 1] == -1  # the decisive pixel keeps its helpful sign
    assert signs[0, 0] == 1  # the level-3 flip that crossed the margin
    assert signs[0, 1] == -1 and signs[1, 0] == -1  # rest of the quadrant
    assert np.all(signs[2:, :] == 1) and np.all(signs[:2, 2:] == 1)

    # trajectory confirmed against the closed form, query by query
    expected_gaps = [
        m,  # clean
        m - 0.5 * eps,  # all plus
        m + 0.5 * eps,  # all minus
        m - 1.9 * eps,  # flip quadrant containing (1,1)
        m - 0.5 * eps + 0.8 * eps,  # flip TR
        m - 0.5 * eps + 0.8 * eps,  # flip BL
        m - 0.5 * eps + 0.8 * eps,  # flip BR
        m - 2.1 * eps,  # level-3 flip of (0,0): crosses zero
    ]
    got_gaps = [z[0] - z[1] for z in be.log]
    assert got_gaps == pytest.approx(expected_gaps, abs=1e-6)

    # returned adversarial image really fools the model when re-queried
    z = predict(inner, QueryLedger(1), out.adversarial)
    assert is_adversarial(z, 0)


def test_refine_bounded_by_enumeration_oracle():
    rng = np.random.default_rng(11)
    x = _half()
    for trial in range(5):
        w = rng.normal(0, 0.6, size=(4, 4))
        mask = rng.random((4, 4)) < 0.6
        if mask.sum() == 0 or mask.sum() > 12:
            continue
        be = two_class_linear(w, clean_margin=float(rng.uniform(0.02, 0.3)), x_clean=x)
        f_star, _ = enumerate_best(be, x, mask, 0.05)
        out = saliency_attack(x, 0, mask, be, AttackConfig(budget=4000, k_int=4))
        assert out.best_f <= f_star + 1e-12


def test_level_one_attains_best_single_block():
    rng = np.random.default_rng(23)
    x = _half()
    w = rng.normal(0, 0.5, size=(4, 4))
    mask = np.ones((4, 4), bool)
    be = two_class_linear(w, clean_margin=5.0, x_clean=x)  # far from flipping
    log = LoggingBackend(be)
    out = saliency_attack(x, 0, mask, log, AttackConfig(budget=4000, k_int=2))
    # level-1 scan is queries 2..9: four children, two signs each
    scan_f = [cw_loss(z, 0) for z in log.log[1:9]]
    best_single, _ = single_block_best(be, x, mask, 0.05, 2)
    assert max(scan_f) == pytest.approx(best_single, abs=1e-12)
    assert out.best_f >= best_single - 1e-12


def test_budget_grid_exact_accounting():
    x = _half()
    rng = np.random.default_rng(5)
    w = rng.normal(0, 0.3, size=(4, 4))
    for budget in (1, 3, 10, 100):
        inner = two_class_linear(w, clean_margin=4.0, x_clean=x)
        log = LoggingBackend(inner)
        out = saliency_attack(x, 0, np.ones((4, 4), bool), log, AttackConfig(budget=budget, k_int=4))
        assert out.queries == len(log.log)
        assert out.queries <= budget
        assert not out.success


def test_trace_non_decreasing_and_counts():
    x = _half(8)
    rng = np.random.default_rng(6)
    w = rng.normal(0, 0.4, size=(8, 8))
    be = two_class_linear(w, clean_margin=1.0, x_clean=x)
    out = saliency_attack(x, 0, np.ones((8, 8), bool), be, AttackConfig(budget=300, k_int=4))
    best = [b for _, b, _ in out.trace]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
    assert [q for q, _, _ in out.trace] == list(range(1, out.queries + 1))


def test_support_stays_inside_mask_throughout():
    x = _half(8)
    rng = np.random.default_rng(7)
    w = rng.normal(0, 0.4, size=(8, 8))
    mask = rng.random((8, 8)) < 0.4
    inner = two_class_linear(w, clean_margin=1.0, x_clean=x)
    log = LoggingBackend(inner, keep_images=True)
    out = saliency_attack(x, 0, mask, log, AttackConfig(budget=200, k_int=4))
    assert np.all(out.state.support <= mask)
    for img in log.images:
        delta = np.abs(np.asarray(img) - x).max(axis=2)
        assert np.all((delta > 1e-9) <= mask)
