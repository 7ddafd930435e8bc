import numpy as np
import pytest

from resicomp.context_modes import make_mode
from resicomp.density import SIGMA_FLOOR
from resicomp.partition import build_plan
from resicomp.predictor import (DEFAULT_LOGITS, DEFAULT_WINDOW, MODEL_MAGIC,
                                PriorModel, SynchronizationError,
                                collect_context, conceal, default_prior,
                                fit_prior, load_prior, predict, save_prior)
from resicomp.token_codec import CodecConfig, TokenGrid, analyze


def _grid(values, known):
    return TokenGrid(np.asarray(values, np.int16), np.asarray(known, bool))


def _full_grid(h, w, c, fill=0):
    return _grid(np.full((h, w, c), fill), np.ones((h, w)))


def test_collect_context_isc_never_errors():
    mode = make_mode("ISC", 4)
    plan = build_plan(2, 2, 4, mode, seed=0)
    grid = _full_grid(2, 2, 8, fill=5)
    ctx = collect_context(1, mode, [0, 0, 0, 0], plan, grid)
    assert not ctx.known.any()


def test_collect_context_lc_fills_earlier_slices():
    mode = make_mode("LC", 4)
    plan = build_plan(2, 2, 4, mode, seed=0)
    grid = _full_grid(2, 2, 8, fill=5)
    ctx = collect_context(3, mode, [1, 1, 1, 1], plan, grid)
    filled = {tuple(p) for p in np.argwhere(ctx.known)}
    expected = set(plan.slice_positions(1)) | set(plan.slice_positions(2))
    assert filled == expected
    assert np.all(ctx.values[ctx.known] == 5)


def test_collect_context_missing_slice_raises():
    mode = make_mode("LC", 4)
    plan = build_plan(2, 2, 4, mode, seed=0)
    grid = _full_grid(2, 2, 8)
    with pytest.raises(SynchronizationError) as exc:
        collect_context(3, mode, [1, 0, 1, 1], plan, grid)
    assert exc.value.slice_index == 3
    assert exc.value.missing_context == 2


def test_constant_neighborhood_predicts_constant():
    known = np.ones((5, 5), bool)
    known[2, 2] = False
    values = np.full((5, 5, 4), 17, np.int16)
    values[2, 2] = 0
    out = predict(_grid(values, known), default_prior(4))
    assert np.all(out.values[2, 2] == 17)


def test_all_mask_grid_falls_back_to_prior():
    prior = default_prior(4)
    grid = _grid(np.zeros((3, 4, 4)), np.zeros((3, 4)))
    out = predict(grid, prior)
    # position independent and equal to the prior
    assert np.all(out.means == out.means[0, 0])
    assert np.allclose(out.means[0, 0, :, 1], prior.means)
    assert np.allclose(out.sigmas[0, 0, :, 1], prior.stds)
    assert np.all(out.values == np.rint(prior.means).astype(np.int16))


def test_half_mask_beats_prior_fill(smooth_image):
    cfg = CodecConfig()
    full = analyze(smooth_image, cfg)
    mask = (np.indices(full.known.shape).sum(axis=0) % 2).astype(bool)
    masked = TokenGrid(np.where(mask[:, :, None], 0, full.values),
                       ~mask)
    prior = default_prior(cfg.channels)
    out = predict(masked, prior)
    err_pred = np.abs(out.values[mask].astype(float)
                      - full.values[mask].astype(float)).mean()
    prior_fill = np.rint(prior.means).astype(np.int16)
    err_prior = np.abs(prior_fill[None, :]
                       - full.values[mask].astype(float)).mean()
    assert err_pred < err_prior


def test_conceal_pass_through_and_fill():
    known = np.zeros((2, 2), bool)
    known[0, 0] = True
    values = np.zeros((2, 2, 3), np.int16)
    values[0, 0] = (9, -9, 4)
    grid = _grid(values, known)
    out = predict(grid, default_prior(3))
    full = conceal(grid, out)
    assert full.known.all()
    assert tuple(full.values[0, 0]) == (9, -9, 4)
    assert np.array_equal(full.values[~known], out.values[~known])


def test_conceal_identity_when_nothing_masked():
    grid = _full_grid(2, 2, 3, fill=7)
    out = predict(grid, default_prior(3))
    assert np.array_equal(conceal(grid, out).values, grid.values)


def test_conceal_everything_masked_uses_predictions():
    grid = _grid(np.zeros((2, 2, 3)), np.zeros((2, 2)))
    out = predict(grid, default_prior(3))
    assert np.array_equal(conceal(grid, out).values, out.values)


def test_predict_is_local():
    # A known token farther than the window cannot change the output.
    h = w = 30
    known = np.zeros((h, w), bool)
    known[0, 0] = True
    values = np.zeros((h, w, 2), np.int16)
    values[0, 0] = 50
    prior = default_prior(2)
    base = predict(_grid(values, known), prior)
    far = values.copy()
    far_known = known.copy()
    far_known[29, 29] = True
    far[29, 29] = -50
    changed = predict(_grid(far, far_known), prior)
    radius = DEFAULT_WINDOW // 2
    region = np.s_[: radius + 1, : radius + 1]
    assert np.array_equal(base.values[region], changed.values[region])
    assert np.allclose(base.means[region], changed.means[region])


def test_heads_are_consistent():
    rng = np.random.default_rng(3)
    values = rng.integers(-20, 20, size=(6, 6, 4)).astype(np.int16)
    known = rng.random((6, 6)) < 0.5
    out = predict(_grid(values, known), default_prior(4))
    assert np.array_equal(out.values,
                          np.rint(out.means[:, :, :, 0]).astype(np.int16))


def test_mixture_weights_softmax():
    known = np.ones((3, 3), bool)
    known[1, 1] = False
    out = predict(_grid(np.zeros((3, 3, 2)), known), default_prior(2))
    logits = np.array(DEFAULT_LOGITS)
    expected = np.exp(logits) / np.exp(logits).sum()
    assert np.allclose(out.weights[1, 1, 0], expected)


def test_fit_prior_floors_std():
    grids = [_full_grid(2, 2, 3, fill=4)]
    prior = fit_prior(grids)
    assert np.all(prior.stds >= SIGMA_FLOOR)
    assert np.allclose(prior.means, 4.0)


def test_model_file_roundtrip(tmp_path):
    prior = PriorModel(means=np.arange(5, dtype=float),
                       stds=np.linspace(1.0, 3.0, 5),
                       window=9, logits=(2.0, 1.0, 0.0))
    path = tmp_path / "model.rcpm"
    save_prior(path, prior)
    assert path.read_bytes()[:4] == MODEL_MAGIC
    loaded = load_prior(path)
    assert np.array_equal(loaded.means, prior.means)
    assert np.array_equal(loaded.stds, prior.stds)
    assert loaded.window == 9
    assert loaded.logits == (2.0, 1.0, 0.0)


def test_model_file_bad_magic(tmp_path):
    path = tmp_path / "bogus.rcpm"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError):
        load_prior(path)


def test_prior_validation():
    with pytest.raises(ValueError):
        PriorModel(means=np.zeros(3), stds=np.full(3, 0.01))
    with pytest.raises(ValueError):
        PriorModel(means=np.zeros(3), stds=np.ones(3), window=4)
    with pytest.raises(ValueError):
        PriorModel(means=np.zeros(3), stds=np.ones(3), logits=(1.0,))
