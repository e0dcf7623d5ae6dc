import numpy as np

import grnnlab as g
from grnnlab.adamw import AdamwState
from grnnlab.checkpoint import load_checkpoint, save_checkpoint

from helpers import params_equal


def test_model_and_optimizer_roundtrip(tmp_path):
    cfg = g.SyntheticConfig(memory=1, num_nodes=6, edges_per_epoch=12)
    events = g.generate_epoch(cfg, g.Rng(2).substream("data"))
    model = g.init_model(g.Rng(2).substream("init"), 3, 1, "regression")
    opt = AdamwState(lr=2e-3, weight_decay=1e-4)
    g.train_epoch(events, model, opt, "f_bptt",
                  g.BatchingConfig("sequential", None), num_nodes=6)

    rng = g.Rng(7)
    rng.standard_normal()
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, model, opt, rng_states={"data": rng.get_state()})

    loaded_model, loaded_opt, rng_states = load_checkpoint(path)
    assert params_equal(model.named_params(), loaded_model.named_params())
    assert loaded_model.task == "regression" and loaded_model.m == 3
    assert loaded_opt.step_count == opt.step_count
    assert all(np.array_equal(loaded_opt.m[k], opt.m[k]) for k in opt.m)
    restored = g.Rng(0)
    restored.set_state(rng_states["data"])
    assert restored.standard_normal() == rng.standard_normal()

    # resuming training from the checkpoint matches the original trajectory
    events2 = g.generate_epoch(cfg, g.Rng(3).substream("data"))
    a = g.train_epoch(events2, model, opt, "f_bptt",
                      g.BatchingConfig("sequential", None), num_nodes=6)
    b = g.train_epoch(events2, loaded_model, loaded_opt, "f_bptt",
                      g.BatchingConfig("sequential", None), num_nodes=6)
    assert a["mean_loss"] == b["mean_loss"]
    assert params_equal(model.named_params(), loaded_model.named_params())


def test_asymmetric_model_roundtrip(tmp_path):
    model = g.init_model(g.Rng(4), 3, 2, "link_ranking", symmetric=False)
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, model)
    loaded, opt, rng_states = load_checkpoint(path)
    assert opt is None and rng_states is None
    assert not loaded.symmetric
    assert params_equal(model.named_params(), loaded.named_params())


def test_version_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 42}')
    import pytest

    with pytest.raises(g.DataError):
        load_checkpoint(str(path))
