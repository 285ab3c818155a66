import pytest

from langanim.config import ConfigError, TrainConfig, from_dict, parse_config, serialize_config
from langanim.losses import LossWeights


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    cfg = parse_config(path)
    assert cfg == TrainConfig()
    assert (cfg.batch_size, cfg.T, cfg.iterations) == (4, 16, 2000)
    assert (cfg.lr_encoders, cfg.lr_mappers, cfg.lr_recurrent) == (1e-5, 1e-3, 1e-3)
    assert cfg.adam_betas == (0.0, 0.999)
    w = cfg.loss
    assert (w.w_reg, w.path_reg, w.cont, w.lpips, w.tau) == (1.0, 1.0, 0.5, 1.0, 0.07)
    assert cfg.backend.vocabulary_size == 8


def test_no_file_gives_defaults():
    assert parse_config(None) == TrainConfig()


def test_batch_size_zero_names_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[train]\nbatch_size = 0\n")
    with pytest.raises(ConfigError, match=r"train\.batch_size"):
        parse_config(path)


@pytest.mark.parametrize("data, key", [
    ({"train": {"batchsize": 4}}, "train.batchsize"),
    ({"loss": {"contrast": 1}}, "loss.contrast"),
    ({"optim": {}}, "optim"),
])
def test_unknown_keys_rejected(data, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        from_dict(data)


@pytest.mark.parametrize("data, key", [
    ({"train": {"iterations": "many"}}, "train.iterations"),
    ({"train": {"T": 2.5}}, "train.T"),
    ({"model": {"mapper_grouped": "perhaps"}}, "model.mapper_grouped"),
    ({"train": {"mode": "video"}}, "train.mode"),
    ({"loss": {"cont": -1}}, "loss"),
    ({"train": {"batch_size": 9}}, "backend.vocabulary_size"),
])
def test_type_and_bound_errors_carry_key_path(data, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        from_dict(data)


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[train]\niterations = 10\nseed = 3\n[loss]\ncont = 0.25\n")
    cfg = parse_config(path, {"train": {"iterations": "20"}})
    assert (cfg.iterations, cfg.seed, cfg.loss.cont) == (20, 3, 0.25)


@pytest.mark.parametrize("cfg", [
    TrainConfig(),
    TrainConfig(batch_size=2, T=5, seed=11, mode="real_image", objective="pairwise",
                loss=LossWeights(path_reg=0.0, tau=0.1)),
    TrainConfig(lr_mappers=3.3e-4, symmetric_contrastive=True),
])
def test_round_trip(tmp_path, cfg):
    path = tmp_path / "rt.ini"
    path.write_text(serialize_config(cfg))
    again = parse_config(path)
    assert again == cfg
    assert again.hash() == cfg.hash()


def test_hash_changes_with_any_field():
    assert TrainConfig().hash() != TrainConfig(seed=1).hash()
    assert TrainConfig().hash() != TrainConfig(loss=LossWeights(cont=0.4)).hash()
