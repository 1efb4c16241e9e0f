import math

import pytest

from geonet.config import ConfigError, TrainConfig, dump_config, load_config, parse_config
from geonet.neural.model import SIX_LAYER_ARCH


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.input_size) == (32, 16, 0.01, 256)
    assert cfg.augment.crop_fraction == 0.7 and cfg.tile_grid == (8, 8)
    assert cfg.preprocess == (8, 8, 2.0, 0.7)


def test_parse_with_comments():
    cfg = parse_config("""
    # desk-scale run
    input_size = 64   # small
    seed=3
    extra_conv = yes
    clahe_mode = none
    """)
    assert cfg.input_size == 64 and cfg.seed == 3
    assert cfg.architecture == SIX_LAYER_ARCH
    assert cfg.preprocess[:2] == (0, 0)


@pytest.mark.parametrize("text,key", [
    ("epochs = 0", "epochs"),
    ("batch_size = 1", "batch_size"),
    ("learning_rate = -1", "learning_rate"),
    ("learning_rate = abc", "learning_rate"),
    ("bogus = 1", "bogus"),
    ("clahe_mode = later", "clahe_mode"),
    ("extra_conv = maybe", "extra_conv"),
    ("arch = conv:8", "arch"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.key == key


def test_line_without_equals():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("seed = 1\nepochs 3\n")


def test_dump_round_trip(tmp_path):
    cfg = TrainConfig(input_size=64, seed=9, clahe_clip_limit=math.inf)
    p = tmp_path / "c.cfg"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


def test_relative_data_dir(tmp_path):
    (tmp_path / "sub").mkdir()
    p = tmp_path / "sub" / "c.cfg"
    p.write_text("data_dir = ../slices\n")
    assert load_config(p).data_dir == str((tmp_path / "slices").resolve())
