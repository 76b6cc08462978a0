import random

import pytest

from segworker import config as cfg
from segworker.data import generate_toy_dataset


def sample_configs(seed: int, n: int) -> list[dict]:
    """Uniform draws over the grids as config JSON payloads (branch first)."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        d = {"lora_enabled": rng.random() < 0.5}
        if d["lora_enabled"]:
            d["lora_rank"] = rng.choice(cfg.LORA_RANKS)
            d["lora_dropout"] = rng.choice(cfg.LORA_DROPOUTS)
        d["weight_decay"] = rng.choice(cfg.WEIGHT_DECAYS)
        d["learning_rate"] = rng.choice(cfg.LEARNING_RATES)
        d["aug_hflip"] = rng.random() < 0.5
        d["aug_vflip"] = rng.random() < 0.5
        d["aug_rotate"] = rng.random() < 0.5
        scheduler = rng.choice(tuple(cfg.SCHEDULER_PARAM_GRIDS))
        d["scheduler"] = scheduler
        d["scheduler_params"] = {name: rng.choice(grid) for name, grid
                                 in cfg.SCHEDULER_PARAM_GRIDS[scheduler].items()}
        out.append(d)
    return out


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """The bundled 20-image toy dataset, materialized deterministically."""
    path = tmp_path_factory.mktemp("toy") / "toy20"
    generate_toy_dataset(path, n_images=20, size=64, seed=0)
    return str(path)
