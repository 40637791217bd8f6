"""Shared fixtures.

Trained models are expensive on one core, so they are built once per session
and cached on disk under .cache/test_models keyed by their recipe; set
MEAF_TEST_CACHE=0 to force retraining (CI / release verification).
"""

import hashlib
import os
import pathlib
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("desk", max_examples=25, deadline=None)
settings.load_profile("desk")

CACHE_DIR = pathlib.Path(__file__).resolve().parent.parent / ".cache" / "test_models"
CACHE_ON = os.environ.get("MEAF_TEST_CACHE", "1") not in ("0", "false")


def cached_model(key: str, builder):
    """Load a checkpoint cached under `key`, or build + save it."""
    from meaformer.model import load_checkpoint, save_checkpoint

    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    path = CACHE_DIR / f"{digest}.meaf"
    if CACHE_ON and path.exists():
        model, _ = load_checkpoint(str(path))
        return model
    model = builder()
    if CACHE_ON:
        CACHE_DIR.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, str(path))
    return model


@pytest.fixture(scope="session")
def phantom_bank():
    from meaformer.data import generate_phantom
    return [generate_phantom(s) for s in range(128)]


@pytest.fixture(scope="session")
def held_out_phantoms():
    from meaformer.data import generate_phantom
    return [generate_phantom(5000 + s) for s in range(50)]


@pytest.fixture(scope="session")
def trained_step1(phantom_bank):
    from meaformer.pipeline import TrainConfig, train

    def build():
        model, _ = train("step1", phantom_bank,
                         TrainConfig(steps=2000, batch_size=8, val_every=0, seed=11))
        return model

    return cached_model("step1|bank128|steps2000|seed11|v1", build)


@pytest.fixture(scope="session")
def trained_step2(phantom_bank):
    from meaformer.pipeline import TrainConfig, train

    def build():
        model, _ = train("step2", phantom_bank,
                         TrainConfig(steps=1200, batch_size=8, val_every=0, seed=12))
        return model

    return cached_model("step2|bank128|steps1200|seed12|v1", build)


@pytest.fixture(scope="session")
def tiny_rng():
    return np.random.default_rng(1234)
