from __future__ import annotations

from pathlib import Path

import pytest

from lessonforge import Gateway, LearnerProfile, PipelineConfig, ProviderConfig, ingest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

TINY_TEXT = """# Water in Motion

Rivers carry water downhill from the mountains to the sea. The moving water picks up sand and small stones along the way. Over many years this slow work carves wide valleys into the land.

## How Rain Feeds Rivers

Rain falls on the hills and soaks into the soil until the ground holds no more. The extra water gathers into small streams that join together into one strong river.
"""


@pytest.fixture(scope="session")
def forces_text() -> str:
    return (FIXTURES / "forces_motion.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def forces_doc(forces_text):
    return ingest(forces_text)


@pytest.fixture
def tiny_doc():
    return ingest(TINY_TEXT)


@pytest.fixture
def cfg() -> PipelineConfig:
    return PipelineConfig()


@pytest.fixture
def profile() -> LearnerProfile:
    return LearnerProfile(grade_level=7, interest="basketball")


def make_gateway(script=None, record=False, **cfg_overrides) -> Gateway:
    provider_cfg = ProviderConfig(kind="mock", **cfg_overrides)
    return Gateway(provider_cfg, script=script, record_requests=record)


@pytest.fixture
def gateway() -> Gateway:
    return make_gateway()
