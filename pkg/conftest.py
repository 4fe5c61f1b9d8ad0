import sys
from pathlib import Path

import pytest
from loguru import logger

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

CODEX = ROOT / "codex"


@pytest.fixture
def codex_dir() -> Path:
    return CODEX


@pytest.fixture
def field_samples_path() -> Path:
    return CODEX / "threshold_samples.csv"


@pytest.fixture
def demo_scene_path() -> Path:
    return CODEX / "scenes" / "demo_scene.json"


@pytest.fixture
def se_fixture_path() -> Path:
    return CODEX / "se_weights" / "fixture.json"


@pytest.fixture
def log_messages():
    """Collect loguru messages emitted during a test."""
    messages = []
    sink_id = logger.add(lambda m: messages.append(m.record["message"]), level="DEBUG")
    yield messages
    logger.remove(sink_id)
