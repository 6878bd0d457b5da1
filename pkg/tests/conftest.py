import json
from pathlib import Path

import pytest

from histdelta.formatting import MarkerConfig
from histdelta.history import Trajectory, Window
from histdelta.tokenizer import WhitespaceTokenizer, load_bpe, register_special_tokens

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def e1_trajectory() -> Trajectory:
    rec = json.loads((DATA_DIR / "e1_trajectory.jsonl").read_text(encoding="utf-8"))
    return Trajectory(
        id=rec["id"],
        instruction=rec["instruction"],
        observations=rec["observations"],
        actions=rec["actions"],
    )


@pytest.fixture(scope="session")
def e1_window(e1_trajectory: Trajectory) -> Window:
    return Window(
        instruction=e1_trajectory.instruction,
        start=0,
        steps=list(zip(e1_trajectory.observations, e1_trajectory.actions)),
    )


@pytest.fixture(scope="session")
def e1_diff_golden() -> str:
    return (DATA_DIR / "e1_diff_golden.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def e1_full_golden() -> str:
    return (DATA_DIR / "e1_full_golden.txt").read_text(encoding="utf-8")


@pytest.fixture()
def markers() -> MarkerConfig:
    return MarkerConfig()


@pytest.fixture()
def ws_tok(markers: MarkerConfig):
    return register_special_tokens(WhitespaceTokenizer(), list(markers.markers))


@pytest.fixture(scope="session")
def bpe_paths() -> tuple[Path, Path]:
    return DATA_DIR / "bpe" / "vocab.json", DATA_DIR / "bpe" / "merges.txt"


@pytest.fixture(scope="session")
def bpe_tok(bpe_paths):
    return load_bpe(*bpe_paths)


@pytest.fixture(scope="session")
def bpe_tok_markers(bpe_paths):
    cfg = MarkerConfig()
    return register_special_tokens(load_bpe(*bpe_paths), list(cfg.markers))
