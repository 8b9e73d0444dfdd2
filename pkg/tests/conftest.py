import numpy as np
import pytest


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line to the terminal, bypassing capture."""

    def emit(tag: str, ok: bool, detail: str) -> bool:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
        return ok

    return emit


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

