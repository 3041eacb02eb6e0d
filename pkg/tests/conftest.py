import io
from pathlib import Path

import pytest

from kdgene.kg import load_entity_types, load_triples

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

THREE_LINE_FIXTURE = "a\tr1\tb\na\tr2\tc\nb\tr1\td\n"


@pytest.fixture
def three_line_store():
    """4 entities, 2 relations, 3 triples."""
    return load_triples(io.StringIO(THREE_LINE_FIXTURE))


@pytest.fixture(scope="session")
def demo_store():
    return load_triples(
        DATA_DIR / "demo" / "triples.tsv",
        entity_types_by_name=load_entity_types(DATA_DIR / "demo" / "entity_types.tsv"),
    )


@pytest.fixture(scope="session")
def planted_dir():
    return DATA_DIR / "planted"
