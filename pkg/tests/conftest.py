from __future__ import annotations

from collections.abc import Callable, Iterator

import pytest

from maxlow.config import settings
from maxlow.mesh import Triangulation, generate_lshape, generate_square
from tests.factories import create_jittered_mesh


@pytest.fixture()
def settings_overrides() -> Iterator[Callable[..., None]]:
    original: dict[str, object] = {}

    def _set(**kwargs: object) -> None:
        for key, value in kwargs.items():
            if key not in original:
                original[key] = getattr(settings, key)
            setattr(settings, key, value)

    yield _set

    for key, value in original.items():
        setattr(settings, key, value)


@pytest.fixture()
def square0() -> Triangulation:
    return generate_square(0)


@pytest.fixture()
def square1() -> Triangulation:
    return generate_square(1)


@pytest.fixture()
def square2() -> Triangulation:
    return generate_square(2)


@pytest.fixture()
def lshape0() -> Triangulation:
    return generate_lshape(0)


@pytest.fixture()
def lshape1() -> Triangulation:
    return generate_lshape(1)


@pytest.fixture()
def jittered() -> Triangulation:
    return create_jittered_mesh()
