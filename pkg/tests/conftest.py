import pytest

from streamsieve.locations import Gazetteer


@pytest.fixture(scope="session")
def gazetteer() -> Gazetteer:
    return Gazetteer.bundled()


@pytest.fixture()
def small_gazetteer() -> Gazetteer:
    return Gazetteer(
        [
            ("Sittwe", 20.15, 92.90),
            ("Bogota", 4.71, -74.07),
            ("Rio de Janeiro", -22.91, -43.17),
            ("Rio Branco", -9.97, -67.81),
            ("Oslo", 59.91, 10.75),
            ("Quito", -0.18, -78.47),
        ]
    )
