import math

import numpy as np
import pytest

from fpa.model import AuctionInstance, ValueDistribution


def dist(values, masses) -> ValueDistribution:
    return ValueDistribution(np.asarray(values, dtype=float),
                             np.asarray(masses, dtype=float))


def dist_from_cums(values, cums) -> ValueDistribution:
    masses = np.diff(np.concatenate(([0.0], np.asarray(cums, dtype=float))))
    return ValueDistribution(np.asarray(values, dtype=float), masses)


@pytest.fixture(scope="session")
def example21() -> AuctionInstance:
    """Two i.i.d. buyers with values {1, 2} at probability one half each."""
    d = dist([1.0, 2.0], [0.5, 0.5])
    return AuctionInstance((d, d))


@pytest.fixture(scope="session")
def example24() -> AuctionInstance:
    """Four-buyer instance whose equilibrium has a known closed form."""
    g1 = dist_from_cums(
        [2, 10, 20],
        [math.sqrt(77) / (12 * math.sqrt(2)), 11 * math.sqrt(7) / (24 * math.sqrt(3)), 1.0],
    )
    g2 = dist_from_cums(
        [1, 13, 14],
        [2 * math.sqrt(22) / (7 * math.sqrt(7)), 4 / math.sqrt(21), 1.0],
    )
    g3 = dist_from_cums([9, 20], [11 / 12, 1.0])
    g4 = dist_from_cums([1, 12], [3 * math.sqrt(3) / (2 * math.sqrt(7)), 1.0])
    return AuctionInstance((g1, g2, g3, g4))


@pytest.fixture(scope="session")
def point_masses() -> AuctionInstance:
    return AuctionInstance((dist([5.0], [1.0]), dist([3.0], [1.0])))


@pytest.fixture(scope="session")
def six_buyer() -> AuctionInstance:
    """Six-buyer fixture on which the continuous method terminates early."""
    return AuctionInstance((
        dist([0.08, 0.2, 0.8], [0.2, 0.76, 0.04]),
        dist([0.09, 0.3, 0.9], [0.3, 0.36, 0.34]),
        dist([0.07, 0.12, 0.7], [0.3, 0.36, 0.34]),
        dist([0.07, 0.12, 0.7], [0.3, 0.36, 0.34]),
        dist([0.07, 0.12, 0.7], [0.2, 0.15, 0.65]),
        dist([0.04, 0.12, 0.8], [0.2, 0.15, 0.65]),
    ))


@pytest.fixture(scope="session")
def three_buyer() -> AuctionInstance:
    """Three-buyer fixture whose continuous trajectories oscillate."""
    return AuctionInstance((
        dist([0.1, 0.2, 0.25], [0.25, 0.25, 0.5]),
        dist([0.1, 0.2, 0.25], [0.05, 0.45, 0.5]),
        dist([0.1, 0.2, 0.25], [0.05, 0.45, 0.5]),
    ))


@pytest.fixture(scope="session")
def poa_argmin() -> AuctionInstance:
    """The welfare-ratio minimizer on the D=6, M=10 grid."""
    return AuctionInstance((
        dist([5 / 6], [1.0]),
        dist([0.0, 2 / 6, 3 / 6], [0.6, 0.2, 0.2]),
    ))


def example24_reference_cdfs():
    """Closed-form bid CDFs of the four-buyer instance, flat across gaps."""

    def f1(x):
        if x <= 2:
            return math.sqrt(77) / (12 * math.sqrt(2)) if x >= 2 else 0.0
        if x <= 6:
            return (77 / 48) * math.sqrt((10 - x) / ((9 - x) * (13 - x)))
        if x <= 8:
            return (11 / 12) * math.sqrt(2 * (20 - x) / ((14 - x) * (12 - x)))
        if x <= 9:
            return 11 / (20 - x)
        return 1.0

    def f2(x):
        if x < 2:
            return 0.0
        if x <= 6:
            return (8 / 7) * math.sqrt((13 - x) / ((10 - x) * (9 - x)))
        if x <= 8:
            return math.sqrt(8 * (14 - x) / ((20 - x) * (12 - x)))
        return 1.0

    def f3(x):
        if x < 2:
            return 0.0
        if x <= 6:
            return (11 / 6) * math.sqrt(7 * (9 - x) / (3 * (10 - x) * (13 - x)))
        if x < 8:
            return 11 / 12
        if x <= 9:
            return 11 / (20 - x)
        return 1.0

    def f4(x):
        if x < 2:
            return 0.0
        if x < 6:
            return 3 * math.sqrt(3) / (2 * math.sqrt(7))
        if x <= 8:
            return math.sqrt(18 * (12 - x) / ((20 - x) * (14 - x)))
        return 1.0

    return [f1, f2, f3, f4]
