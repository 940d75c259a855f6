import pytest

from phaseqss.channel import ChannelParams


@pytest.fixture
def curve_params():
    """Link of the key-rate curves at 100 km with a generous intensity."""
    return ChannelParams(mu=0.1, eta_d=0.56, p_d=1e-8, e_d=0.02, alpha=0.167, length_km=100, p_x=0.5)


@pytest.fixture
def bright_params():
    """Short, bright, noisy link so every tally cell is well populated."""
    return ChannelParams(mu=0.5, eta_d=1.0, p_d=1e-3, e_d=0.05, alpha=0.0, length_km=0, p_x=0.5)


@pytest.fixture
def noiseless_params():
    return ChannelParams(mu=0.2, eta_d=0.8, p_d=0.0, e_d=0.0, length_km=10, p_x=0.6)
