import math

import numpy as np
import pytest

from empdist import models
from empdist.instruments import Instrument, LindbladSystem, jump_instrument


@pytest.fixture(scope="session")
def bitflip_half() -> Instrument:
    return models.amp_damp_qubit(lam=0.5, phi=math.pi)


@pytest.fixture(scope="session")
def amp_damp_generic() -> Instrument:
    return models.amp_damp_qubit(lam=0.8, phi=math.pi / 3)


@pytest.fixture(scope="session")
def classical_chain() -> Instrument:
    return models.symmetric_two_state_chain(0.3)


@pytest.fixture(scope="session")
def two_level_atom() -> Instrument:
    system = LindbladSystem(
        hamiltonian=np.zeros((2, 2)),
        observed={"e": models.SIGMA_MINUS},
        unobserved=(models.SIGMA_PLUS,),
    )
    return jump_instrument(system)


@pytest.fixture(scope="session")
def xx_chain_small() -> Instrument:
    return models.xx_chain(models.XXChainParams(sites=2))


@pytest.fixture(scope="session")
def ring_even_sector() -> Instrument:
    return models.periodic_chain(
        models.PeriodicChainParams(sites=3, pairing=1.0, period=1.0, parity_sector="even")
    )


@pytest.fixture(scope="session")
def zoo(bitflip_half, amp_damp_generic, classical_chain, two_level_atom, xx_chain_small, ring_even_sector):
    """The models every cross-cutting invariant is checked on."""
    return {
        "bitflip_half": bitflip_half,
        "amp_damp_generic": amp_damp_generic,
        "classical_chain": classical_chain,
        "two_level_atom": two_level_atom,
        "xx_chain_small": xx_chain_small,
        "ring_even_sector": ring_even_sector,
    }
