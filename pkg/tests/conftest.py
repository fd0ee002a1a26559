import numpy as np
import pytest

from photonshaper.cqed import CqedParams, Variant, adiabatic_coeffs, build_scheme
from photonshaper.lindblad import SimConfig, build_operators, build_space, coherent_evolve, evolve
from photonshaper.pulses import PulseOptions, ShapeSpec, emission_control, make_shape

PAPER_PARAMS = CqedParams(g=4.9, kappa_c=2.4, kappa_l=0.3, gamma=3.03)


@pytest.fixture(scope="session")
def paper_params():
    return PAPER_PARAMS


@pytest.fixture(scope="session")
def emission_setup():
    """Shared full-model emission run at Delta/2pi = -20 MHz, T = 0.2 us."""
    params = PAPER_PARAMS
    scheme = build_scheme(params, -20.0, Variant.THREE_LEVEL)
    space = build_space(scheme)
    ops = build_operators(space, params, scheme)
    coeffs = adiabatic_coeffs(params, scheme)
    mode = make_shape(
        ShapeSpec(family="sech", t_char=0.2, window=(-0.8, 0.8), n_samples=1024)
    )
    pulse = emission_control(mode, coeffs, PulseOptions())
    config = SimConfig(save_points=300)
    sim = evolve(ops, config, pulse, params)
    sim_half = evolve(ops, SimConfig(dt=sim.dt / 2.0, save_points=40), pulse, params)
    coh = coherent_evolve(ops, config, pulse, params)
    return {
        "params": params,
        "scheme": scheme,
        "space": space,
        "ops": ops,
        "coeffs": coeffs,
        "mode": mode,
        "pulse": pulse,
        "config": config,
        "sim": sim,
        "sim_half": sim_half,
        "coherent": coh,
    }
