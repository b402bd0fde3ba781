"""Multinomial filtering and smoothing for compartmental epidemic models."""

from ._epimn import (
    EBOLA_PARAM_NAMES,
    EbolaData,
    EpimnError,
    Model,
    compartment_names,
    ebola_loglik,
    em_fit,
    exact_loglik_z,
    families,
    filter_x,
    filter_z,
    mcmc,
    profile_em,
    simulate,
    simulate_ebola,
    smc,
    thin_z,
)

__all__ = [
    "EBOLA_PARAM_NAMES",
    "EbolaData",
    "EpimnError",
    "Model",
    "compartment_names",
    "ebola_loglik",
    "em_fit",
    "exact_loglik_z",
    "families",
    "filter_x",
    "filter_z",
    "mcmc",
    "profile_em",
    "simulate",
    "simulate_ebola",
    "smc",
    "thin_z",
]
