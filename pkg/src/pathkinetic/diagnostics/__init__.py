"""Certificates, residual checks and reference oracles."""

from .certificates import (
    FAIL,
    MOMENT_KAPPA,
    ONE_SIDED,
    PASS,
    Certificate,
    certify,
    generator_series,
    gronwall_factor,
    holder_bound,
    holder_certificate,
    holder_estimate,
    holder_table,
    moment_bound,
    moment_certificate,
    sensitivity_certificate,
    time_derivative,
    time_lipschitz_certificate,
    weak_residual,
    weak_residual_profile,
)

__all__ = [
    "FAIL",
    "MOMENT_KAPPA",
    "ONE_SIDED",
    "PASS",
    "Certificate",
    "certify",
    "generator_series",
    "gronwall_factor",
    "holder_bound",
    "holder_certificate",
    "holder_estimate",
    "holder_table",
    "moment_bound",
    "moment_certificate",
    "sensitivity_certificate",
    "time_derivative",
    "time_lipschitz_certificate",
    "weak_residual",
    "weak_residual_profile",
]
