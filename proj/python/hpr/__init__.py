"""Holographic phase retrieval under Poisson-Gaussian noise."""

from ._hpr import (
    Operator,
    TruncationPolicy,
    data_gradient,
    data_value,
    lambert_peak,
    phi_slope_bound,
    log_s,
    make_synthetic,
    nll_pg_term,
    nll_poisson_term,
    nominal_gain,
    nrmse,
    phase_correct,
    phi,
    phi_derivative,
    random_binary_reference,
    run_experiment,
    selftest,
    simulate,
    ssim,
)


def config_text(settings):
    """Flat key = value text from a dict; lists become comma lists."""
    lines = []
    for key, value in settings.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def sweep(settings=None, **kwargs):
    """run_experiment from a settings dict plus keyword overrides.

    Keys with dots or dashes (solver.pg-wf.iterations) go in the dict.
    Returns (rows, metrics_csv).
    """
    merged = dict(settings or {})
    merged.update(kwargs)
    return run_experiment(config_text(merged))
