"""OTFS delay-Doppler simulation and low-complexity sum-product detection."""

from ._core import (
    FULL_SUPPORT,
    Channel,
    ConfigError,
    Constellation,
    DetectorConfig,
    DomainError,
    InputSizeError,
    MessageKernel,
    RefusalError,
    apply_channel,
    demap,
    detect,
    isfft,
    lmmse,
    map_bits,
    map_bruteforce,
    marginals_bruteforce,
    preset,
    run_ber_sweep,
    run_iteration_profile,
    run_pruning_profile,
    sample_paths,
    sfft,
    snr_to_noise_variance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
