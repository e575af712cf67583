"""Python bindings for the fermi6g simulator core."""

from ._fermi6g import (
    ConfigError,
    EnvConfig,
    Environment,
    IoError,
    KeyAgreementError,
    RoundAborted,
    Trainer,
    TrainingConfig,
    channel_entropy,
    decay_epsilon,
    jain_index,
    least_used_channel,
    metrics_csv_header,
    parse_config,
    print_config,
    round_robin_mac,
    run_experiment,
    secagg,
)

__all__ = [
    "ConfigError",
    "EnvConfig",
    "Environment",
    "IoError",
    "KeyAgreementError",
    "RoundAborted",
    "Trainer",
    "TrainingConfig",
    "channel_entropy",
    "decay_epsilon",
    "jain_index",
    "least_used_channel",
    "metrics_csv_header",
    "parse_config",
    "print_config",
    "round_robin_mac",
    "run_experiment",
    "secagg",
]
