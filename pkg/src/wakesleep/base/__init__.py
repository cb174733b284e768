"""
Shared building blocks: exceptions, schemas and on-disk storage.
"""


def __getattr__(name):
    """Lazy import so the schema layer is only loaded when used."""
    if name in (
        "WakeSleepError",
        "ContractViolation",
        "NumericFault",
        "DegenerateWeightsError",
        "ConfigurationError",
        "DataFormatError",
        "CheckpointError",
        "DownloadError",
    ):
        from . import exceptions
        return getattr(exceptions, name)
    elif name in (
        "TrainConfig",
        "ModelConfig",
        "DatasetConfig",
        "HmmConfig",
        "SupervisionSpec",
        "MetricRow",
        "RunManifest",
        "EstimatorRow",
        "InstabilityRow",
    ):
        from . import schemas
        return getattr(schemas, name)
    elif name in ("read_archive", "write_archive", "config_digest", "sha256_hex"):
        from . import storage
        return getattr(storage, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "WakeSleepError",
    "ContractViolation",
    "NumericFault",
    "DegenerateWeightsError",
    "ConfigurationError",
    "DataFormatError",
    "CheckpointError",
    "DownloadError",
    "TrainConfig",
    "ModelConfig",
    "DatasetConfig",
    "HmmConfig",
    "SupervisionSpec",
    "MetricRow",
    "RunManifest",
    "EstimatorRow",
    "InstabilityRow",
    "read_archive",
    "write_archive",
    "config_digest",
    "sha256_hex",
]
