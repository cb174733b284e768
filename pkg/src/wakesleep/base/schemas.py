"""
Configuration and record schemas.
"""

from typing import Any, ClassVar, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

Objective = Literal["m1m2", "ssws", "cws", "reinforce-m1m2", "iwae-supervised-baseline", "rws"]


class StrictSchema(BaseModel):
    """Schema base rejecting unknown keys."""

    model_config = ConfigDict(extra="forbid")


class ModelConfig(StrictSchema):
    kind: Literal["static", "sequential", "toy"] = "sequential"
    num_classes: int = Field(6, ge=2)
    obs_dim: int = Field(4, ge=1)
    z_dim: int = Field(8, ge=0)
    hidden_dim: int = Field(64, ge=1)
    observation: Literal["gaussian", "bernoulli"] = "gaussian"
    alphabet_size: int = Field(3, ge=2)
    max_length: int = Field(4, ge=1)
    zero_init: bool = False


class HmmConfig(StrictSchema):
    num_states: int = Field(6, ge=2)
    obs_dim: int = Field(4, ge=1)
    self_transition: float = Field(0.8, ge=0.0, le=1.0)
    emission_scale: float = Field(2.0, gt=0.0)
    emission_std: float = Field(1.0, gt=0.0)
    seed: int = 0


class DatasetConfig(StrictSchema):
    kind: Literal["mnist", "hmm", "toy"] = "hmm"
    path: Optional[str] = None
    data_dir: Optional[str] = None
    download: bool = False
    train_size: int = Field(50000, ge=1)
    n_labeled: int = Field(100, ge=0)
    balanced: bool = True
    length: int = Field(50, ge=1)
    train_count: int = Field(5000, ge=1)
    val_count: int = Field(500, ge=1)
    hmm: HmmConfig = Field(default_factory=HmmConfig)


class SupervisionSpec(StrictSchema):
    mode: Literal["per-step-rate", "per-sequence-all-or-none", "block"] = "per-sequence-all-or-none"
    rate: float = Field(0.125, ge=0.0, le=1.0)
    seed: int = 0
    block_length: int = Field(5, ge=1)


class TrainConfig(StrictSchema):
    """Every knob of a training run; unknown keys are rejected."""

    objective: Objective = "cws"
    K: int = Field(10, ge=1)
    alpha: float = Field(1.0, ge=0.0)
    lr_theta: float = Field(1e-3, gt=0.0)
    lr_phi: float = Field(1e-3, gt=0.0)
    adam_betas: List[float] = Field(default_factory=lambda: [0.9, 0.999])
    adam_eps: float = Field(1e-8, gt=0.0)
    grad_clip: Optional[float] = Field(10.0, gt=0.0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(10, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)
    seed: int = 0
    eval_every: int = Field(50, ge=1)
    eval_K: int = Field(10, ge=1)
    eval_topk: List[int] = Field(default_factory=lambda: [1, 5, 10])
    patience: int = Field(20, ge=1)
    ssws_term_scaling: Literal["sum", "normalized"] = "sum"
    model: ModelConfig = Field(default_factory=ModelConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    supervision: SupervisionSpec = Field(default_factory=SupervisionSpec)

    @model_validator(mode="after")
    def _check_objective_fields(self) -> "TrainConfig":
        if self.objective == "m1m2" and self.model.kind != "static":
            raise ValueError("objective 'm1m2' marginalizes y by enumeration and needs model.kind='static'")
        if self.objective == "reinforce-m1m2" and self.K < 2:
            raise ValueError("objective 'reinforce-m1m2' needs K >= 2 for its leave-one-out baseline")
        if len(self.adam_betas) != 2 or not all(0.0 <= b < 1.0 for b in self.adam_betas):
            raise ValueError("adam_betas must be two values in [0, 1)")
        if any(k < 1 for k in self.eval_topk):
            raise ValueError("eval_topk entries must be >= 1")
        if self.model.kind == "static" and self.dataset.kind == "hmm":
            raise ValueError("the static model consumes single-step data (mnist), not hmm sequences")
        return self


class MetricRow(StrictSchema):
    """One line of the metrics JSON-lines file."""

    step: int
    epoch: int
    wall_time: float
    loss_p: Optional[float]
    loss_phi: Optional[float]
    ess_mean: Optional[float] = None
    grad_norm_theta: Optional[float]
    grad_norm_phi: Optional[float]
    clipped: bool = False
    val_accuracy: Optional[float] = None
    val_topk: Optional[Dict[str, float]] = None
    val_loss_p: Optional[float] = None


class RunManifest(StrictSchema):
    """
    What produced a run directory. Two runs are reproductions of each other
    when their :meth:`reproducible_fields` agree; ``created_at`` is not part
    of that comparison.
    """

    VOLATILE_FIELDS: ClassVar[Tuple[str, ...]] = ("created_at",)

    command: str
    config_hash: str
    seed: int
    versions: Dict[str, str]
    argv: List[str]
    created_at: str = Field(description="UTC write time; excluded from reproducibility checks")

    def reproducible_fields(self) -> Dict[str, Any]:
        return self.model_dump(exclude=set(self.VOLATILE_FIELDS))

    def same_run_as(self, other: "RunManifest") -> bool:
        return self.reproducible_fields() == other.reproducible_fields()


class EstimatorRow(StrictSchema):
    """Bias/variance of one φ-gradient estimator at one particle count."""

    estimator: Literal["reinforce", "ssws", "cws"]
    K: int
    n_sets: int
    bias: float
    variance: float
    oracle_norm: float


class InstabilityRow(StrictSchema):
    """Spread of per-batch φ-losses under all-or-none supervision."""

    estimator: Literal["ssws", "cws"]
    n_batches: int
    mean_loss: float
    std_loss: float
    coefficient_of_variation: float
