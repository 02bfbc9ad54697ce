"""Shared data models for knockoff-lab."""

import math
from typing import Literal

from pydantic import BaseModel, Field, field_validator, model_validator

# =============================================================================
# Metrics
# =============================================================================


class ProjectionConfig(BaseModel):
    """Random-projection settings for sliced Wasserstein estimators."""

    num_projections: int = Field(128, ge=1, description="Number of projection directions")
    order: Literal[1, 2] = Field(2, description="Transport order p")
    seed: int | None = Field(None, description="Pin the directions; fresh per call when unset")


# =============================================================================
# Data generation
# =============================================================================

# Mixture weights (pi_1, pi_2, pi_3) shipped as named presets "pi-1" .. "pi-10".
MIXTURE_WEIGHT_PRESETS: dict[str, tuple[float, float, float]] = {
    "pi-1": (0.562, 0.384, 0.054),
    "pi-2": (0.430, 0.168, 0.402),
    "pi-3": (0.317, 0.324, 0.359),
    "pi-4": (0.316, 0.388, 0.296),
    "pi-5": (0.439, 0.488, 0.073),
    "pi-6": (0.314, 0.041, 0.645),
    "pi-7": (0.656, 0.282, 0.062),
    "pi-8": (0.200, 0.300, 0.500),
    "pi-9": (0.500, 0.300, 0.200),
    "pi-10": (0.333, 0.333, 0.333),
}

DEFAULT_MIXTURE_WEIGHTS = (0.4, 0.2, 0.4)


class GaussianMixtureSpec(BaseModel):
    """Three-component Gaussian mixture with AR-style covariances."""

    weights: tuple[float, float, float] = Field(DEFAULT_MIXTURE_WEIGHTS)
    mean_step: float = Field(20.0, description="Component k has mean mean_step*(k-1)")
    rho_base: float = Field(0.6, gt=0.0, lt=1.0)

    @field_validator("weights")
    @classmethod
    def _check_simplex(cls, weights: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(w < 0 for w in weights):
            raise ValueError(f"mixture weights must be nonnegative, got {weights}")
        total = sum(weights)
        # The published presets are rounded to three decimals (pi-10 sums to 0.999).
        if abs(total - 1.0) > 1e-9:
            if abs(total - 1.0) <= 2e-3:
                return tuple(w / total for w in weights)
            raise ValueError(f"mixture weights must sum to 1, got {total}")
        return weights

    @classmethod
    def from_preset(cls, name: str, **kwargs) -> "GaussianMixtureSpec":
        if name not in MIXTURE_WEIGHT_PRESETS:
            valid = ", ".join(MIXTURE_WEIGHT_PRESETS)
            raise ValueError(f"Unknown mixture preset '{name}'. Valid presets: {valid}")
        return cls(weights=MIXTURE_WEIGHT_PRESETS[name], **kwargs)

    def component_rhos(self) -> tuple[float, float, float]:
        return tuple(self.rho_base ** (k - 0.1) for k in (1, 2, 3))


class CopulaSpec(BaseModel):
    """Exchangeable Archimedean copula with a common marginal."""

    family: Literal["clayton", "joe"] = "clayton"
    theta: float = 2.0
    marginal: Literal["uniform", "exponential", "gamma"] = "uniform"

    @model_validator(mode="after")
    def _check_theta(self) -> "CopulaSpec":
        if self.family == "clayton" and not self.theta > 0:
            raise ValueError(f"Clayton copula needs theta > 0, got {self.theta}")
        if self.family == "joe" and not self.theta >= 1:
            raise ValueError(f"Joe copula needs theta >= 1, got {self.theta}")
        return self


class CoefficientSpec(BaseModel):
    """Sparse Rademacher coefficients with amplitude p / (c * sqrt(n))."""

    scale_divisor: float = Field(15.0, gt=0.0)
    num_nonnull: int = Field(20, ge=0)


class DatasetSpec(BaseModel):
    """Which design-matrix distribution to draw X from."""

    kind: Literal["mixture", "copula", "gaussian", "external"] = "mixture"
    mixture: GaussianMixtureSpec = Field(default_factory=GaussianMixtureSpec)
    copula: CopulaSpec = Field(default_factory=CopulaSpec)
    x_path: str | None = Field(None, description="Externally supplied X (kind=external)")
    y_path: str | None = Field(None, description="Externally supplied Y, optional")

    @model_validator(mode="after")
    def _check_external(self) -> "DatasetSpec":
        if self.kind == "external" and not self.x_path:
            raise ValueError("dataset.kind=external requires dataset.x_path")
        return self

    @property
    def tag(self) -> str:
        if self.kind == "mixture":
            return "MG"
        if self.kind == "copula":
            family = "C" if self.copula.family == "clayton" else "J"
            marginal = {"uniform": "U", "exponential": "E", "gamma": "G"}[self.copula.marginal]
            return f"{family}+{marginal}"
        if self.kind == "gaussian":
            return "IID"
        return "EXT"


class ResponseSpec(BaseModel):
    """How Y is synthesized from X."""

    kind: Literal["linear", "tanh"] = "linear"
    tanh_num_covariates: int = Field(20, ge=4, description="m for the tanh response")

    @field_validator("tanh_num_covariates")
    @classmethod
    def _check_groups(cls, m: int) -> int:
        if m % 4 != 0:
            raise ValueError(f"tanh response needs a multiple of 4 covariates, got {m}")
        return m


# =============================================================================
# Model and training configuration
# =============================================================================


class KnockoffNetConfig(BaseModel):
    """Architecture of the attention-based knockoff generator."""

    num_heads: int = Field(8, ge=1)
    num_layers: int = Field(8, ge=1)
    hidden_dim: int = Field(512, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    mlp_ratio: int = Field(2, ge=1, description="Feed-forward width as a multiple of hidden_dim")

    @model_validator(mode="after")
    def _check_heads(self) -> "KnockoffNetConfig":
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError(
                f"hidden_dim ({self.hidden_dim}) must be divisible by num_heads ({self.num_heads})"
            )
        return self


NET_PRESETS: dict[str, KnockoffNetConfig] = {
    "full": KnockoffNetConfig(num_heads=8, num_layers=8, hidden_dim=512),
    "desk": KnockoffNetConfig(num_heads=4, num_layers=4, hidden_dim=128),
    "tiny": KnockoffNetConfig(num_heads=2, num_layers=2, hidden_dim=16),
}


class TrainConfig(BaseModel):
    """Hyperparameters of the adversarial training loop."""

    lr_swapper: float = Field(1e-3, gt=0.0)
    lr_generator: float = Field(1e-5, gt=0.0)
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(64, ge=2)
    lambda_rex: float = Field(30.0, ge=0.0, description="lambda_1, weight of the REx penalty")
    lambda_swapper: float = Field(1.0, ge=0.0, description="lambda_2, swapper decorrelation")
    lambda_dependency: float = Field(20.0, ge=0.0, description="lambda_3, SWC dependency loss")
    early_stop_patience: int = Field(6, ge=1)
    swapper_update_frequency: int = Field(3, ge=1)
    num_swappers: int = Field(2, ge=1)
    weight_decay: float = Field(0.01, ge=0.0)
    swapper_temperature: float = Field(0.2, gt=0.0)
    swapper_sees_regularizers: bool = True
    num_projections: int = Field(128, ge=1)
    swd_order: Literal[1, 2] = 2
    train_ratio: float = Field(0.8, gt=0.0, lt=1.0)
    max_loss: float = Field(1e6, gt=0.0, description="Divergence guard")
    dtype: Literal["float32", "float64"] = "float32"
    seed: int = 0

    @property
    def projection(self) -> ProjectionConfig:
        return ProjectionConfig(num_projections=self.num_projections, order=self.swd_order)


class DrpConfig(BaseModel):
    """Dependency regularized perturbation settings."""

    enabled: bool = True
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    alpha_schedule: Literal["fixed", "inverse-sqrt"] = "fixed"
    schedule_constant: float = Field(1.0, ge=0.0, description="c in alpha_n = c / sqrt(n)")
    seed: int | None = None

    def alpha_for(self, n: int) -> float:
        """Perturbation weight for a sample of n rows."""
        if self.alpha_schedule == "fixed":
            return self.alpha
        return min(1.0, self.schedule_constant / math.sqrt(n))


DEFAULT_PENALTY_GRID = [10.0**k for k in [-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0,
                                          0.5, 1.0, 1.5, 2.0, 2.5, 3.0]]


class SelectionConfig(BaseModel):
    """Knockoff filter settings."""

    q: float = Field(0.1, gt=0.0, le=1.0)
    penalty_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_PENALTY_GRID))
    folds: int = Field(5, ge=2)

    @field_validator("penalty_grid")
    @classmethod
    def _check_grid(cls, grid: list[float]) -> list[float]:
        if not grid or any(g < 0 for g in grid):
            raise ValueError("penalty_grid must be a nonempty list of nonnegative values")
        return grid


# =============================================================================
# Training results
# =============================================================================


class LossBreakdown(BaseModel):
    """Every term of the training objective at one evaluation."""

    swd_per_swapper: list[float]
    rex: float
    swapper_decor: float
    drl: float
    total: float
    lambda_rex: float
    lambda_swapper: float
    lambda_dependency: float

    @property
    def swd_mean(self) -> float:
        return sum(self.swd_per_swapper) / len(self.swd_per_swapper)

    @property
    def swap_loss(self) -> float:
        """L_SL: mean SWD plus the weighted REx and decorrelation terms."""
        return self.swd_mean + self.lambda_rex * self.rex + self.lambda_swapper * self.swapper_decor

    def recomposed_total(self) -> float:
        return self.swap_loss + self.drl

    def as_row(self) -> dict:
        row = {f"swd_{i}": v for i, v in enumerate(self.swd_per_swapper)}
        row.update(
            swd_mean=self.swd_mean,
            rex=self.rex,
            swapper_decor=self.swapper_decor,
            swap_loss=self.swap_loss,
            drl=self.drl,
            total=self.total,
        )
        return row


class StepRecord(BaseModel):
    epoch: int
    step: int
    swapper_updated: bool
    loss: LossBreakdown


class EpochRecord(BaseModel):
    epoch: int
    train: LossBreakdown
    validation: LossBreakdown
    wall_clock_seconds: float
    improved: bool


class TrainingLog(BaseModel):
    """Per-epoch and per-step record of one training run."""

    epochs: list[EpochRecord] = Field(default_factory=list)
    steps: list[StepRecord] = Field(default_factory=list)
    best_epoch: int | None = None
    stopping_epoch: int | None = None
    stopped_early: bool = False
    swapper_updates: int = 0
    total_seconds: float = 0.0
    config: dict = Field(default_factory=dict)

    @property
    def drl_min_epoch(self) -> int | None:
        """Epoch whose training dependency loss is smallest."""
        if not self.epochs:
            return None
        return min(self.epochs, key=lambda e: e.train.drl).epoch

    def epoch_rows(self) -> list[dict]:
        rows = []
        for record in self.epochs:
            row = {"epoch": record.epoch, "wall_clock_seconds": record.wall_clock_seconds}
            row.update({f"train_{k}": v for k, v in record.train.as_row().items()})
            row.update({f"val_{k}": v for k, v in record.validation.as_row().items()})
            row["improved"] = record.improved
            rows.append(row)
        return rows

    def step_rows(self) -> list[dict]:
        rows = []
        for record in self.steps:
            row = {"epoch": record.epoch, "step": record.step,
                   "swapper_updated": record.swapper_updated}
            row.update(record.loss.as_row())
            rows.append(row)
        return rows


# =============================================================================
# Selection and diagnostics results
# =============================================================================


class SelectionResult(BaseModel):
    """Outcome of the knockoff filter for one trial (0-based feature indices).

    fdp and power are None when the data carries no ground truth (an external
    X with its own Y).
    """

    selected: list[int]
    tau: float
    q: float
    fdp: float | None = None
    power: float | None = None
    w: list[float]
    penalty: float | None = None
    config_digest: str = ""
    metadata: dict = Field(default_factory=dict)

    @property
    def has_ground_truth(self) -> bool:
        return self.fdp is not None

    def score_text(self) -> str:
        if not self.has_ground_truth:
            return "fdp=n/a, power=n/a (no ground truth)"
        return f"fdp={self.fdp:.3f}, power={self.power:.3f}"


class SwapMetricReport(BaseModel):
    """Swap-property distances across swap ratios."""

    ratios: list[float]
    per_ratio: dict[str, list[float]]
    averages: dict[str, float]
    mean_abs_correlation: float | None = None
    seed: int


class StatisticSummary(BaseModel):
    """Pooled knockoff-statistic moments by null / nonnull class."""

    null_mean: float | None
    null_std: float | None
    nonnull_mean: float | None
    nonnull_std: float | None
    null_count: int
    nonnull_count: int

    @property
    def nonnull_present(self) -> bool:
        return self.nonnull_count > 0


# =============================================================================
# Experiments
# =============================================================================

REPORT_FORMATS = ("csv", "json", "markdown", "png")


class AblationFlags(BaseModel):
    disable_rex: bool = False
    disable_swapper_decor: bool = False
    k_override: int | None = Field(None, ge=1)
    disable_drp: bool = False


class ExperimentSpec(BaseModel):
    """Everything needed to run repeated end-to-end trials."""

    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    n: int = Field(600, ge=10)
    p: int = Field(30, ge=2)
    coefficients: CoefficientSpec = Field(
        default_factory=lambda: CoefficientSpec(scale_divisor=15.0, num_nonnull=6)
    )
    response: ResponseSpec = Field(default_factory=ResponseSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    net_preset: Literal["full", "desk", "tiny", "custom"] = "desk"
    net: KnockoffNetConfig | None = Field(None, description="Used when net_preset=custom")
    drp: DrpConfig = Field(default_factory=DrpConfig)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    ablation: AblationFlags = Field(default_factory=AblationFlags)
    knockoff_source: Literal["generator", "oracle"] = "generator"
    num_repeats: int = Field(50, ge=1)
    base_seed: int = 0
    tag: str = "experiment"

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentSpec":
        if self.net_preset == "custom" and self.net is None:
            raise ValueError("net_preset=custom requires a 'net' section")
        if self.coefficients.num_nonnull > self.p:
            raise ValueError(
                f"coefficients.num_nonnull ({self.coefficients.num_nonnull}) exceeds p ({self.p})"
            )
        return self

    def net_config(self) -> KnockoffNetConfig:
        if self.net_preset == "custom":
            return self.net
        return NET_PRESETS[self.net_preset]

    def effective_train_config(self) -> TrainConfig:
        """TrainConfig with ablation flags folded in."""
        updates: dict = {}
        if self.ablation.disable_rex:
            updates["lambda_rex"] = 0.0
        if self.ablation.disable_swapper_decor:
            updates["lambda_swapper"] = 0.0
        if self.ablation.k_override is not None:
            updates["num_swappers"] = self.ablation.k_override
        return self.train.model_copy(update=updates)

    def effective_drp_config(self) -> DrpConfig:
        if self.ablation.disable_drp:
            return self.drp.model_copy(update={"enabled": False})
        return self.drp


class TrialResult(BaseModel):
    """Result from one seeded end-to-end trial."""

    repeat_index: int
    seed: int
    status: Literal["success", "error"] = "success"
    error: str | None = None
    stage: str | None = None
    selection: SelectionResult | None = None
    swap_metrics: SwapMetricReport | None = None
    nonnull_indices: list[int] = Field(default_factory=list)
    best_epoch: int | None = None
    stopping_epoch: int | None = None
    train_seconds: float = 0.0
    runtime_seconds: float = 0.0
    loss_log: TrainingLog | None = Field(None, description="Epoch records, repeat 0 only")


class AggregateStats(BaseModel):
    mean: float
    std: float
    median: float
    q05: float
    q95: float
    count: int


class ExperimentReport(BaseModel):
    """Aggregated outcome of repeated trials."""

    spec: ExperimentSpec
    digest: str
    trials: list[TrialResult]
    aggregates: dict[str, AggregateStats] = Field(default_factory=dict)
    failures: list[dict] = Field(default_factory=list)
    single_repeat: bool = False
    statistic_summary: StatisticSummary | None = None
    swap_metric_averages: dict[str, float] = Field(default_factory=dict)
    total_seconds: float = 0.0
    loss_log: TrainingLog | None = None

    @property
    def successful(self) -> list[TrialResult]:
        return [t for t in self.trials if t.status == "success"]
