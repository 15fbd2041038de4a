"""
Модуль для конфигурации схем сводок, которые команды CLI печатают в stdout (JSON).
"""
from pydantic import BaseModel, ConfigDict, Field

from grid.enums import RoleTag


class CommandSummary(BaseModel):
    """
    Схема для базовой сводки команды.
    """
    model_config = ConfigDict(use_enum_values=True)

    command: str = Field(..., description="Subcommand name")
    outputs: list[str] = Field(default_factory=list, description="Written artifact paths")


class SynthSummary(CommandSummary):
    """
    Схема для сводки генерации синтетических данных.
    """
    init_times: int = Field(..., description="Number of initialisation times")
    members: int = Field(..., description="Hindcast ensemble size")
    leads: int = Field(..., description="Number of leads")
    grid: tuple[int, int] = Field(..., description="Grid height and width")
    ocean_cells: int = Field(..., description="Number of ocean cells")


class TrainSummary(CommandSummary):
    """
    Схема для сводки предобучения или обучения.
    """
    stage: str = Field(..., description="pretrain or train")
    mode: str = Field(..., description="Training objective mode")
    epochs_run: int = Field(..., description="Epochs recorded in history")
    best_epoch: int = Field(..., description="Epoch with the lowest validation loss")
    best_val: float | None = Field(None, description="Lowest validation loss")
    finished: bool = Field(..., description="Whether the stage completed (early stop or epoch budget)")
    checkpoint_id: str | None = Field(None, description="Identifier of the written checkpoint")


class AdjustSummary(CommandSummary):
    """
    Схема для сводки построения скорректированного ансамбля.
    """
    role: RoleTag = Field(..., description="adjusted or badj")
    members: int = Field(..., description="Ensemble size")
    init_times: int = Field(..., description="Number of initialisation times")
    scale: float | None = Field(None, description="Prior std scaling factor")


class EvaluateSummary(CommandSummary):
    """
    Схема для сводки верификации.
    """
    packs: list[str] = Field(..., description="Evaluated pack names")
    members: int = Field(..., description="Ensemble size used for every pack")
    crps: dict[str, list[float]] = Field(default_factory=dict, description="CRPS per lead for each pack")
