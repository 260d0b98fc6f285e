"""Named hyperparameter scales.

``paper`` is the full-scale configuration (embedding 384, 8 heads, 8
encoder layers, batch 1024, 100 epochs with a 20-epoch warmup). ``desk``
is a reduced configuration sized so the complete pipeline, including the
pre-training-benefit experiment, runs on a laptop CPU in minutes: a
smaller encoder, shorter schedule with a proportionally shorter warmup,
and a coarser fine-tuning window stride.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .fitting import FitConfig
from .model.config import TctstConfig
from .pretrain import PretrainConfig


@dataclass
class RunProfile:
    name: str
    model: TctstConfig
    pretrain: PretrainConfig
    pretrain_fit: FitConfig
    finetune_fit: FitConfig
    finetune_stride: int = 1

    def with_window(self, window_len: int | None) -> "RunProfile":
        if window_len is None:
            return self
        return replace(self, model=replace(self.model, window_len=window_len))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "model": self.model.to_json(),
            "pretrain": self.pretrain.to_json(),
            "pretrain_fit": self.pretrain_fit.to_json(),
            "finetune_fit": self.finetune_fit.to_json(),
            "finetune_stride": self.finetune_stride,
        }


def paper_profile() -> RunProfile:
    return RunProfile(
        name="paper",
        model=TctstConfig(),
        pretrain=PretrainConfig(),
        pretrain_fit=FitConfig(epochs=100, batch_size=1024, warmup_epochs=20,
                               plateau_patience=10, early_stop_patience=10),
        finetune_fit=FitConfig(epochs=100, batch_size=1024, warmup_epochs=20,
                               plateau_patience=10, early_stop_patience=20),
        finetune_stride=1,
    )


def desk_profile() -> RunProfile:
    return RunProfile(
        name="desk",
        model=TctstConfig(emb_dim=64, n_head=4, n_layers=2),
        pretrain=PretrainConfig(),
        pretrain_fit=FitConfig(epochs=30, batch_size=64, warmup_epochs=5,
                               plateau_patience=8, early_stop_patience=10),
        finetune_fit=FitConfig(epochs=30, batch_size=64, warmup_epochs=5,
                               plateau_patience=8, early_stop_patience=10),
        finetune_stride=5,
    )


PROFILE_BUILDERS = {"paper": paper_profile, "desk": desk_profile}


def get_profile(name: str) -> RunProfile:
    try:
        return PROFILE_BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILE_BUILDERS)}") from None


def profile_from_json(d: dict) -> RunProfile:
    """Rebuild a profile from a config.json blob (for reproduction runs)."""
    return RunProfile(
        name=d["name"],
        model=TctstConfig.from_json(d["model"]),
        pretrain=PretrainConfig.from_json(d["pretrain"]),
        pretrain_fit=FitConfig(**d["pretrain_fit"]),
        finetune_fit=FitConfig(**d["finetune_fit"]),
        finetune_stride=d["finetune_stride"],
    )
