from collections.abc import Sequence

from app.core.errors import PlanError
from app.module.continual.schemas import IncrementMode, TrainPlan
from app.module.moe_model.registry import RegionSpec

# (trainable groups, losses) per increment mode
_MODE_TABLE: dict[IncrementMode, tuple[frozenset, frozenset]] = {
    IncrementMode.DIL: (frozenset({"encoder", "projection"}), frozenset({"CE", "DR"})),
    IncrementMode.CIL: (frozenset({"new_expert"}), frozenset({"CE"})),
    IncrementMode.CDIL: (frozenset({"encoder", "projection", "new_expert"}), frozenset({"CE", "DR"})),
}


def plan_increment(mode: IncrementMode | str, new_regions: Sequence[RegionSpec] = (), cil_train_gate: bool = False) -> TrainPlan:
    """Freezing plan for one non-baseline increment.

    DIL adapts the encoder and gating projection on known regions. CIL trains only the new
    expert (plus the projection when cil_train_gate is set). CDIL does both.
    """
    try:
        mode = IncrementMode(mode)
    except ValueError:
        raise PlanError(f"Unknown increment mode: {mode}") from None
    has_new_region = bool(new_regions)
    if mode is IncrementMode.DIL and has_new_region:
        raise PlanError("A DIL increment cannot introduce a region")
    if mode is not IncrementMode.DIL and not has_new_region:
        raise PlanError(f"A {mode} increment needs a new region")

    trainable, losses = _MODE_TABLE[mode]
    if mode is IncrementMode.CIL and cil_train_gate:
        trainable = trainable | {"projection"}
    return TrainPlan(mode=mode, trainable=trainable, losses=losses, new_regions=tuple(new_regions))


def plan_baseline(mode: IncrementMode | str, new_regions: Sequence[RegionSpec]) -> TrainPlan:
    """First step of a track: every group trains on both losses and all baseline experts are created."""
    if not new_regions:
        raise PlanError("The baseline step needs at least one region")
    return TrainPlan(
        mode=IncrementMode(mode),
        trainable=frozenset({"encoder", "projection", "new_expert"}),
        losses=frozenset({"CE", "DR"}),
        new_regions=tuple(new_regions),
        baseline=True,
    )
