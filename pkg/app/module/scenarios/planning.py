from collections.abc import Mapping, Sequence

import numpy as np

from app.core.errors import PlanError
from app.module.continual.schemas import IncrementMode
from app.module.fingerprints.dataset import partition_regions
from app.module.fingerprints.schemas import BuildingSpec, DeviceProfile
from app.module.scenarios.schemas import Increment, ScenarioPlan, Track


def _check_device_order(devices: Sequence[DeviceProfile]) -> None:
    if not devices:
        raise PlanError("A scenario needs at least one device")
    times = [d.intro_time_index for d in devices]
    if times != sorted(times):
        raise PlanError(f"Devices must be ordered by introduction time, got {[d.acronym for d in devices]}")


def _dil(devices: list[str], regions: list[int], n_steps: int) -> list[Increment]:
    steps = [Increment(label="DIL1", mode=IncrementMode.DIL, baseline=True, devices=(devices[0],), regions=tuple(regions), new_regions=tuple(regions))]
    for k in range(1, n_steps):
        steps.append(Increment(label=f"DIL{k + 1}", mode=IncrementMode.DIL, devices=(devices[k],), regions=tuple(regions)))
    return steps


def _cil(devices: list[str], regions: list[int], n_steps: int) -> list[Increment]:
    return [
        Increment(label=f"CIL{k + 1}", mode=IncrementMode.CIL, baseline=k == 0, devices=tuple(devices), regions=(regions[k],), new_regions=(regions[k],))
        for k in range(n_steps)
    ]


def _cdil(devices: list[str], regions: list[int], n_steps: int) -> list[Increment]:
    chunks = [tuple(int(r) for r in chunk) for chunk in np.array_split(np.asarray(regions), n_steps)]
    return [
        Increment(label=f"CDIL{k + 1}", mode=IncrementMode.CDIL, baseline=k == 0, devices=(devices[k],), regions=chunks[k], new_regions=chunks[k])
        for k in range(n_steps)
    ]


def build_plan(
    track: Track | str,
    building: BuildingSpec,
    devices: Sequence[DeviceProfile],
    n_rp: int,
    n_steps: int | None = None,
    partition: Mapping[int, int] | None = None,
) -> ScenarioPlan:
    """Step sequence of one track; step 1 is the baseline model.

    DIL: the first device over every region, then one step per further device.
    CIL: region 0 with all devices, then one step per further region.
    CDIL: paired (device, region chunk) steps; more regions than devices are split into
    contiguous chunks, fewer regions than devices leave the later devices unused.
    """
    try:
        track = Track(track)
    except ValueError:
        raise PlanError(f"Unknown track: {track}") from None
    _check_device_order(devices)
    partition = partition if partition is not None else partition_regions(building, n_rp)
    regions = sorted(set(partition.values()))
    acronyms = [d.acronym for d in devices]
    available = {Track.DIL: len(acronyms), Track.CIL: len(regions), Track.CDIL: min(len(acronyms), len(regions))}[track]
    n_steps = available if n_steps is None else n_steps
    if not 1 <= n_steps <= available:
        raise PlanError(f"{track.display_name} supports 1 to {available} steps with {len(acronyms)} devices and {len(regions)} regions, got {n_steps}")

    build = {Track.DIL: _dil, Track.CIL: _cil, Track.CDIL: _cdil}[track]
    return ScenarioPlan(track=track, building=building.name, n_rp=n_rp, region_count=len(regions), increments=tuple(build(acronyms, regions, n_steps)))
