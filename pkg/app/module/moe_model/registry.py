from collections.abc import Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from app.core.errors import RegistryError

Coords = tuple[float, float, float]


class RegionSpec(BaseModel):
    """A region about to be learned: its id and its RPs with surveyed coordinates."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    region_id: int
    rp_ids: tuple[int, ...]
    coords: tuple[Coords, ...]

    @model_validator(mode="after")
    def _aligned(self) -> "RegionSpec":
        if len(self.rp_ids) != len(self.coords):
            raise ValueError("rp_ids and coords must have the same length")
        if not self.rp_ids:
            raise ValueError("a region needs at least one RP")
        return self

    def local_classes(self) -> list[tuple[int, Coords]]:
        return list(zip(self.rp_ids, self.coords))


class RegistryPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    regions: list[RegionSpec]


class ClassRegistry:
    """Global class space: the disjoint union of each region's local RP classes, in insertion order."""

    def __init__(self):
        self.regions: list[int] = []
        self.local_classes: dict[int, list[int]] = {}
        self.rp_coords: dict[int, Coords] = {}
        self._global: list[tuple[int, int]] = []
        self._index: dict[tuple[int, int], int] = {}
        self._region_start: dict[int, int] = {}

    @property
    def n_classes(self) -> int:
        return len(self._global)

    def __contains__(self, region_id: int) -> bool:
        return region_id in self.local_classes

    def add_region(self, region_id: int, local_classes: Sequence[tuple[int, Coords]]) -> list[int]:
        if region_id in self.local_classes:
            raise RegistryError(f"Region {region_id} is already registered")
        if not local_classes:
            raise RegistryError(f"Region {region_id} has no RPs")
        rp_ids = [int(rp) for rp, _ in local_classes]
        if len(set(rp_ids)) != len(rp_ids):
            raise RegistryError(f"Region {region_id} lists an RP twice")
        clashes = [rp for rp in rp_ids if rp in self.rp_coords]
        if clashes:
            raise RegistryError(f"RPs {clashes} already belong to another region")

        self.regions.append(region_id)
        self.local_classes[region_id] = rp_ids
        self._region_start[region_id] = len(self._global)
        globals_ = []
        for rp, coords in local_classes:
            self.rp_coords[int(rp)] = tuple(float(c) for c in coords)
            self._index[(region_id, int(rp))] = len(self._global)
            globals_.append(len(self._global))
            self._global.append((region_id, int(rp)))
        return globals_

    def global_index(self, region_id: int, rp_id: int) -> int:
        try:
            return self._index[(region_id, rp_id)]
        except KeyError as e:
            raise RegistryError(f"Unknown class (region {region_id}, rp {rp_id})") from e

    def global_index_of_rp(self, rp_id: int) -> int:
        for region_id, rps in self.local_classes.items():
            if rp_id in rps:
                return self._index[(region_id, rp_id)]
        raise RegistryError(f"RP {rp_id} is not registered")

    def entry(self, global_class: int) -> tuple[int, int]:
        if not 0 <= global_class < len(self._global):
            raise RegistryError(f"Global class {global_class} out of range [0, {len(self._global)})")
        return self._global[global_class]

    def coords(self, global_class: int) -> Coords:
        return self.rp_coords[self.entry(global_class)[1]]

    def coords_table(self):
        """Coordinates of every global class, in global order (n_classes x 3 list)."""
        return [self.rp_coords[rp] for _, rp in self._global]

    def region_slice(self, region_id: int) -> slice:
        if region_id not in self._region_start:
            raise RegistryError(f"Region {region_id} is not registered")
        start = self._region_start[region_id]
        return slice(start, start + len(self.local_classes[region_id]))

    def local_index(self, global_class: int) -> tuple[int, int]:
        """(region id, position inside that region's local class list)."""
        region_id, _ = self.entry(global_class)
        return region_id, global_class - self._region_start[region_id]

    def to_payload(self) -> RegistryPayload:
        return RegistryPayload(
            regions=[
                RegionSpec(
                    region_id=region_id,
                    rp_ids=tuple(self.local_classes[region_id]),
                    coords=tuple(self.rp_coords[rp] for rp in self.local_classes[region_id]),
                )
                for region_id in self.regions
            ]
        )

    @classmethod
    def from_payload(cls, payload: RegistryPayload) -> "ClassRegistry":
        registry = cls()
        for spec in payload.regions:
            registry.add_region(spec.region_id, spec.local_classes())
        return registry
