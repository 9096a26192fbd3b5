from pydantic import BaseModel, Field

from app.module.moe_model.registry import Coords


class LocalizeRequest(BaseModel):
    rss: list[float] = Field(..., description="One RSS reading per access point in dBm; -100 marks an unseen AP")


class LocalizeResponse(BaseModel):
    global_class: int
    rp_id: int
    region_id: int
    expert_index: int
    coords: Coords
    gate_probability: float
