from fastapi import APIRouter, Depends, Request

from app.core.errors import StateError
from app.module.localize.schemas import LocalizeRequest, LocalizeResponse
from app.module.localize.service import localize
from app.module.moe_model.model import MoEModel

localize_router = APIRouter()


def get_model(request: Request) -> MoEModel:
    model = getattr(request.app.state, "model", None)
    if model is None:
        raise StateError("No model checkpoint is loaded", details="start the service with --checkpoint or set CHECKPOINT_PATH")
    return model


@localize_router.post("/localize", response_model=LocalizeResponse)
async def localize_fingerprint(body: LocalizeRequest, model: MoEModel = Depends(get_model)):
    """Predict the reference point, region and coordinates of one RSS fingerprint."""
    return localize(model, body.rss)
