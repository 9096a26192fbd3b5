from datetime import datetime

from fastapi import APIRouter, Request

health_router = APIRouter()


@health_router.get("/health")
async def health_check(request: Request):
    model = getattr(request.app.state, "model", None)
    health_data = {
        "status": "API is running smoothly",
        "timestamp": datetime.now().isoformat(),
        "model_loaded": model is not None,
        "experts": len(model.experts) if model is not None else 0,
        "classes": model.registry.n_classes if model is not None else 0,
    }
    return health_data
