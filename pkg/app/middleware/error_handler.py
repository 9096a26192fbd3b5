from datetime import datetime

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from app.core.errors import MoeloError
from app.core.logger import logger


async def api_exception_handler(request: Request, exc: Exception):
    status_code = int(getattr(exc, "status_code", status.HTTP_500_INTERNAL_SERVER_ERROR))
    message = getattr(exc, "message", "Internal Server Error")
    details = getattr(exc, "details", None) or str(exc)
    logger.warning(f"{request.method} {request.url.path} -> {status_code}: {message}")

    return JSONResponse(
        status_code=status_code,
        content={
            "status": status_code,
            "message": message,
            "details": details,
            "path": request.url.path,
            "timestamp": datetime.now().isoformat(),
            "request_id": getattr(request.state, "request_id", None),
        },
    )


def register_api_exception_handlers(app: FastAPI) -> None:
    """Register all exception handlers for the application."""
    handlers = {
        MoeloError: api_exception_handler,
    }

    for exception_class, handler in handlers.items():
        app.add_exception_handler(exception_class, handler)
