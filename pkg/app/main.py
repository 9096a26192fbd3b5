from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from scalar_fastapi import get_scalar_api_reference

from app.config.settings import Config
from app.core.logger import logger
from app.middleware.error_handler import register_api_exception_handlers
from app.middleware.request_id import RequestIDMiddleware
from app.module.health.router import health_router
from app.module.localize.router import localize_router
from app.module.moe_model.checkpoint import load_model_checkpoint
from app.module.moe_model.model import MoEModel

# API versioning from config
API_PREFIX = f"/api/{Config.API_VERSION}"


@asynccontextmanager
async def life_span(app: FastAPI):
    """Load the checkpoint named by CHECKPOINT_PATH unless a model was handed in."""
    logger.info("🚀 Starting localization service...")
    if app.state.model is None and Config.CHECKPOINT_PATH:
        app.state.model = load_model_checkpoint(Config.CHECKPOINT_PATH)
    if app.state.model is None:
        logger.warning("No model loaded; /localize will answer 409 until one is provided")
    logger.info("✅ Localization service started")
    yield
    logger.info("🛑 Localization service stopped")


def create_app(model: MoEModel | None = None) -> FastAPI:
    app = FastAPI(
        version=Config.APP_VERSION,
        title=Config.APP_NAME,
        description="Online phase of the mixture-of-experts Wi-Fi fingerprint localizer",
        lifespan=life_span,
        debug=Config.DEBUG,
        docs_url=f"{API_PREFIX}/docs",
        redoc_url=f"{API_PREFIX}/redoc",
        openapi_url=f"{API_PREFIX}/openapi.json",
    )
    app.state.model = model

    @app.get("/scalar", include_in_schema=False)
    async def scalar_html():
        return get_scalar_api_reference(openapi_url=app.openapi_url, title=app.title, scalar_theme="fastify")

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.add_middleware(RequestIDMiddleware)

    register_api_exception_handlers(app)

    app.include_router(health_router, prefix=API_PREFIX, tags=["Health"])
    app.include_router(localize_router, prefix=API_PREFIX, tags=["Localization"])
    return app


app = create_app()
