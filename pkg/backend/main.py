"""FastAPI application entry point for the seriation service."""
import logging

from fastapi import FastAPI

from config import DB_PATH, HOST, LOG_LEVEL, PORT
from backend.api import router as api_router, store

# Logging
logging.basicConfig(
    level=LOG_LEVEL,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s"
)
logger = logging.getLogger(__name__)

# Run store
store.initialize()

# FastAPI app
app = FastAPI(
    title="Robinson Seriation",
    description="Approximate l∞ fitting of dissimilarities by Robinsonian ones",
    version="1.0.0",
)

app.include_router(api_router)


@app.on_event("startup")
async def startup():
    logger.info("Seriation service starting up")
    logger.info("Run store: %s (%d runs)", DB_PATH, store.count_runs())


# ── CLI entry point ─────────────────────────────────────────────────────

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host=HOST, port=PORT)
