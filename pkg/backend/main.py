from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from pathlib import Path
from typing import List
import json
import logging

from sse_starlette.sse import EventSourceResponse
from starlette.concurrency import iterate_in_threadpool

import config
from errors import NBMRError
from models import BuildRequest, SimConfig, SweepPoint, ThresholdReport
from services.code import save_code, serialize_code
from services.simulation import build_from_request, de_sweep, run_simulation, summarize, threshold_report

logging.basicConfig(level=config.LOG_LEVEL,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

app = FastAPI(
    title="nbmr API",
    description="Non-binary LDPC codes with multiplicative repetition: construction, thresholds and FER runs",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=config.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _http_error(exc: NBMRError) -> HTTPException:
    logger.warning("%s: %s", type(exc).__name__, exc)
    return HTTPException(status_code=exc.http_status, detail=str(exc))


# Health check endpoint
@app.get("/health")
async def health_check():
    return {"status": "healthy"}


# Density evolution endpoints
@app.get("/threshold", response_model=ThresholdReport)
def get_threshold(
    m: int,
    dc: int = 3,
    T: int = 1,
    dv: int = 2,
    tol: float = config.BISECT_TOL,
    puncture: float = 0.0,
):
    """BEC threshold of the repeated ensemble, with Shannon limit and gap"""
    try:
        return threshold_report(m, dc, T, tol, dv, puncture)
    except NBMRError as exc:
        raise _http_error(exc)


@app.get("/de-sweep", response_model=List[SweepPoint])
def get_de_sweep(
    m: List[int] = Query(...),
    T: List[int] = Query([1]),
    dc: int = 3,
    dv: int = 2,
    tol: float = config.BISECT_TOL,
    puncture: float = 0.0,
):
    try:
        return list(de_sweep(m, T, dc, tol, dv, puncture))
    except NBMRError as exc:
        raise _http_error(exc)


# Code construction
@app.post("/codes")
def create_code(req: BuildRequest):
    try:
        code = build_from_request(req)
    except NBMRError as exc:
        raise _http_error(exc)
    name = f"m{req.m}-N{req.n}-dv{req.dv}-dc{req.dc}-T{req.T}-seed{req.seed}.code"
    path = save_code(code, Path(config.CODE_DIR) / name)
    logger.info("stored code file %s", path)
    return {
        "summary": summarize(code, path).dict(),
        "code_text": serialize_code(code),
    }


# Monte Carlo runs, streamed one record per grid point
@app.post("/sim")
async def simulate(cfg: SimConfig, request: Request):
    async def event_generator():
        index = 0
        try:
            async for record in iterate_in_threadpool(run_simulation(cfg)):
                yield {
                    "event": "record",
                    "id": str(index),
                    "data": record.json()
                }
                index += 1
                if await request.is_disconnected():
                    logger.info("client disconnected after %d record(s)", index)
                    return
            yield {
                "event": "done",
                "id": str(index),
                "data": json.dumps({"records": index})
            }
        except NBMRError as exc:
            logger.warning("simulation failed: %s", exc)
            yield {
                "event": "error",
                "id": "error",
                "data": json.dumps({
                    "error": type(exc).__name__,
                    "status": exc.http_status,
                    "detail": str(exc)
                })
            }

    headers = {
        "Cache-Control": "no-cache",
        "Connection": "keep-alive",
        "X-Accel-Buffering": "no"
    }

    return EventSourceResponse(event_generator(), headers=headers)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=config.PORT)
