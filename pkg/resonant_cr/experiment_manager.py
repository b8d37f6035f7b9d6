# resonant_cr/experiment_manager.py
import asyncio
import logging
import uuid
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, TypeVar

from pydantic import BaseModel, ConfigDict, Field

from resonant_cr import config

logger = logging.getLogger(__name__)

T = TypeVar("T")


class StoredRun(BaseModel):
    """One CLI run as recorded in the run manifest."""

    run_id: str = Field(description="The unique identifier for the run.")
    subcommand: str = Field(description="Subcommand that produced the run.")
    status: str = Field(
        description="The current status of the run (pending, running, completed, error)."
    )
    params: Dict[str, Any] = Field(
        default_factory=dict, description="Resolved parameters of the run."
    )
    out_dir: Optional[str] = Field(None, description="Directory holding the artifacts.")
    result: Optional[Dict[str, Any]] = Field(
        None, description="Summary returned by the command, if finished."
    )
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    updated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    def update_status(self, status: str, result: Optional[Dict[str, Any]] = None):
        """Helper to update run status and timestamp."""
        self.status = status
        if result:
            self.result = result
        self.updated_at = datetime.now(timezone.utc)

    model_config = ConfigDict(arbitrary_types_allowed=True)


class ExperimentManager:
    """Tracks runs and dispatches independent sweep points to worker threads."""

    def __init__(self, threads: int = config.THREADS, serial: bool = False):
        self.runs: Dict[str, StoredRun] = {}
        self.threads = max(1, int(threads))
        self.serial = serial

    def create_run(
        self, subcommand: str, params: Dict[str, Any], out_dir: Optional[str] = None
    ) -> StoredRun:
        run = StoredRun(
            run_id=uuid.uuid4().hex[:12],
            subcommand=subcommand,
            status="pending",
            params=params,
            out_dir=out_dir,
        )
        self.runs[run.run_id] = run
        logger.info(f"Created run {run.run_id} for '{subcommand}'")
        return run

    def get_run(self, run_id: str) -> Optional[StoredRun]:
        return self.runs.get(run_id)

    async def map_points(
        self, func: Callable[[Any], T], points: Sequence[Any]
    ) -> List[T]:
        """Evaluates func on every point; results come back in point order.

        Serial mode runs the points one after another in the calling thread.
        Otherwise at most `threads` points run at once through
        asyncio.to_thread. The first failure propagates after the rest finish.
        """
        points = list(points)
        if not points:
            logger.warning("Empty sweep: nothing to evaluate")
            return []
        if self.serial or self.threads == 1:
            return [func(p) for p in points]
        semaphore = asyncio.Semaphore(self.threads)

        async def _one(point):
            async with semaphore:
                return await asyncio.to_thread(func, point)

        outcomes = await asyncio.gather(
            *(_one(p) for p in points), return_exceptions=True
        )
        for outcome in outcomes:
            if isinstance(outcome, BaseException):
                raise outcome
        logger.debug(f"Evaluated {len(points)} sweep points on {self.threads} threads")
        return list(outcomes)

    def get_run_list(
        self,
        status: Literal["all", "completed", "running", "error", "pending"] = "all",
        sort: Literal["Descending", "Ascending"] = "Descending",
        number: int = 10,
    ) -> List[StoredRun]:
        runs = list(self.runs.values())

        if status != "all":
            runs = [run for run in runs if run.status == status]

        reverse = sort == "Descending"
        runs.sort(key=lambda r: r.updated_at, reverse=reverse)

        return runs[:number]

    def get_runs_for_saving(self) -> Dict[str, dict]:
        return {run_id: run.model_dump() for run_id, run in self.runs.items()}

    def load_runs_from_data(self, data: Dict[str, dict]):
        for run_id, run_data in data.items():
            try:
                self.runs[run_id] = StoredRun.model_validate(run_data)
            except Exception as e:
                logger.error(f"Failed to load run data for {run_id}: {e}")
        logger.info(f"Loaded {len(self.runs)} runs.")
