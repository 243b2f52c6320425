import datetime
import json
import os
import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, Field

from faconf_logging import rich_console
from util.FAConfException import FAConfException


class FoldSchedulerState(BaseModel):
    """
    Schema for the scheduler state.
    """
    fold_idx: int = Field(0, description="Next fold to start")
    completed: List[int] = Field(default_factory=list, description="Folds that finished")
    failed: Dict[int, str] = Field(default_factory=dict, description="Fold -> error message")


class FoldJob(BaseModel):
    fold: int = Field(..., ge=0, description="Fold id; results come back in this order")
    name: str = Field(..., description="Label used in progress lines")
    run: Callable[[], Any] = Field(..., description="Trains and evaluates one fold")


class FoldScheduler:
    """
    Runs fold jobs either one after another or on a thread pool and returns
    their results in fold order, so output does not depend on `jobs`.

    Attributes:
        jobs: Worker count; 1 runs in the calling thread.
        save_dir: The final state is stored there or None.
        error_dir: The state and a traceback are stored there on a failure, or None.
        state: Progress; workers update it under `_lock`.
    """

    def __init__(self, jobs: int = 1, save_dir: Optional[str] = None, error_dir: Optional[str] = None,
                 uuid: str = "FoldScheduler") -> None:
        if jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {jobs}")
        self.jobs = jobs
        self.save_dir = save_dir
        self.error_dir = error_dir
        self.uuid = uuid
        self.fold_jobs: List[FoldJob] = []
        self.state = FoldSchedulerState()
        self._lock = threading.Lock()

        if self.save_dir is not None:
            os.makedirs(self.save_dir, exist_ok=True)
        if self.error_dir is not None:
            os.makedirs(self.error_dir, exist_ok=True)

    def add_job(self, job: FoldJob) -> None:
        self.fold_jobs.append(job)

    def _run_one(self, job: FoldJob) -> Any:
        rich_console.print(f"[green]#{job.fold}: running {job.name}[/green]")
        try:
            result = job.run()
        except FAConfException as e:
            rich_console.print(f"[red]#{job.fold}: [ERROR] {job.name} failed with: {e}[/red]")
            with self._lock:
                self.state.failed[job.fold] = str(e)
            if self.error_dir:
                self.save_error(job, e)
            raise
        with self._lock:
            self.state.completed.append(job.fold)
        rich_console.print(f"   [orange3]#{job.fold}: {job.name} finished[/orange3]")
        return result

    def run_all(self) -> List[Any]:
        """
        Run every job. The first failure is re-raised after its diagnostic
        has been written; with a pool, jobs already running are awaited first.
        """
        ordered = sorted(self.fold_jobs, key=lambda j: j.fold)
        rich_console.print(f"[red]Start scheduler '{self.uuid}' folds={len(ordered)} jobs={self.jobs}[/red]")
        if self.jobs == 1:
            results = []
            for job in ordered:
                self.state.fold_idx = job.fold
                results.append(self._run_one(job))
        else:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                futures = []
                for job in ordered:
                    with self._lock:
                        self.state.fold_idx = job.fold
                    futures.append(executor.submit(self._run_one, job))
                results = [future.result() for future in futures]
        self.state.fold_idx = len(ordered)
        if self.save_dir:
            self.save_scheduler(self.save_dir)
        return results

    def save_scheduler(self, path: str) -> None:
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, f"{self.uuid}_state.json"), "w", encoding="utf-8") as f:
            with self._lock:
                f.write(self.state.model_dump_json(indent=2))

    def save_error(self, job: FoldJob, error: BaseException) -> None:
        self.save_scheduler(self.error_dir)
        stamp = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        report = {
            "fold": job.fold,
            "name": job.name,
            "error": str(error),
            "type": type(error).__name__,
            "traceback": traceback.format_exception(type(error), error, error.__traceback__),
        }
        path = os.path.join(self.error_dir, f"fold{job.fold}_{stamp}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
