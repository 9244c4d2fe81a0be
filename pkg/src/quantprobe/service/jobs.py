"""In-process job registry for long-running experiment requests."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"  # queued | running | done | error
    result: object | None = None
    error: dict | None = None
    _done: threading.Event = field(default_factory=threading.Event, repr=False)

    def wait(self, timeout: float | None = None) -> bool:
        return self._done.wait(timeout)


class JobStore:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def run(self, kind: str, fn, background: bool) -> Job:
        """Execute fn via a job record, inline or on a worker thread."""
        job = Job(id=uuid.uuid4().hex, kind=kind)
        with self._lock:
            self._jobs[job.id] = job

        def execute():
            job.status = "running"
            try:
                job.result = fn()
                job.status = "done"
            except Exception as e:  # recorded, surfaced on poll
                job.error = describe_error(e)
                job.status = "error"
            finally:
                job._done.set()

        if background:
            threading.Thread(target=execute, name=f"job-{job.id[:8]}", daemon=True).start()
        else:
            execute()
        return job


def describe_error(e: Exception) -> dict:
    from ..errors import ConfigError, DataFormatError, MissingDataError

    if isinstance(e, ConfigError):
        kind = "config"
    elif isinstance(e, DataFormatError):
        kind = "format"
    elif isinstance(e, MissingDataError):
        kind = "missing_data"
    else:
        kind = "internal"
    body = {"kind": kind, "message": str(e)}
    if isinstance(e, MissingDataError) and e.missing:
        body["missing"] = e.missing
    return body
