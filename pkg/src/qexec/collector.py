"""Run-lifecycle tracking and result aggregation.

The collector is the live handle a run returns: executor workers write job
completions into it while user threads poll status(), fetch partial or
blocking result trees, and (once terminal) apply the run's merge policy.

A ResultTree is the plain nested dict {provider: {backend: [counts, ...]}}
with list order equal to dispatch job order for that backend. Partial trees
simply omit unfinished jobs (no placeholders): consumers distinguish
"pending" via status(). FAILED jobs never contribute counts and never abort
the run; they surface in status() and in merge metadata under "failed_jobs".
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass

from .dispatch import Dispatch
from .errors import CollectorError, MergeError, ResultTimeoutError
from .providers import JobHandle, JobState, JobStatus

__all__ = ["ResultCollector", "RunState", "to_table", "tree_to_json"]


@dataclass(frozen=True)
class RunState:
    """Snapshot of a run: identity, per-job lifecycle, wall-clock bounds."""

    run_id: str
    jobs: tuple[tuple[int, JobHandle | None, JobStatus], ...]
    started_at: float
    finished_at: float | None

    @property
    def terminal(self) -> bool:
        return all(status.state.terminal for _, _, status in self.jobs)


class ResultCollector:
    """Tracks every job of one run and aggregates outputs.

    Writers (executor lanes) call the record_* methods; readers may call
    status()/get_results() from any thread at any time. Blocking retrieval
    parks on a condition variable, never busy-waits.
    """

    def __init__(
        self,
        dispatch: Dispatch,
        merge_policy: str | None = None,
        merge_fn=None,
        policy_context: dict | None = None,
    ):
        self.run_id = uuid.uuid4().hex[:12]
        self.dispatch = dispatch
        self.merge_policy = merge_policy
        self._merge_fn = merge_fn
        self.policy_context = dict(policy_context or {})

        self._cond = threading.Condition()
        self._merge_lock = threading.Lock()
        self._statuses: dict[int, JobStatus] = {}
        self._handles: dict[int, JobHandle] = {}
        self._counts: dict[int, dict[str, int]] = {}
        self._job_site: dict[int, tuple[str, str]] = {}
        for provider_id, backend_name, spec in dispatch.jobs():
            self._statuses[spec.ordinal] = JobStatus(JobState.QUEUED)
            self._job_site[spec.ordinal] = (provider_id, backend_name)
        self.started_at = time.time()
        self.finished_at: float | None = time.time() if not self._statuses else None
        self._merged: tuple | None = None

    # -- writer side -------------------------------------------------------

    def record_submitted(self, ordinal: int, handle: JobHandle) -> None:
        with self._cond:
            self._handles[ordinal] = handle

    def record_status(self, ordinal: int, status: JobStatus) -> None:
        """Upgrade a job's observed non-terminal status; terminal states only
        ever enter through record_result/record_failed."""
        if status.state.terminal:
            return
        with self._cond:
            current = self._statuses[ordinal]
            if current.state is JobState.QUEUED and status.state is JobState.RUNNING:
                self._statuses[ordinal] = status

    def record_result(self, ordinal: int, counts: dict[str, int]) -> None:
        with self._cond:
            if self._statuses[ordinal].state.terminal:
                return
            self._counts[ordinal] = dict(counts)
            self._statuses[ordinal] = JobStatus(JobState.DONE)
            self._after_terminal()

    def record_failed(self, ordinal: int, message: str) -> None:
        with self._cond:
            if self._statuses[ordinal].state.terminal:
                return
            self._statuses[ordinal] = JobStatus(JobState.FAILED, message)
            self._after_terminal()

    def _after_terminal(self) -> None:
        if self._terminal_locked():
            self.finished_at = time.time()
        self._cond.notify_all()

    def _terminal_locked(self) -> bool:
        return all(s.state.terminal for s in self._statuses.values())

    # -- reader side -------------------------------------------------------

    def is_terminal(self) -> bool:
        with self._cond:
            return self._terminal_locked()

    def status(self) -> dict[int, JobStatus]:
        """Non-blocking snapshot, ordinal -> JobStatus."""
        with self._cond:
            return dict(self._statuses)

    def run_state(self) -> RunState:
        with self._cond:
            jobs = tuple(
                (ordinal, self._handles.get(ordinal), self._statuses[ordinal])
                for ordinal in sorted(self._statuses)
            )
            return RunState(self.run_id, jobs, self.started_at, self.finished_at)

    def job_site(self, ordinal: int) -> tuple[str, str]:
        return self._job_site[ordinal]

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the run is terminal; returns False on timeout."""
        with self._cond:
            return self._cond.wait_for(self._terminal_locked, timeout)

    def get_results(self, block: bool = True, timeout: float | None = None) -> dict:
        """The result tree; blocking waits for the run to finish first.

        Non-blocking returns immediately with only DONE jobs' counts. On
        timeout the partial tree rides on the ResultTimeoutError.
        """
        if block:
            if not self.wait(timeout):
                raise ResultTimeoutError(
                    f"run {self.run_id} not terminal after {timeout}s", self._build_tree()
                )
        return self._build_tree()

    def _build_tree(self) -> dict:
        with self._cond:
            done = dict(self._counts)
        tree: dict[str, dict[str, list[dict[str, int]]]] = {}
        for provider_id, backend_name, spec in self.dispatch.jobs():
            if spec.ordinal in done:
                tree.setdefault(provider_id, {}).setdefault(backend_name, []).append(
                    done[spec.ordinal]
                )
        return tree

    def failed_jobs(self) -> list[dict]:
        with self._cond:
            return [
                {
                    "ordinal": ordinal,
                    "provider": self._job_site[ordinal][0],
                    "backend": self._job_site[ordinal][1],
                    "error": status.error_message or "",
                }
                for ordinal, status in sorted(self._statuses.items())
                if status.state is JobState.FAILED
            ]

    def get_merged_results(self) -> tuple:
        """Apply the run's merge policy to the complete tree, exactly once."""
        with self._merge_lock:
            if self._merged is not None:
                return self._merged
            with self._cond:
                if not self._terminal_locked():
                    raise CollectorError("run is not terminal; merged results unavailable")
                if self._merge_fn is None:
                    raise CollectorError("no merge policy configured for this run")
            tree = self._build_tree()
            try:
                merged, metadata = self._merge_fn(tree, self.policy_context)
            except MergeError:
                raise
            except Exception as exc:
                raise MergeError(f"merge policy {self.merge_policy!r} raised: {exc}") from exc
            metadata = dict(metadata or {})
            metadata["failed_jobs"] = self.failed_jobs()
            self._merged = (merged, metadata)
            return self._merged


def to_table(tree: dict) -> list[tuple[str, str, int, str, int]]:
    """Flatten a result tree to (provider, backend, job, bitstring, count) rows.

    Rows follow canonical dispatch order; bitstrings sort lexicographically
    within a job. The job column is the index within that backend's list.
    """
    rows: list[tuple[str, str, int, str, int]] = []
    for provider_id in sorted(tree):
        for backend_name in sorted(tree[provider_id]):
            for job_index, counts in enumerate(tree[provider_id][backend_name]):
                for bitstring in sorted(counts):
                    rows.append((provider_id, backend_name, job_index, bitstring, counts[bitstring]))
    return rows


def tree_to_json(tree: dict) -> str:
    """Canonical JSON form of a result tree (stable key order, 2-space indent)."""
    return json.dumps(tree, sort_keys=True, indent=2)
