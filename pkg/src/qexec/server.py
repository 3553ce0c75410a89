"""Minimal HTTP job service exposing the simulator over a wire protocol.

This is the network leg the remote_http provider speaks against, so the
distributed and asynchronous paths are exercised across a real socket:

* ``GET /backends``          -> [{name, online, max_qubits, is_ideal_simulator}]
* ``POST /jobs``             -> 201 {job_id, state: "QUEUED"}
* ``GET /jobs/{id}``         -> {job_id, state}
* ``GET /jobs/{id}/result``  -> counts | 409 not ready | 410 failed

JSON bodies, UTF-8, no auth unless an api_key is configured (then every
request must carry a matching X-API-Key header). Jobs live in memory only;
a restart loses them and clients see 404.

Run standalone with ``python -m qexec.server --port 8748``.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .circuit import parse_qasm
from .errors import QExecError
from .simulator import MAX_WIDTH_DEFAULT, NoiseSpec, sample, sample_noisy

__all__ = ["ServerBackend", "ServerConfig", "RemoteServer", "main"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServerBackend:
    """One backend hosted by the service; noise=None means ideal."""

    name: str
    noise: NoiseSpec | None = None
    max_qubits: int = MAX_WIDTH_DEFAULT


def _default_backends() -> list[ServerBackend]:
    return [
        ServerBackend("statevector"),
        ServerBackend("noisy_statevector", NoiseSpec(0.05)),
    ]


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 = pick a free port
    delay: float = 0.0  # artificial seconds before each job executes
    api_key: str | None = None
    backends: list[ServerBackend] = field(default_factory=_default_backends)
    workers: int = 4


class _Job:
    __slots__ = ("job_id", "state", "counts", "error")

    def __init__(self, job_id: str):
        self.job_id = job_id
        self.state = "QUEUED"
        self.counts: dict[str, int] | None = None
        self.error: str | None = None


class _ServiceState:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.backends = {b.name: b for b in config.backends}
        self.jobs: dict[str, _Job] = {}
        self.lock = threading.Lock()
        self.pool = ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="qexec-srv")
        self._ids = itertools.count(1)

    def enqueue(self, backend: ServerBackend, qasm: str, shots: int, seed: int) -> _Job:
        job = _Job(f"rjob-{next(self._ids)}")
        with self.lock:
            self.jobs[job.job_id] = job
        self.pool.submit(self._execute, job, backend, qasm, shots, seed)
        return job

    def _execute(self, job: _Job, backend: ServerBackend, qasm: str, shots: int, seed: int) -> None:
        if self.config.delay > 0:
            time.sleep(self.config.delay)
        with self.lock:
            job.state = "RUNNING"
        try:
            circuit = parse_qasm(qasm)
            if backend.noise is not None:
                counts = sample_noisy(circuit, shots, backend.noise, seed, backend.max_qubits)
            else:
                counts = sample(circuit, shots, seed, backend.max_qubits)
            with self.lock:
                job.counts = counts
                job.state = "DONE"
        except Exception as exc:
            with self.lock:
                job.error = str(exc)
                job.state = "FAILED"


class _Handler(BaseHTTPRequestHandler):
    state: _ServiceState  # bound per server via type()

    # -- plumbing ------------------------------------------------------------

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, code: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _authorized(self) -> bool:
        expected = self.state.config.api_key
        if expected is None:
            return True
        if self.headers.get("X-API-Key") == expected:
            return True
        self._send(401, {"error": "missing or invalid api key"})
        return False

    # -- routes ----------------------------------------------------------------

    def do_GET(self):
        if not self._authorized():
            return
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["backends"]:
            self._send(
                200,
                [
                    {
                        "name": b.name,
                        "online": True,
                        "max_qubits": b.max_qubits,
                        "is_ideal_simulator": b.noise is None,
                    }
                    for b in sorted(self.state.backends.values(), key=lambda b: b.name)
                ],
            )
        elif len(parts) == 2 and parts[0] == "jobs":
            self._job_status(parts[1])
        elif len(parts) == 3 and parts[0] == "jobs" and parts[2] == "result":
            self._job_result(parts[1])
        else:
            self._send(404, {"error": "unknown path"})

    def do_POST(self):
        if not self._authorized():
            return
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts != ["jobs"]:
            self._send(404, {"error": "unknown path"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send(400, {"error": "malformed JSON body"})
            return

        backend = self.state.backends.get(str(body.get("backend", "")))
        if backend is None:
            self._send(404, {"error": f"unknown backend {body.get('backend')!r}"})
            return
        try:
            shots = int(body.get("shots", 0))
            seed = int(body.get("seed", 0))
        except (TypeError, ValueError):
            self._send(400, {"error": "shots and seed must be integers"})
            return
        if shots < 1:
            self._send(400, {"error": f"shots must be >= 1, got {shots}"})
            return
        qasm = body.get("qasm")
        if not isinstance(qasm, str):
            self._send(400, {"error": "missing qasm"})
            return
        try:
            circuit = parse_qasm(qasm)
        except QExecError as exc:
            self._send(400, {"error": f"bad qasm: {exc}"})
            return
        if circuit.width > backend.max_qubits:
            self._send(400, {"error": f"circuit width {circuit.width} exceeds {backend.max_qubits}"})
            return

        job = self.state.enqueue(backend, qasm, shots, seed)
        self._send(201, {"job_id": job.job_id, "state": "QUEUED"})

    def _job_status(self, job_id: str) -> None:
        with self.state.lock:
            job = self.state.jobs.get(job_id)
            if job is None:
                self._send(404, {"error": "unknown job"})
                return
            payload = {"job_id": job.job_id, "state": job.state}
            if job.error is not None:
                payload["error"] = job.error
        self._send(200, payload)

    def _job_result(self, job_id: str) -> None:
        with self.state.lock:
            job = self.state.jobs.get(job_id)
            if job is None:
                self._send(404, {"error": "unknown job"})
                return
            state, counts, error = job.state, job.counts, job.error
        if state == "DONE":
            self._send(200, counts)
        elif state == "FAILED":
            self._send(410, {"error": error or "job failed"})
        else:
            self._send(409, {"error": "not ready"})


class RemoteServer:
    """Owns the HTTP server thread and the job worker pool."""

    def __init__(self, config: ServerConfig | None = None):
        self.config = config or ServerConfig()
        self._state = _ServiceState(self.config)
        handler = type("BoundHandler", (_Handler,), {"state": self._state})
        self._httpd = ThreadingHTTPServer((self.config.host, self.config.port), handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def endpoint(self) -> str:
        return f"http://{self.config.host}:{self.port}"

    def start(self) -> "RemoteServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        logger.info("remote service listening on %s", self.endpoint)
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self._state.pool.shutdown(wait=False)

    def __enter__(self) -> "RemoteServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="qexec remote job service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8748)
    parser.add_argument("--delay", type=float, default=0.0, help="artificial seconds before each job runs")
    parser.add_argument("--api-key", default=None)
    parser.add_argument("--noise-p", type=float, default=0.05, help="depolarizing p of the noisy backend")
    parser.add_argument(
        "--only", choices=["ideal", "noisy"], default=None, help="host a single backend"
    )
    args = parser.parse_args(argv)

    backends = []
    if args.only in (None, "ideal"):
        backends.append(ServerBackend("statevector"))
    if args.only in (None, "noisy"):
        backends.append(ServerBackend("noisy_statevector", NoiseSpec(args.noise_p)))
    config = ServerConfig(
        host=args.host, port=args.port, delay=args.delay, api_key=args.api_key, backends=backends
    )
    server = RemoteServer(config).start()
    print(f"serving on {server.endpoint} (backends: {', '.join(b.name for b in backends)})")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
