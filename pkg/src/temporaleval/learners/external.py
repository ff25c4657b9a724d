"""Client for external trainers speaking newline-delimited JSON over stdio.

The framework launches the trainer command as a child process and exchanges
one JSON object per line, one request in flight at a time:

  {"op": "hello", "id": 1}
      -> {"ok": true, "capabilities": {"supports_pretrain_phase": bool, ...}}
  {"op": "train", "id": 2, "task": "classification", "seed": 7,
   "train": [record...], "dev": [record...], "hparams": {...}}
      -> {"ok": true, "model_id": "m1", "dev_score": 0.93}
  {"op": "pretrain", "id": 3, "model_id": "m1" | null, "texts": ["..."]}
      -> {"ok": true, "model_id": "m2"}
  {"op": "predict", "id": 4, "model_id": "m2", "records": [unlabeled record...]}
      -> {"ok": true, "labels": ["pos", ...]}  (or lists of BIO tags)

Any failure is {"ok": false, "error": "..."} and the process keeps serving.
A "model_id" inside a train request asks the trainer to continue from that
model, which is how multi-phase pipelines keep model continuity. Records on
the wire use the corpus JSONL shape; predict records carry no labels.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

from ..errors import ProtocolError, TrainerError
from ..records import Task, TaskMetricKind, TimestampedRecord, record_to_obj, split_tag
from .base import ModelArtifact, TrainerSpec, check_training_inputs

DEFAULT_TIMEOUT = 600.0


def record_wire_obj(record: TimestampedRecord, with_label: bool) -> dict:
    if with_label:
        return record_to_obj(record)
    return {"id": record.id, "timestamp": record.timestamp, "tokens": list(record.tokens)}


@dataclass
class ExternalModelHandle:
    """Reference to a model living inside a trainer process."""

    model_id: str
    client: "ExternalTrainerClient"
    owns_client: bool = False
    task: Optional[Task] = None

    def close(self) -> None:
        if self.owns_client:
            self.client.close()


class ExternalTrainerClient:
    """One trainer child process; safe for sequential requests from any thread."""

    def __init__(self, command: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.command = tuple(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._next_id = 0
        self.capabilities: Optional[dict] = None
        self._stderr_tail: deque = deque(maxlen=50)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise TrainerError(f"cannot launch trainer {self.command}: {exc}")
        self._lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

    @classmethod
    def for_spec(cls, spec: TrainerSpec) -> "ExternalTrainerClient":
        return cls(spec.command, timeout=spec.hp_float("timeout", DEFAULT_TIMEOUT))

    def _pump_stdout(self) -> None:
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _pump_stderr(self) -> None:
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    def _diagnostics(self) -> str:
        tail = "\n".join(self._stderr_tail)
        return f" (stderr tail:\n{tail})" if tail else ""

    def request(self, op: str, payload: dict, timeout: Optional[float] = None) -> dict:
        with self._lock:
            self._next_id += 1
            req_id = self._next_id
            message = {"op": op, "id": req_id}
            message.update(payload)
            if self._proc.poll() is not None:
                raise TrainerError(f"trainer exited with code {self._proc.returncode} before request {req_id}{self._diagnostics()}")
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TrainerError(f"trainer pipe closed during request {req_id}: {exc}{self._diagnostics()}")
            try:
                line = self._lines.get(timeout=timeout or self.timeout)
            except queue.Empty:
                self._proc.kill()
                raise TrainerError(f"trainer timed out on {op} request {req_id} after {timeout or self.timeout}s{self._diagnostics()}")
            if line is None:
                raise TrainerError(f"trainer exited during {op} request {req_id}{self._diagnostics()}")
            try:
                resp = json.loads(line)
            except json.JSONDecodeError:
                raise ProtocolError(f"request {req_id}: trainer sent a non-JSON line: {line[:200]!r}")
            if not isinstance(resp, dict):
                raise ProtocolError(f"request {req_id}: trainer response is not an object")
            if "id" in resp and resp["id"] != req_id:
                raise ProtocolError(f"request {req_id}: trainer answered with id {resp['id']}")
            if resp.get("ok") is not True:
                raise TrainerError(f"trainer error on {op} request {req_id}: {resp.get('error', 'unspecified')}")
            return resp

    def hello(self) -> dict:
        if self.capabilities is None:
            resp = self.request("hello", {})
            caps = resp.get("capabilities")
            if not isinstance(caps, dict):
                raise ProtocolError("hello response carries no capabilities object")
            self.capabilities = caps
        return self.capabilities

    def train_model(
        self,
        task: Task,
        seed: int,
        train_records: Sequence[TimestampedRecord],
        dev_records: Sequence[TimestampedRecord],
        hparams: dict,
        model_id: Optional[str] = None,
    ) -> tuple:
        self.hello()
        payload = {
            "task": task.value,
            "seed": seed,
            "train": [record_wire_obj(r, with_label=True) for r in train_records],
            "dev": [record_wire_obj(r, with_label=True) for r in dev_records],
            "hparams": hparams,
        }
        if model_id is not None:
            payload["model_id"] = model_id
        resp = self.request("train", payload)
        if "model_id" not in resp or "dev_score" not in resp:
            raise ProtocolError("train response must carry model_id and dev_score")
        return str(resp["model_id"]), float(resp["dev_score"])

    def pretrain_model(self, model_id: Optional[str], texts: Sequence[str]) -> str:
        self.hello()
        if not self.capabilities.get("supports_pretrain_phase"):
            raise TrainerError("trainer advertised no pretrain support in hello")
        resp = self.request("pretrain", {"model_id": model_id, "texts": list(texts)})
        if "model_id" not in resp:
            raise ProtocolError("pretrain response must carry model_id")
        return str(resp["model_id"])

    def predict_model(self, model_id: str, records: Sequence[TimestampedRecord], task: Task) -> list:
        resp = self.request("predict", {"model_id": model_id, "records": [record_wire_obj(r, with_label=False) for r in records]})
        req_id = self._next_id
        labels = resp.get("labels")
        if not isinstance(labels, list) or len(labels) != len(records):
            got = len(labels) if isinstance(labels, list) else "no"
            raise ProtocolError(f"request {req_id}: expected {len(records)} labels, got {got}")
        if task is Task.SEQUENCE_LABELING:
            out = []
            for rec, tags in zip(records, labels):
                if not isinstance(tags, list) or len(tags) != len(rec.tokens):
                    raise ProtocolError(f"request {req_id}: bad tag sequence for record {rec.id}")
                for t in tags:
                    split_tag(t)  # raises DataError on scheme violations
                out.append(tuple(tags))
            return out
        return [str(x) for x in labels]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalTrainerClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def train_external(
    spec: TrainerSpec,
    train_records: Sequence[TimestampedRecord],
    dev_records: Sequence[TimestampedRecord],
    metric: TaskMetricKind,
    seed: int,
    client: Optional[ExternalTrainerClient] = None,
    model_id: Optional[str] = None,
) -> ModelArtifact:
    check_training_inputs(train_records, dev_records, metric.task)
    owns = client is None
    cli = client or ExternalTrainerClient.for_spec(spec)
    try:
        hparams = dict(spec.hyperparams)
        hparams["metric"] = metric.spec_string()
        mid, dev_score = cli.train_model(metric.task, seed, train_records, dev_records, hparams, model_id=model_id)
    except Exception:
        if owns:
            cli.close()
        raise
    handle = ExternalModelHandle(model_id=mid, client=cli, owns_client=owns, task=metric.task)
    return ModelArtifact(trainer=spec, parameters=handle, training_split=-1, seed=seed, dev_score=dev_score)


def predict_external(artifact: ModelArtifact, records: Sequence[TimestampedRecord]) -> list:
    handle = artifact.parameters
    if not isinstance(handle, ExternalModelHandle):
        raise TrainerError("artifact does not hold an external model handle")
    task = handle.task or _infer_task(records)
    return handle.client.predict_model(handle.model_id, records, task)


def _infer_task(records: Sequence[TimestampedRecord]) -> Task:
    for r in records:
        if r.label is not None:
            return r.task
    return Task.CLASSIFICATION


def pretrain_external(artifact_or_spec, texts: Sequence[str]) -> ModelArtifact:
    if isinstance(artifact_or_spec, ModelArtifact):
        artifact = artifact_or_spec
        handle = artifact.parameters
        if not isinstance(handle, ExternalModelHandle):
            raise TrainerError("pretrain phase needs an external model handle")
        new_id = handle.client.pretrain_model(handle.model_id, texts)
        new_handle = ExternalModelHandle(
            model_id=new_id, client=handle.client, owns_client=handle.owns_client, task=handle.task
        )
        return ModelArtifact(
            trainer=artifact.trainer,
            parameters=new_handle,
            training_split=artifact.training_split,
            seed=artifact.seed,
            dev_score=artifact.dev_score,
            phases=artifact.phases,
        )
    spec: TrainerSpec = artifact_or_spec
    client = ExternalTrainerClient.for_spec(spec)
    new_id = client.pretrain_model(None, texts)
    handle = ExternalModelHandle(model_id=new_id, client=client, owns_client=True)
    return ModelArtifact(trainer=spec, parameters=handle, training_split=-1, seed=-1, dev_score=float("nan"))
