"""Protocol loop: newline-delimited JSON requests on stdin, responses on stdout.

stdout belongs to the protocol alone. Model libraries print load reports and
progress bars, so everything they write is redirected to stderr and the
response channel holds the only real stdout handle.
"""

from __future__ import annotations

import contextlib
import json
import sys

from .config import AdapterConfig, parse_args


def handle(engine, msg: dict) -> dict:
    op = msg.get("op")
    if op == "hello":
        return {"ok": True, "capabilities": {"supports_pretrain_phase": True}}
    if op == "train":
        model_id, dev_score = engine.train(
            task=msg.get("task"),
            seed=int(msg.get("seed", 0)),
            train_records=msg.get("train", []),
            dev_records=msg.get("dev", []),
            hparams=msg.get("hparams", {}),
            parent_id=msg.get("model_id"),
        )
        return {"ok": True, "model_id": model_id, "dev_score": dev_score,
                "phases": engine.phases(model_id)}
    if op == "pretrain":
        model_id = engine.pretrain(msg.get("model_id"), msg.get("texts", []))
        return {"ok": True, "model_id": model_id, "phases": engine.phases(model_id)}
    if op == "predict":
        labels = engine.predict(msg.get("model_id"), msg.get("records", []))
        return {"ok": True, "labels": labels}
    if op == "transcript":
        return {"ok": True, "phases": engine.phases(msg.get("model_id"))}
    return {"ok": False, "error": f"unknown op {op!r}"}


def serve(config: AdapterConfig, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout  # keep the real handle; sys.stdout gets redirected

    def respond(obj, req_id=None):
        if req_id is not None:
            obj["id"] = req_id
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    with contextlib.redirect_stdout(sys.stderr):
        try:
            from .engine import Engine  # heavy imports after stdout is protected

            engine = Engine(config)
        except Exception as exc:  # bad model path: report on the protocol, then exit
            respond({"ok": False, "error": f"cannot initialize adapter: {exc}"})
            return
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            req_id = None
            try:
                msg = json.loads(line)
                req_id = msg.get("id")
                result = handle(engine, msg)
            except Exception as exc:
                result = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
            respond(result, req_id)


def main(argv=None) -> int:
    config = parse_args(argv)
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
