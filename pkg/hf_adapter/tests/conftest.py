from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

TOKENS = [f"w{i:03d}" for i in range(60)]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small randomly initialized transformer saved locally (no network)."""
    from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

    d = tmp_path_factory.mktemp("tinybert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + TOKENS
    (d / "vocab.txt").write_text("\n".join(vocab), encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(d / "vocab.txt"), do_lower_case=False)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    import torch

    torch.manual_seed(0)
    model = BertForMaskedLM(config)
    model.save_pretrained(d)
    tokenizer.save_pretrained(d)
    return str(d)


class AdapterProcess:
    """Raw protocol driver: the tests speak JSON lines, nothing else."""

    def __init__(self, model_dir: str, extra_args=()):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "hf_trainer_adapter.serve", "--model", model_dir,
             "--max-epochs", "2", "--batch-size", "16", *extra_args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
        self._next_id = 0

    def send_raw(self, text: str) -> dict:
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        assert line, f"adapter died; stderr tail: {self.stderr_tail()}"
        return json.loads(line)

    def request(self, op: str, **payload) -> dict:
        self._next_id += 1
        message = {"op": op, "id": self._next_id}
        message.update(payload)
        resp = self.send_raw(json.dumps(message))
        assert resp.get("id") == self._next_id
        return resp

    def stderr_tail(self) -> str:
        try:
            self.proc.stdin.close()
            _, err = self.proc.communicate(timeout=5)
            return err[-2000:]
        except Exception:
            return "<unavailable>"

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()


@pytest.fixture
def adapter(tiny_model_dir):
    proc = AdapterProcess(tiny_model_dir)
    yield proc
    proc.close()


def make_records(n, labels=("pos", "neg"), tagged=False, offset=0):
    records = []
    for k in range(n):
        label = labels[k % len(labels)]
        base = (k * 3 + offset) % 50
        tokens = [TOKENS[base], TOKENS[base + 1], TOKENS[(base + 7) % 50]]
        rec = {"id": f"r{k + offset:04d}", "timestamp": 2014, "tokens": tokens}
        if tagged:
            rec["tags"] = ["B-X" if label == labels[0] else "O", "O", "O"]
        else:
            rec["label"] = label
        records.append(rec)
    return records
