"""Reference external trainer for the temporaleval wire protocol.

Wraps a small pretrained-transformer fine-tuning loop (sequence or token
classification) with a masked-token continued-pretraining phase, served
over newline-delimited JSON on stdin/stdout.
"""

__version__ = "0.1.0"
