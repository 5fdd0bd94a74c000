"""Train a width-reduced recognizer on rendered text and watch it learn.

Uses the same four-conv-block + stacked-BiLSTM + CTC topology as the
full-size model, just narrower, on 40 synthetic lines.  Takes a couple of
minutes on a laptop CPU.
"""

import numpy as np

from scriptorium.corpus import build_charset
from scriptorium.decode import greedy_decode
from scriptorium.lineproc import normalize_line, resize_to_height
from scriptorium.nn import (
    Model,
    TrainConfig,
    TrainSample,
    build_recognizer,
    save_weights,
    train,
)

from _common import render_line_crop

rng = np.random.default_rng(0)
alphabet = "aceimnorst"
texts = ["".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=5))
         for _ in range(40)]
charset = build_charset(texts)
samples = [TrainSample(render_line_crop(t), t) for t in texts]

spec = build_recognizer(
    len(charset.chars),
    conv_channels=(8, 8, 16, 16),   # fiducial: (32, 32, 64, 64)
    lstm_hidden=48,                 # fiducial: 512 per direction
    lstm_layers=2,                  # fiducial: 3
    dropout=0.0,
    input_height=64,                # fiducial: 128
)
print(f"model: {Model(spec).parameter_count():,} parameters "
      f"(full-size would be ~19M)")

config = TrainConfig(lr0=3e-3, weight_decay=0.0, max_epochs=30, batch_size=2,
                     plateau_patience=40, seed=0, val_fraction=0.0, augment=False)
weights, history = train(
    samples, charset, config, spec=spec,
    epoch_callback=lambda h: print(
        f"epoch {h.epoch:3d}  loss {h.loss:7.3f}  cer {h.cer:5.1f}%  wer {h.wer:5.1f}%"
    ),
)

# Decode a few training lines with the final weights.
model = Model(spec, seed=0)
model.load_state(weights.tensors)
print("\nsample decodes:")
for sample in samples[:5]:
    line = resize_to_height(normalize_line(sample.crop), spec.input_height)
    logits = model.forward(line.pixels[None, None], train=False)[0]
    print(f"  truth={sample.text!r:10} decoded={greedy_decode(logits, charset)!r}")

with open("tiny_recognizer.bin", "wb") as fh:
    fh.write(save_weights(weights))
print("\nsaved weights to tiny_recognizer.bin")
