"""Activation sparsity pays for itself: skip weight fetches after ReLU.

A small quantized MLP runs twice with identical weights. The second run
skips fetching down-projection weight columns whose input activation is
zero. Logits must come out bit-identical; only traffic and cycles change.
"""

import numpy as np

from socsim import ReluMlpConfig, Soc, SocConfig, build_relu_mlp, relu_infer

mcfg = ReluMlpConfig(d_model=128, d_ff=512, layers=4, vocab=256)
token = 42

runs = {}
for sparse in (False, True):
    soc = Soc(SocConfig(pipelined_nmce=True))
    model = build_relu_mlp(soc, mcfg, np.random.default_rng(20260815))
    runs[sparse] = relu_infer(soc, model, token, sparse_fetch=sparse)

dense, sp = runs[False], runs[True]
assert np.array_equal(dense.logits, sp.logits)
print(f"model: d_model={mcfg.d_model} d_ff={mcfg.d_ff} "
      f"layers={mcfg.layers} vocab={mcfg.vocab}")
print(f"logits bit-identical: True (top token {int(np.argmax(sp.logits))})")
print()
print(f"measured activation sparsity: {sp.activation_sparsity:.1%}")
print(f"down-projection weight bytes, dense fetch:  "
      f"{dense.down_proj_bytes:>9}")
print(f"down-projection weight bytes, sparse fetch: {sp.down_proj_bytes:>9}"
      f"  ({sp.down_proj_bytes / dense.down_proj_bytes:.1%})")
print(f"cycles: {dense.cycles} dense vs {sp.cycles} sparse "
      f"({dense.cycles / sp.cycles:.2f}x)")
print()
print("the fetch ratio tracks (1 - sparsity) exactly: a zero activation")
print("contributes nothing to the output, so its weight column never loads")
