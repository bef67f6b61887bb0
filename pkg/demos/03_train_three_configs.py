"""Training the data-only, KKT-only and combined networks from one initialization.

Runs at reduced size (2000 examples, 60 epochs) so it finishes in seconds;
pass larger values to preset_configs/GenConfig for the full-size runs.
"""
import numpy as np

from kktnet.dataset import GenConfig, generate
from kktnet.neural import gradcheck
from kktnet.trainer import preset_configs, preset_weights, train

# %% Gradients first: analytic backprop against extended-precision central differences
for mode in ("kkt", "data", "combined"):
    print(f"gradcheck {mode}: {gradcheck(0, preset_weights(mode)):.2e}")

# %% Train the three presets
data = generate(GenConfig(2000, seed=0))
curves = {}
for mode, cfg in preset_configs(epochs=60, batch_size=256).items():
    _, curves[mode] = train(data, cfg)
    print(mode, cfg.weights)

# %% Epoch averages. L_KKT and L_Data are the weighted terms actually optimized,
# so data-only logs L_KKT = 0 and KKT-only logs L_Data = 0; L_S is unweighted.
for mode, curve in curves.items():
    ls, lk, ld = curve.column("L_S"), curve.column("L_KKT"), curve.column("L_Data")
    print(f"{mode:9s} L_S {ls[0]:.4g} -> {ls[-1]:.4g}   L_KKT {lk[0]:.4g} -> {lk[-1]:.4g}"
          f"   L_Data {ld[0]:.4g} -> {ld[-1]:.4g}")

# %% KKT-only training works without any labels at all
bare = [ex.without_truth() for ex in data]
_, curve = train(bare, preset_configs(epochs=5)["kkt"])
print("label-free run, final L_KKT", curve.column("L_KKT")[-1])
