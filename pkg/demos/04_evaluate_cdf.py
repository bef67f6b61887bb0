"""RMSE and squared-error CDFs on an independent test set, with SVG plots."""
import os
import tempfile

import numpy as np

from kktnet.dataset import GenConfig, generate
from kktnet.evaluator import emit_cdf_csv, emit_svg_plots, evaluate
from kktnet.trainer import preset_configs, train

train_set = generate(GenConfig(2000, seed=0))
test_set = generate(GenConfig(500, seed=1))  # distinct seed, disjoint draws

reports, curves = {}, {}
for mode, cfg in preset_configs(epochs=40, batch_size=256).items():
    model, curves[mode] = train(train_set, cfg)
    reports[mode] = evaluate(model, test_set)

# %% RMSE table (normalized scale)
print("config     " + "  ".join(f"{c:>9s}" for c in reports["kkt"].components))
for mode, rep in reports.items():
    print(f"{mode:9s}  " + "  ".join(f"{v:9.4g}" for v in rep.rmse))

# %% Median squared error: does KKT-only training put more mass at small errors?
for name, k, d in zip(reports["kkt"].components, reports["kkt"].median_sq_error(),
                      reports["data"].median_sq_error()):
    print(f"{name}: kkt {k:.4g} vs data {d:.4g}")

# %% Write CSVs and SVG panels
out = os.environ.get("KKTNET_DEMO_OUT") or tempfile.mkdtemp(prefix="kktnet_")
for mode, rep in reports.items():
    d = os.path.join(out, mode)
    emit_cdf_csv(rep, d)
    emit_svg_plots(rep, d, curves[mode])
print("plots and CSVs in", out)
