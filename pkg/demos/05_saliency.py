"""Per-sample saliency maps for a conv model.

Mean MI averages over the dataset, so it can only explain the model, not one
prediction. Dropping the averaging leaves pointwise MI: a signed per-sample
quantity per edge. Chaining pixel-to-channel pointwise terms with
channel-to-class terms gives a per-pixel map for one sample and one class:
positive pixels support the class, negative pixels oppose it.

Uses the trained digit-CNN bundle when fixtures exist (run `make fixtures`),
otherwise a small synthetic stand-in.
"""

import numpy as np

from nifflow import EstimatorConfig, load_dataset, load_model, saliency_map

from _common import fixture_bundle


def ascii_map(values, mask=None):
    scale = np.max(np.abs(values)) or 1.0
    glyphs = " .:-=+*#%@"
    for i, row in enumerate(values):
        line = ""
        for j, v in enumerate(row):
            if mask is not None and not mask[i, j]:
                line += "  "
            else:
                idx = int(min(abs(v) / scale, 1.0) * (len(glyphs) - 1))
                char = glyphs[idx]
                line += (char if v >= 0 else char.lower() if char.isalpha() else "-") + " "
        print("   " + line)


bundle = fixture_bundle("digits_cnn")
if bundle is None:
    print("fixtures not generated; falling back to a synthetic 4x4 image task")
    from nifflow import Dataset, Layer, ModelGraph

    rng = np.random.default_rng(0)
    feats = np.abs(rng.normal(size=(80, 16)))
    labels = (feats[:, 5] > np.median(feats[:, 5])).astype(int)
    data = Dataset(features=feats, labels=labels, image_shape=(4, 4, 1))
    model = ModelGraph(
        layers=[
            Layer("conv2d", "relu", rng.normal(size=(2, 1, 2, 2)), np.zeros(2)),
            Layer("flatten"),
            Layer("dense", "softmax", rng.normal(size=(2, 18)), np.zeros(2)),
        ],
        input_shape=(4, 4, 1),
        class_count=2,
    )
    sample = 0
else:
    model = load_model(bundle / "model.json")
    data = load_dataset(bundle / "eval.csv")
    sample = 17

target = int(data.labels[sample])
smap = saliency_map(model, data, sample, target, EstimatorConfig())

image = data.features[sample].reshape(data.image_shape)[:, :, 0]
print(f"sample {sample}, true class {target}")
print("\n== input image ==")
ascii_map(image)
print("\n== saliency toward the true class (magnitude; lowercase = negative) ==")
ascii_map(smap.values[:, :, 0])

flat = smap.values.reshape(-1)
top = np.argsort(flat)[-10:][::-1]
print("\nten most supportive pixels (row, col):",
      [(int(p // image.shape[1]), int(p % image.shape[1])) for p in top])
print("pixels constant across the dataset get exactly zero saliency "
      f"({int(np.sum(flat == 0.0))} of {flat.size} here)")
