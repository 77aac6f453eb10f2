#!/usr/bin/env python3
# Copyright 2026 The clipforensics Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the encoder parity fixture committed next to this script.

The fixture is a randomly initialised CLIP vision tower (ViT-B/32 layout,
shrunk to two layers and width 64) exported to ONNX with two named outputs,
plus five synthetic PNG images with their preprocessed tensors and reference
embeddings computed by the PyTorch model.

Preprocessing is implemented here in float64 numpy, independently of the C++
code it checks: shorter side to 224 with antialiased bicubic (a = -0.5,
support scaled by the downsampling factor), centre crop, per-channel
normalisation.

Requires: torch, transformers, onnx, onnxruntime, numpy, Pillow.
"""

import json
import math
import pathlib
import struct

import numpy as np
import onnx
import onnxruntime as ort
import torch
from PIL import Image
from transformers import CLIPVisionConfig, CLIPVisionModelWithProjection

HERE = pathlib.Path(__file__).resolve().parent
SIDE = 224
MEAN = [0.48145466, 0.4578275, 0.40821073]
STD = [0.26862954, 0.26130258, 0.27577711]


def cubic(x, a=-0.5):
    x = abs(x)
    if x < 1.0:
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    if x < 2.0:
        return (((x - 5.0) * x + 8.0) * x - 4.0) * a
    return 0.0


def resample_matrix(in_size, out_size):
    scale = in_size / out_size
    filterscale = max(scale, 1.0)
    support = 2.0 * filterscale
    m = np.zeros((out_size, in_size))
    for i in range(out_size):
        center = (i + 0.5) * scale
        lo = max(int(center - support + 0.5), 0)
        hi = min(int(center + support + 0.5), in_size)
        w = np.array([cubic((j - center + 0.5) / filterscale) for j in range(lo, hi)])
        m[i, lo:hi] = w / w.sum()
    return m


def preprocess(rgb):
    h, w, _ = rgb.shape
    x = rgb.astype(np.float64) / 255.0
    if w <= h:
        nw, nh = SIDE, int(SIDE * h / w)
    else:
        nw, nh = int(SIDE * w / h), SIDE
    rows = resample_matrix(h, nh)
    cols = resample_matrix(w, nw)
    out = np.empty((nh, nw, 3))
    for c in range(3):
        out[:, :, c] = rows @ x[:, :, c] @ cols.T
    out = np.clip(out, 0.0, 1.0)
    top = int(round((nh - SIDE) / 2.0))
    left = int(round((nw - SIDE) / 2.0))
    out = out[top:top + SIDE, left:left + SIDE, :]
    chw = np.transpose(out, (2, 0, 1)).copy()
    for c in range(3):
        chw[c] = (chw[c] - MEAN[c]) / STD[c]
    return chw.astype(np.float32)


def synth_image(index, width, height):
    rng = np.random.default_rng(1000 + index)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width, 3))
    for c in range(3):
        fx, fy = rng.uniform(0.5, 4.0, size=2)
        phase = rng.uniform(0, 2 * math.pi)
        img[:, :, c] = 0.5 + 0.3 * np.sin(2 * math.pi * (fx * xx / width + fy * yy / height) + phase)
    for _ in range(6):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        r = rng.uniform(0.05, 0.25) * min(width, height)
        color = rng.uniform(0, 1, size=3)
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        img[mask] = 0.6 * img[mask] + 0.4 * color
    img += rng.normal(0, 0.03, size=img.shape)
    return np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)


class TwoTaps(torch.nn.Module):
    def __init__(self, model):
        super().__init__()
        self.model = model

    def forward(self, pixel_values):
        pooled = self.model.vision_model(pixel_values=pixel_values).pooler_output
        return pooled, self.model.visual_projection(pooled)


def write_f32(path, values):
    arr = np.asarray(values, dtype="<f4").ravel()
    path.write_bytes(arr.tobytes())


def main():
    torch.manual_seed(0)
    cfg = CLIPVisionConfig(image_size=SIDE, patch_size=32, hidden_size=64,
                           intermediate_size=128, num_hidden_layers=2,
                           num_attention_heads=4, projection_dim=32,
                           hidden_act="quick_gelu")
    model = CLIPVisionModelWithProjection(cfg).eval()
    # Random init leaves tiny weights; widen them so the taps carry signal.
    with torch.no_grad():
        for p in model.parameters():
            if p.dim() > 1:
                p.mul_(4.0)
    wrapped = TwoTaps(model).eval()

    graph = HERE / "tiny_clip.onnx"
    torch.onnx.export(wrapped, (torch.zeros(1, 3, SIDE, SIDE),), str(graph),
                      input_names=["pixel_values"],
                      output_names=["features_penultimate", "features_final"],
                      dynamic_axes={"pixel_values": {0: "batch"}},
                      opset_version=17, dynamo=False)
    # Pin output metadata: dynamic batch, fixed feature widths.
    proto = onnx.load(str(graph))
    widths = {"features_penultimate": cfg.hidden_size, "features_final": cfg.projection_dim}
    for out in proto.graph.output:
        dims = out.type.tensor_type.shape.dim
        dims[0].dim_param = "batch"
        dims[1].dim_value = widths[out.name]
    onnx.checker.check_model(proto)
    onnx.save(proto, str(graph))
    session = ort.InferenceSession(str(graph), providers=["CPUExecutionProvider"])

    (HERE / "images").mkdir(exist_ok=True)
    (HERE / "fixtures").mkdir(exist_ok=True)
    sizes = [(320, 240), (224, 224), (300, 500), (896, 448), (150, 130)]
    fixture_files = []
    for i, (w, h) in enumerate(sizes):
        rgb = synth_image(i, w, h)
        img_rel = f"images/fixture_{i}.png"
        Image.fromarray(rgb, "RGB").save(HERE / img_rel)
        tensor = preprocess(np.asarray(Image.open(HERE / img_rel).convert("RGB")))
        with torch.no_grad():
            pen, fin = wrapped(torch.from_numpy(tensor[None]))
        pen = pen.numpy()[0]
        fin = fin.numpy()[0]
        ort_pen, ort_fin = session.run(None, {"pixel_values": tensor[None]})
        assert np.allclose(ort_pen[0], pen, atol=1e-4), "onnx graph disagrees with torch"
        assert np.allclose(ort_fin[0], fin, atol=1e-4), "onnx graph disagrees with torch"
        stem = f"fixture_{i}"
        write_f32(HERE / "fixtures" / f"{stem}.tensor.f32", tensor)
        write_f32(HERE / "fixtures" / f"{stem}.penultimate.f32", pen)
        write_f32(HERE / "fixtures" / f"{stem}.final.f32", fin)
        record = {
            "image": f"../{img_rel}",
            "width": w,
            "height": h,
            "tensor": f"{stem}.tensor.f32",
            "tensor_checksum": {"sum": float(tensor.astype(np.float64).sum()),
                                "sum_sq": float((tensor.astype(np.float64) ** 2).sum())},
            "penultimate": f"{stem}.penultimate.f32",
            "final": f"{stem}.final.f32",
        }
        (HERE / "fixtures" / f"{stem}.json").write_text(json.dumps(record, indent=2) + "\n")
        fixture_files.append(f"fixtures/{stem}.json")

    manifest = {
        "checkpoint": "tiny-clip-vit-b32-2layer-random-seed0",
        "pretrain_tag": "random-init",
        "graph": graph.name,
        "preprocess": {"target_side": SIDE, "interpolation": "bicubic", "crop": "center",
                       "mean": MEAN, "std": STD},
        "dims": {"penultimate": cfg.hidden_size, "final": cfg.projection_dim},
        "fixtures": fixture_files,
    }
    (HERE / "tiny_clip.export.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
