# Copyright (c) the UGICM Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes a small random CLIP-style image tower and its reference embedding.

The forward pass uses torch.nn.MultiheadAttention and torch.nn.LayerNorm, so
it shares no code with the C++ implementation.

Usage: python3 tests/oracles/vit_oracle.py OUT.ugta
"""
import math
import os
import sys

import torch
import torch.nn.functional as F

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "tools"))
from ugicm_archive import write_archive  # noqa: E402

MEAN = torch.tensor([0.48145466, 0.4578275, 0.40821073], dtype=torch.float64)
STD = torch.tensor([0.26862954, 0.26130258, 0.27577711], dtype=torch.float64)
CFG = dict(resolution=32, patch=8, width=24, layers=2, heads=3, output_dim=10)


def make_weights():
    g = torch.Generator().manual_seed(1234)
    w, p, L = CFG["width"], CFG["patch"], CFG["layers"]
    grid = CFG["resolution"] // p

    def r(*shape, scale=0.2):
        return torch.randn(*shape, generator=g, dtype=torch.float64) * scale

    s = {
        "visual.conv1.weight": r(w, 3, p, p, scale=0.05),
        "visual.class_embedding": r(w),
        "visual.positional_embedding": r(grid * grid + 1, w),
        "visual.ln_pre.weight": 1 + r(w, scale=0.1),
        "visual.ln_pre.bias": r(w, scale=0.1),
        "visual.ln_post.weight": 1 + r(w, scale=0.1),
        "visual.ln_post.bias": r(w, scale=0.1),
        "visual.proj": r(w, CFG["output_dim"]),
    }
    for i in range(L):
        b = f"visual.transformer.resblocks.{i}."
        s[b + "ln_1.weight"] = 1 + r(w, scale=0.1)
        s[b + "ln_1.bias"] = r(w, scale=0.1)
        s[b + "attn.in_proj_weight"] = r(3 * w, w)
        s[b + "attn.in_proj_bias"] = r(3 * w, scale=0.1)
        s[b + "attn.out_proj.weight"] = r(w, w)
        s[b + "attn.out_proj.bias"] = r(w, scale=0.1)
        s[b + "ln_2.weight"] = 1 + r(w, scale=0.1)
        s[b + "ln_2.bias"] = r(w, scale=0.1)
        s[b + "mlp.c_fc.weight"] = r(4 * w, w)
        s[b + "mlp.c_fc.bias"] = r(4 * w, scale=0.1)
        s[b + "mlp.c_proj.weight"] = r(w, 4 * w, scale=0.1)
        s[b + "mlp.c_proj.bias"] = r(w, scale=0.1)
    return s


def layer_norm(x, s, name):
    return F.layer_norm(x, x.shape[-1:], s[name + ".weight"], s[name + ".bias"], eps=1e-5)


def embed(x, s):
    w, heads = CFG["width"], CFG["heads"]
    x = F.interpolate(x, size=(CFG["resolution"],) * 2, mode="bilinear",
                      align_corners=False, antialias=False)
    x = (x - MEAN.view(1, 3, 1, 1)) / STD.view(1, 3, 1, 1)
    x = F.conv2d(x, s["visual.conv1.weight"], stride=CFG["patch"])
    x = x.flatten(2).transpose(1, 2)
    cls = s["visual.class_embedding"].expand(x.shape[0], 1, w)
    x = torch.cat([cls, x], dim=1) + s["visual.positional_embedding"]
    x = layer_norm(x, s, "visual.ln_pre")
    for i in range(CFG["layers"]):
        b = f"visual.transformer.resblocks.{i}."
        attn = torch.nn.MultiheadAttention(w, heads, batch_first=True, dtype=torch.float64)
        attn.in_proj_weight.data = s[b + "attn.in_proj_weight"]
        attn.in_proj_bias.data = s[b + "attn.in_proj_bias"]
        attn.out_proj.weight.data = s[b + "attn.out_proj.weight"]
        attn.out_proj.bias.data = s[b + "attn.out_proj.bias"]
        h = layer_norm(x, s, b + "ln_1")
        x = x + attn(h, h, h, need_weights=False)[0]
        h = layer_norm(x, s, b + "ln_2")
        h = F.linear(h, s[b + "mlp.c_fc.weight"], s[b + "mlp.c_fc.bias"])
        h = h * torch.sigmoid(1.702 * h)
        x = x + F.linear(h, s[b + "mlp.c_proj.weight"], s[b + "mlp.c_proj.bias"])
    x = layer_norm(x[:, 0, :], s, "visual.ln_post") @ s["visual.proj"]
    return x / x.norm(dim=1, keepdim=True)


def main():
    s = make_weights()
    write_archive(sys.argv[1], sorted((k, v.numpy()) for k, v in s.items()), CFG)
    h, w = 40, 48
    x = torch.zeros(1, 3, h, w, dtype=torch.float64)
    for c in range(3):
        for i in range(h):
            for j in range(w):
                x[0, c, i, j] = 0.5 + 0.4 * math.sin(0.3 * i + 0.7 * j + c)
    with torch.no_grad():
        e = embed(x, s)[0]
    print(" ".join(f"{v:.17g}" for v in e.tolist()))


if __name__ == "__main__":
    main()
