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

"""Converts an OpenAI CLIP checkpoint (e.g. ViT-B-32.pt) into a ugicm archive.

Usage: python3 tools/convert_clip_weights.py ViT-B-32.pt clip-vit-b32.ugta

Only the image tower ("visual.*") is kept. Requires torch.
"""
import argparse
import sys

import torch

from ugicm_archive import write_archive


def load_state_dict(path):
    try:
        return torch.jit.load(path, map_location="cpu").state_dict()
    except RuntimeError:
        return torch.load(path, map_location="cpu")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("checkpoint")
    parser.add_argument("output")
    args = parser.parse_args()

    state = {k: v.double().numpy() for k, v in load_state_dict(args.checkpoint).items()
             if k.startswith("visual.")}
    if "visual.conv1.weight" not in state:
        sys.exit("not a CLIP vision-transformer checkpoint")
    width, _, patch, _ = state["visual.conv1.weight"].shape
    tokens = state["visual.positional_embedding"].shape[0]
    grid = int(round((tokens - 1) ** 0.5))
    layers = len({k.split(".")[3] for k in state if k.startswith("visual.transformer.resblocks.")})
    metadata = {
        "resolution": grid * patch,
        "patch": patch,
        "width": width,
        "layers": layers,
        "heads": width // 64,
        "output_dim": state["visual.proj"].shape[1],
    }
    write_archive(args.output, sorted(state.items()), metadata, float32=True)
    print(metadata)


if __name__ == "__main__":
    main()
