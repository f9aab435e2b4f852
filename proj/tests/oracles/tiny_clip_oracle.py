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

"""Independent reference for the tiny embedding backbone and the global loss.

Re-derives the backbone weights from the seed with a pure-Python MT19937-64
and evaluates the network with PyTorch. Prints values that the C++ tests
freeze as golden numbers.
"""
import math

import torch
import torch.nn.functional as F

MASK = (1 << 64) - 1


class MT19937_64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & MASK
        for i in range(1, 312):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & MASK
        self.index = 312

    def _twist(self):
        upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF
        for i in range(312):
            x = (self.mt[i] & upper) | (self.mt[(i + 1) % 312] & lower)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            self.mt[i] = self.mt[(i + 156) % 312] ^ xa
        self.index = 0

    def next(self):
        if self.index >= 312:
            self._twist()
        y = self.mt[self.index]
        self.index += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & MASK

    def uniform(self, lo=0.0, hi=1.0):
        u = (self.next() >> 11) * 2.0 ** -53
        return lo + (hi - lo) * u


MEAN = torch.tensor([0.48145466, 0.4578275, 0.40821073], dtype=torch.float64)
STD = torch.tensor([0.26862954, 0.26130258, 0.27577711], dtype=torch.float64)


def tiny_weights(seed=0x74696E79):
    rng = MT19937_64(seed)
    widths = [3, 16, 32, 64]
    layers = []
    for i in range(3):
        cout, cin = widths[i + 1], widths[i]
        bound = math.sqrt(6.0 / (cin * 9))
        w = [rng.uniform(-bound, bound) for _ in range(cout * cin * 9)]
        b = [rng.uniform(-0.1, 0.1) for _ in range(cout)]
        layers.append((torch.tensor(w, dtype=torch.float64).reshape(cout, cin, 3, 3),
                       torch.tensor(b, dtype=torch.float64)))
    return layers


def embed(x, layers):
    x = F.interpolate(x, size=(32, 32), mode="bilinear", align_corners=False,
                      antialias=False)
    x = (x - MEAN.view(1, 3, 1, 1)) / STD.view(1, 3, 1, 1)
    for i, (w, b) in enumerate(layers):
        x = F.conv2d(x, w, b, stride=2, padding=1)
        if i < 2:
            x = torch.tanh(x)
    x = x.mean(dim=(2, 3))
    return x / x.norm(dim=1, keepdim=True)


def test_image(h, w):
    x = torch.zeros(1, 3, h, w, dtype=torch.float64)
    for c in range(3):
        for i in range(h):
            for j in range(w):
                x[0, c, i, j] = 0.5 + 0.4 * math.sin(0.3 * i + 0.7 * j + c)
    return x


def main():
    layers = tiny_weights()
    x = test_image(40, 48)
    rng = MT19937_64(5)
    noise = torch.tensor([rng.uniform(-0.1, 0.1) for _ in range(x.numel())],
                         dtype=torch.float64).reshape(x.shape)
    xhat = x + noise
    ex, ehat = embed(x, layers), embed(xhat, layers)
    print(f"embed_x[0:3] {ex[0, 0].item():.17g} {ex[0, 1].item():.17g} {ex[0, 2].item():.17g}")
    print(f"loss_global {1.0 - (ex * ehat).sum().item():.17g}")


if __name__ == "__main__":
    main()
