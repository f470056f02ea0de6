"""Anatomy of the 1D convolutional network, layer by layer.

The architecture is deliberately small: two convolution stages extract a
handful of spectral features (peak heights, widths, areas), max pooling
compresses the wavelength axis, and two small dense layers turn the
features into one regression output.  Filter sizes follow the instrument:
detail narrower than the ~30 px optical resolution is unresolvable, so the
first filters span 40 px and the second stage half of that.

Run:  python demos/02_network_anatomy.py
"""

import numpy as np

from olivenet import HyperParams, build_network, forward
from olivenet.nn import (
    conv1d_forward,
    dense_forward,
    maxpool_forward,
    network_shapes,
)

hp = HyperParams()  # the selected configuration: 6/40, pool 8, 4/20, 16-8-1
print("hyperparameters:", hp)

shapes = network_shapes(hp, input_len=1024)
print("\nlength of the signal after each stage:")
for name, length in shapes.items():
    print(f"  {name:>8}: {length}")

rng = np.random.default_rng(0)
net = build_network(hp, 1024, rng)
print(f"\ntrainable parameters: {net.num_parameters()}")

# The same forward pass can be spelled out with the single-sample layer
# operations; this is exactly what the engine computes, just slower.
x = rng.standard_normal(1024)
x = (x - x.mean()) / x.std()

h = conv1d_forward(x, net.conv1)
h = np.maximum(h, 0.0)
print(f"\nconv1 output: {h.shape[0]} feature maps of length {h.shape[1]}")
h, argmax = maxpool_forward(h, hp.pool)
print(f"pooled:       {h.shape[0]} x {h.shape[1]} (argmax kept for backprop)")
h = np.maximum(conv1d_forward(h, net.conv2), 0.0)
print(f"conv2 output: {h.shape[0]} x {h.shape[1]}")
flat = h.reshape(-1)
out = dense_forward(dense_forward(dense_forward(flat, net.dense1), net.dense2),
                    net.output)
print(f"dense head:   {flat.size} -> {net.dense1.weights.shape[0]} -> "
      f"{net.dense2.weights.shape[0]} -> 1")

fast = forward(net, x)
print(f"\nlayer-by-layer result: {out[0]:+.12f}")
print(f"engine result:         {fast:+.12f}")
print(f"difference:            {abs(out[0] - fast):.2e} "
      "(two implementations of the same map)")
