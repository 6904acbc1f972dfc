"""Residual generator with per-column output activations.

A 128-dim Gaussian latent passes through three residual blocks of hidden
width 256. Each block runs FC -> BN -> ReLU -> FC -> BN on the main path and
concatenates its input onto the transformed output, so widths grow
128 -> 384 -> 640 -> 896 before the final projection to n_feat. FC layers
feeding a batch norm carry no bias.

Output activations per encoded column: sigmoid for continuous, row-wise
gumbel-softmax for one-hot groups (tau 0.2 while training, 1e-5 when
sampling), sigmoid for binary columns kept soft in train mode and
hard-thresholded at 0.5 in sample mode. Sample mode runs batch norm on
running statistics. The output bias starts below zero (see OUT_BIAS_INIT)
so the untrained sample cloud avoids the data region.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..errors import ParameterError
from ..tabular.encoding import EncodedMatrix
from ..tabular.schema import TableSchema
from .initialization import kaiming_uniform, xavier_uniform

LATENT_DIM = 128
HIDDEN_DIM = 256
N_BLOCKS = 3
TAU_TRAIN = 0.2
TAU_SAMPLE = 1e-5

# The continuous-column output biases start low so the initial sample cloud
# sits in a low-density corner of the encoded cube: early teacher votes are
# then near-unanimous (cheap under the accountant) and directionally
# coherent. Binary columns start at zero (soft value 0.5, uninformative) so
# teacher votes grade label/feature consistency from the first iteration;
# one-hot groups are unaffected either way (softmax is shift-invariant).
OUT_BIAS_INIT = -2.0


class _ResidualBlock:
    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator, tag: str):
        self.d_in = d_in
        self.d_out = d_in + hidden
        self.fc1 = dc.Tensor(kaiming_uniform(d_in, hidden, rng), requires_grad=True, name=f"{tag}.fc1.weight")
        self.fc2 = dc.Tensor(xavier_uniform(hidden, hidden, rng), requires_grad=True, name=f"{tag}.fc2.weight")
        self.bn1_gamma = dc.Tensor(np.ones((1, hidden)), requires_grad=True, name=f"{tag}.bn1.gamma")
        self.bn1_beta = dc.Tensor(np.zeros((1, hidden)), requires_grad=True, name=f"{tag}.bn1.beta")
        self.bn2_gamma = dc.Tensor(np.ones((1, hidden)), requires_grad=True, name=f"{tag}.bn2.gamma")
        self.bn2_beta = dc.Tensor(np.zeros((1, hidden)), requires_grad=True, name=f"{tag}.bn2.beta")
        self.bn1_state = dc.BatchNormState(hidden)
        self.bn2_state = dc.BatchNormState(hidden)
        self.tag = tag

    def forward(self, x: dc.Tensor, training: bool, momentum: float) -> dc.Tensor:
        h = dc.matmul(x, self.fc1)
        h = dc.batch_norm(h, self.bn1_gamma, self.bn1_beta, self.bn1_state, training, momentum)
        h = dc.relu(h)
        h = dc.matmul(h, self.fc2)
        h = dc.batch_norm(h, self.bn2_gamma, self.bn2_beta, self.bn2_state, training, momentum)
        return dc.concat([h, x])  # skip path is unnormalised

    def parameters(self):
        return [self.fc1, self.fc2, self.bn1_gamma, self.bn1_beta, self.bn2_gamma, self.bn2_beta]

    def named_arrays(self):
        out = {p.name: p.data for p in self.parameters()}
        out[f"{self.tag}.bn1.running_mean"] = self.bn1_state.running_mean
        out[f"{self.tag}.bn1.running_var"] = self.bn1_state.running_var
        out[f"{self.tag}.bn2.running_mean"] = self.bn2_state.running_mean
        out[f"{self.tag}.bn2.running_var"] = self.bn2_state.running_var
        return out


class Generator:
    """Maps z ~ N(0, I_128) to rows in the encoded representation."""

    def __init__(
        self,
        schema: TableSchema,
        rng: np.random.Generator,
        latent_dim: int = LATENT_DIM,
        hidden_dim: int = HIDDEN_DIM,
        n_blocks: int = N_BLOCKS,
        bn_momentum: float = 0.9,
        out_bias_init: float = OUT_BIAS_INIT,
    ):
        self.schema = schema
        self.latent_dim = latent_dim
        self.bn_momentum = bn_momentum
        self.blocks: list[_ResidualBlock] = []
        d = latent_dim
        for i in range(n_blocks):
            block = _ResidualBlock(d, hidden_dim, rng, tag=f"generator.block{i}")
            self.blocks.append(block)
            d = block.d_out
        self.out_weight = dc.Tensor(
            xavier_uniform(d, schema.n_feat, rng), requires_grad=True, name="generator.output.weight"
        )
        bias0 = np.zeros((1, schema.n_feat))
        for _, kind, start, stop in schema.layout():
            if kind == "continuous":
                bias0[0, start:stop] = float(out_bias_init)
        self.out_bias = dc.Tensor(bias0, requires_grad=True, name="generator.output.bias")
        self.width_chain = [latent_dim] + [b.d_out for b in self.blocks]

    def parameters(self):
        params = []
        for b in self.blocks:
            params.extend(b.parameters())
        params.extend([self.out_weight, self.out_bias])
        return params

    def named_arrays(self):
        out = {}
        for b in self.blocks:
            out.update(b.named_arrays())
        out[self.out_weight.name] = self.out_weight.data
        out[self.out_bias.name] = self.out_bias.data
        return out

    def forward(
        self,
        z: np.ndarray,
        mode: str,
        rng: np.random.Generator | None = None,
        gumbel_noises: dict | None = None,
        bn_training: bool | None = None,
    ) -> dc.Tensor:
        """Differentiable forward pass; `mode` is 'train' or 'sample'.

        Gumbel draws come from `rng` unless pre-drawn noise per categorical
        column is supplied in `gumbel_noises` (used to freeze grad checks).
        `bn_training` overrides the batch-norm mode: parameter-update passes
        use the running statistics so that small update batches are not
        coupled through batch re-centering, while data-production passes in
        train mode keep refreshing the running statistics.
        """
        if mode not in ("train", "sample"):
            raise ParameterError(f"generator: unknown mode {mode!r}")
        training = mode == "train"
        tau = TAU_TRAIN if training else TAU_SAMPLE
        if bn_training is not None:
            training = bn_training

        h = dc.constant(np.asarray(z, dtype=np.float64))
        for block in self.blocks:
            h = block.forward(h, training, self.bn_momentum)
        raw = dc.add(dc.matmul(h, self.out_weight), self.out_bias)

        pieces = []
        for name, kind, start, stop in self.schema.layout():
            piece = dc.slice_cols(raw, start, stop)
            if kind == "categorical":
                noise = gumbel_noises.get(name) if gumbel_noises else None
                piece = dc.gumbel_softmax(piece, tau, rng=rng, noise=noise)
            else:
                piece = dc.sigmoid(piece)
            pieces.append(piece)
        return dc.concat(pieces)

    def sample(self, n: int, rng: np.random.Generator, mode: str = "sample") -> np.ndarray:
        """Plain-array generation (no graph); hard outputs in sample mode."""
        if n < 1:
            raise ParameterError(f"generator.sample: n must be >= 1, got {n}")
        z = rng.standard_normal((n, self.latent_dim))
        with dc.no_grad():
            out = self.forward(z, mode, rng=rng).data.copy()
        if mode == "sample":
            for _, kind, start, stop in self.schema.layout():
                if kind == "binary":
                    out[:, start] = (out[:, start] > 0.5).astype(np.float64)
        return out


def generate_batch(gen: Generator, n: int, mode: str, rng: np.random.Generator) -> EncodedMatrix:
    """Synthetic rows in the encoded representation (provenance fixed)."""
    return EncodedMatrix(gen.sample(n, rng, mode=mode), gen.schema, provenance="synthetic")
